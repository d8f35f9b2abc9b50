//! Per-rule checks: relation references, reserved-relation placement,
//! type unification and groundedness.

use std::collections::BTreeMap;

use ethnum::{I256, U256};

use super::ground::{self, Bound};
use super::{AnalysisErrorKind as E, Arg, BodyLit, Operand, Rule, RuleKind, TypedAtom, SEND};
use crate::frontend::{AggKind, Atom, Constant, Literal, RelationDecl, RelationKind, RuleDecl, Term};
use crate::value::{Address, CmpOp, ColumnType, Value};

type Lookup<'a> = BTreeMap<&'a str, &'a RelationDecl>;

pub fn check_rule(decl: &RuleDecl, index: usize, lookup: &Lookup) -> Result<Rule, Vec<E>> {
    let mut errs = Vec::new();

    let check_atom = |atom: &Atom, errs: &mut Vec<E>| -> Option<RelationKind> {
        let Some(d) = lookup.get(atom.relation.as_str()) else {
            errs.push(E::UnknownRelation(atom.relation.clone()));
            return None;
        };
        if d.arity() != atom.args.len() {
            errs.push(E::ArityMismatch { relation: atom.relation.clone(), expected: d.arity(), found: atom.args.len() });
            return None;
        }
        Some(d.kind)
    };

    match check_atom(&decl.head, &mut errs) {
        Some(RelationKind::Transaction) => errs.push(E::WriteToTransactionRelation(decl.head.relation.clone())),
        Some(RelationKind::Reserved) if decl.head.relation != SEND => {
            errs.push(E::WriteToReadOnlyReserved(decl.head.relation.clone()))
        }
        _ => {}
    }

    let mut tx_literals = Vec::new();
    let mut reserved_reads = Vec::new();
    for (i, lit) in decl.body.iter().enumerate() {
        match lit {
            Literal::Relational(atom) => match check_atom(atom, &mut errs) {
                Some(RelationKind::Transaction) => tx_literals.push(i),
                Some(RelationKind::Reserved) if atom.relation == SEND => errs.push(E::ReadFromWriteOnlyReserved),
                Some(RelationKind::Reserved) => reserved_reads.push(atom.relation.clone()),
                _ => {}
            },
            Literal::Aggregation { target, bound, over, .. } => {
                match check_atom(over, &mut errs) {
                    Some(RelationKind::Transaction) | Some(RelationKind::Reserved) => errs.push(E::InvalidAggregation(
                        format!("cannot aggregate over `{}`", over.relation),
                    )),
                    _ => {}
                }
                let uses = over.vars().filter(|v| v == bound).count();
                if uses != 1 {
                    errs.push(E::InvalidAggregation(format!(
                        "aggregated variable `{bound}` must appear exactly once in `{}`",
                        over.relation
                    )));
                }
                let mut seen = Vec::new();
                for v in over.vars().filter(|v| v != bound) {
                    if seen.contains(&v) {
                        errs.push(E::InvalidAggregation(format!("group variable `{v}` is repeated in `{}`", over.relation)));
                    }
                    seen.push(v);
                }
                if over.vars().any(|v| v == target) {
                    errs.push(E::InvalidAggregation(format!("`{target}` cannot be both the result and an argument")));
                }
                let elsewhere = decl.head.vars().any(|v| v == bound)
                    || decl.body.iter().enumerate().any(|(j, other)| j != i && literal_vars(other).contains(&bound.as_str()));
                if elsewhere {
                    errs.push(E::InvalidAggregation(format!(
                        "aggregated variable `{bound}` is local to its aggregation and cannot be used elsewhere"
                    )));
                }
            }
            Literal::Condition { lhs, rhs, .. } | Literal::Function { lhs, rhs, .. } => {
                if matches!(lhs, Term::Wildcard) || matches!(rhs, Term::Wildcard) {
                    errs.push(E::InvalidWildcard);
                }
            }
        }
    }
    if tx_literals.len() > 1 {
        let names = tx_literals.iter().filter_map(|&i| match &decl.body[i] {
            Literal::Relational(a) => Some(a.relation.clone()),
            _ => None,
        });
        errs.push(E::MultipleTransactionTriggers(names.collect()));
    }
    let kind = match tx_literals.first() {
        Some(&literal) => RuleKind::Transaction { literal },
        None => {
            errs.extend(reserved_reads.into_iter().map(E::ReservedOutsideTransactionRule));
            if decl.head.relation == SEND {
                errs.push(E::ReservedOutsideTransactionRule(SEND.into()));
            }
            RuleKind::View
        }
    };
    if !errs.is_empty() {
        return Err(errs);
    }

    let var_types = infer_types(decl, lookup).map_err(|e| vec![e])?;
    let head = typed_atom(&decl.head, lookup, &var_types).map_err(|e| vec![e])?;
    let mut body = Vec::new();
    for lit in &decl.body {
        body.push(typed_literal(lit, lookup, &var_types).map_err(|e| vec![e])?);
    }
    assign_free_keys(&mut body);

    let refs: Vec<&BodyLit> = body.iter().collect();
    let (bound, unplaced) = ground::closure(&refs, Bound::new());
    if let Some(&i) = unplaced.first() {
        let var = lit_vars(&body[i]).into_iter().find(|v| !bound.contains(*v)).unwrap_or_default();
        return Err(vec![E::UngroundedVariable(var.to_string())]);
    }
    if let Some(v) = head.vars().find(|v| !bound.contains(*v)) {
        return Err(vec![E::UngroundedHeadVariable { variable: v.to_string(), rule: decl.id.clone() }]);
    }

    Ok(Rule { id: decl.id.clone(), index, kind, head, body, var_types, source: decl.clone() })
}

fn literal_vars(lit: &Literal) -> Vec<&str> {
    match lit {
        Literal::Relational(a) => a.vars().collect(),
        Literal::Condition { lhs, rhs, .. } => [lhs, rhs].into_iter().filter_map(Term::var).collect(),
        Literal::Function { target, lhs, rhs, .. } => {
            let mut v = vec![target.as_str()];
            v.extend([lhs, rhs].into_iter().filter_map(Term::var));
            v
        }
        Literal::Aggregation { target, over, .. } => {
            let mut v = vec![target.as_str()];
            v.extend(over.vars());
            v
        }
    }
}

fn lit_vars(lit: &BodyLit) -> Vec<&str> {
    match lit {
        BodyLit::Rel(a) => a.vars().collect(),
        BodyLit::Cond { lhs, rhs, .. } => [lhs, rhs].into_iter().filter_map(Operand::var).collect(),
        BodyLit::Func { target, lhs, rhs, .. } => {
            let mut v: Vec<&str> = [lhs, rhs].into_iter().filter_map(Operand::var).collect();
            v.push(target);
            v
        }
        BodyLit::Agg { target, group_keys, .. } => {
            let mut v: Vec<&str> = group_keys.iter().map(String::as_str).collect();
            v.push(target);
            v
        }
    }
}

/// A group key is free when the rest of the body cannot bind it.
fn assign_free_keys(body: &mut [BodyLit]) {
    for i in 0..body.len() {
        let BodyLit::Agg { group_keys, .. } = &body[i] else { continue };
        let others: Vec<&BodyLit> = body.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, l)| l).collect();
        let (bound, _) = ground::closure(&others, Bound::new());
        let free: Vec<String> = group_keys.iter().filter(|k| !bound.contains(*k)).cloned().collect();
        if let BodyLit::Agg { free_keys, .. } = &mut body[i] {
            *free_keys = free;
        }
    }
}

struct Types {
    map: BTreeMap<String, ColumnType>,
}

impl Types {
    fn get(&self, v: &str) -> Option<ColumnType> {
        self.map.get(v).copied()
    }

    fn set(&mut self, v: &str, ty: ColumnType) -> Result<bool, E> {
        match self.map.get(v) {
            Some(&t) if t == ty => Ok(false),
            Some(&t) => Err(E::TypeMismatch(format!("variable `{v}` is used both as {t} and as {ty}"))),
            None => {
                self.map.insert(v.to_string(), ty);
                Ok(true)
            }
        }
    }

    /// Unifies a group of variables that must share one type.
    fn unify(&mut self, vars: &[&str]) -> Result<bool, E> {
        let Some(ty) = vars.iter().find_map(|v| self.get(v)) else { return Ok(false) };
        let mut changed = false;
        for v in vars {
            changed |= self.set(v, ty)?;
        }
        Ok(changed)
    }
}

fn infer_types(decl: &RuleDecl, lookup: &Lookup) -> Result<BTreeMap<String, ColumnType>, E> {
    let mut types = Types { map: BTreeMap::new() };
    let atoms = std::iter::once(&decl.head).chain(decl.body.iter().filter_map(|l| match l {
        Literal::Relational(a) | Literal::Aggregation { over: a, .. } => Some(a),
        _ => None,
    }));
    for atom in atoms {
        let d = lookup[atom.relation.as_str()];
        for (arg, col) in atom.args.iter().zip(&d.schema) {
            if let Term::Var(v) = arg {
                types.set(v, col.ty)?;
            }
        }
    }

    let mut defaulted_counts = false;
    loop {
        let mut changed = false;
        for lit in &decl.body {
            match lit {
                Literal::Function { target, lhs, rhs, .. } => {
                    let mut group = vec![target.as_str()];
                    group.extend([lhs, rhs].into_iter().filter_map(Term::var));
                    changed |= types.unify(&group)?;
                }
                Literal::Condition { lhs, rhs, .. } => {
                    let group: Vec<&str> = [lhs, rhs].into_iter().filter_map(Term::var).collect();
                    changed |= types.unify(&group)?;
                }
                Literal::Aggregation { target, agg, bound, .. } if *agg != AggKind::Count => {
                    changed |= types.unify(&[target, bound])?;
                }
                _ => {}
            }
        }
        if !changed && !defaulted_counts {
            defaulted_counts = true;
            for lit in &decl.body {
                if let Literal::Aggregation { target, agg: AggKind::Count, .. } = lit {
                    if types.get(target).is_none() {
                        types.set(target, ColumnType::Uint)?;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    for lit in &decl.body {
        match lit {
            Literal::Function { target, .. } => {
                let ty = types.get(target).unwrap_or(ColumnType::Int);
                if !ty.is_numeric() {
                    return Err(E::TypeMismatch(format!("arithmetic on {ty} value `{target}`")));
                }
            }
            Literal::Condition { lhs, op, rhs } if !matches!(op, CmpOp::Eq | CmpOp::Ne) => {
                for v in [lhs, rhs].into_iter().filter_map(Term::var) {
                    match types.get(v) {
                        Some(ty) if !ty.is_numeric() => {
                            return Err(E::TypeMismatch(format!("`{}` compares {ty} value `{v}`", op.symbol())))
                        }
                        _ => {}
                    }
                }
            }
            Literal::Aggregation { target, agg, bound, .. } => {
                let bty = types.get(bound).unwrap_or(ColumnType::Int);
                if *agg != AggKind::Count && !bty.is_numeric() {
                    return Err(E::TypeMismatch(format!("`{}` over {bty} value `{bound}`", agg.name())));
                }
                let tty = types.get(target).unwrap_or(ColumnType::Uint);
                if !tty.is_numeric() {
                    return Err(E::TypeMismatch(format!("`count` result `{target}` is {tty}")));
                }
            }
            _ => {}
        }
    }
    Ok(types.map)
}

/// Types an integer literal. `Address` accepts non-negative integers that fit
/// in 160 bits, so `0` is the zero address.
pub fn constant_value(c: &Constant, ty: ColumnType) -> Result<Value, E> {
    let mismatch = |what: &str| E::TypeMismatch(format!("{what} literal used where {ty} is expected"));
    match (*c, ty) {
        (Constant::Bool(b), ColumnType::Bool) => Ok(Value::Bool(b)),
        (Constant::Address(a), ColumnType::Address) => Ok(Value::Address(a)),
        (Constant::Bool(_), _) => Err(mismatch("boolean")),
        (Constant::Address(_), _) => Err(mismatch("address")),
        (Constant::Number { .. }, ColumnType::Bool) => Err(mismatch("integer")),
        (Constant::Number { negative, magnitude }, ColumnType::Int) => {
            let limit = U256::ONE << 255;
            let out_of_range = || E::TypeMismatch(format!("{}{magnitude} is out of int range", if negative { "-" } else { "" }));
            if negative {
                if magnitude > limit {
                    return Err(out_of_range());
                }
                Ok(Value::Int(I256::ZERO.wrapping_sub(magnitude.as_i256())))
            } else if magnitude >= limit {
                Err(out_of_range())
            } else {
                Ok(Value::Int(magnitude.as_i256()))
            }
        }
        (Constant::Number { negative, magnitude }, ColumnType::Uint) => {
            if negative {
                Err(E::TypeMismatch(format!("-{magnitude} is negative where uint is expected")))
            } else {
                Ok(Value::Uint(magnitude))
            }
        }
        (Constant::Number { negative, magnitude }, ColumnType::Address) => match Address::from_u256(magnitude) {
            Some(a) if !negative => Ok(Value::Address(a)),
            _ => Err(E::TypeMismatch(format!("{magnitude} is not a valid address"))),
        },
    }
}

fn typed_atom(atom: &Atom, lookup: &Lookup, types: &BTreeMap<String, ColumnType>) -> Result<TypedAtom, E> {
    let d = lookup[atom.relation.as_str()];
    let mut args = Vec::new();
    for (arg, col) in atom.args.iter().zip(&d.schema) {
        args.push(match arg {
            Term::Var(v) => {
                debug_assert_eq!(types.get(v), Some(&col.ty));
                Arg::Var(v.clone())
            }
            Term::Wildcard => Arg::Wildcard,
            Term::Const(c) => Arg::Const(constant_value(c, col.ty)?),
        });
    }
    Ok(TypedAtom { relation: atom.relation.clone(), args })
}

fn operand(t: &Term, ty: ColumnType) -> Result<Operand, E> {
    match t {
        Term::Var(v) => Ok(Operand::Var(v.clone())),
        Term::Const(c) => Ok(Operand::Const(constant_value(c, ty)?)),
        Term::Wildcard => Err(E::InvalidWildcard),
    }
}

/// Type shared by a group of terms; defaults to int for literal-only groups.
fn group_type(vars: &[&Term], types: &BTreeMap<String, ColumnType>) -> ColumnType {
    vars.iter().filter_map(|t| t.var()).find_map(|v| types.get(v).copied()).unwrap_or(ColumnType::Int)
}

fn typed_literal(lit: &Literal, lookup: &Lookup, types: &BTreeMap<String, ColumnType>) -> Result<BodyLit, E> {
    Ok(match lit {
        Literal::Relational(a) => BodyLit::Rel(typed_atom(a, lookup, types)?),
        Literal::Condition { lhs, op, rhs } => {
            let ty = group_type(&[lhs, rhs], types);
            BodyLit::Cond { lhs: operand(lhs, ty)?, op: *op, rhs: operand(rhs, ty)? }
        }
        Literal::Function { target, op, lhs, rhs, .. } => {
            let ty = types.get(target).copied().unwrap_or_else(|| group_type(&[lhs, rhs], types));
            BodyLit::Func { target: target.clone(), op: *op, lhs: operand(lhs, ty)?, rhs: operand(rhs, ty)? }
        }
        Literal::Aggregation { target, agg, bound, over } => {
            let over = typed_atom(over, lookup, types)?;
            let mut group_keys: Vec<String> = Vec::new();
            for v in over.vars() {
                if v != bound && !group_keys.iter().any(|k| k == v) {
                    group_keys.push(v.to_string());
                }
            }
            BodyLit::Agg { target: target.clone(), agg: *agg, bound: bound.clone(), over, group_keys, free_keys: vec![] }
        }
    })
}
