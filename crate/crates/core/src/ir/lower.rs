use std::collections::{BTreeMap, BTreeSet};

use super::order::order_body;
use super::*;
use crate::analysis::ground::Bound;
use crate::analysis::{Arg, BodyLit, Rule, RuleKind};
use crate::frontend::RelationKind;

/// The update triggers of a rule: the transaction relation for a
/// transaction rule, otherwise inserts and deletes on every body relation
/// (reserved ones excluded).
pub fn triggers(model: &ContractModel, rule: &Rule) -> BTreeSet<Trigger> {
    let mut out = BTreeSet::new();
    for (_, relation, _) in trigger_occurrences(model, rule) {
        out.insert(Trigger { kind: TriggerKind::Insert, relation: relation.clone() });
        if !rule.is_transaction() {
            out.insert(Trigger { kind: TriggerKind::Delete, relation });
        }
    }
    out
}

/// Body literals that react to changes: `(literal, relation, via_aggregate)`.
pub fn trigger_occurrences(model: &ContractModel, rule: &Rule) -> Vec<(usize, String, bool)> {
    match rule.kind {
        RuleKind::Transaction { literal } => {
            vec![(literal, rule.body[literal].relation().unwrap_or_default().to_string(), false)]
        }
        RuleKind::View => rule
            .body
            .iter()
            .enumerate()
            .filter_map(|(i, lit)| {
                let rel = lit.relation()?;
                let reserved = model.relation(rel).is_some_and(|d| d.kind == RelationKind::Reserved);
                (!reserved).then(|| (i, rel.to_string(), matches!(lit, BodyLit::Agg { .. })))
            })
            .collect(),
    }
}

fn seed_for(atom: &TypedAtom, skip: Option<&str>) -> Seed {
    let mut seen = BTreeSet::new();
    let args = atom
        .args
        .iter()
        .map(|a| match a {
            Arg::Var(v) if Some(v.as_str()) == skip => SeedArg::Ignore,
            Arg::Var(v) if seen.contains(v) => SeedArg::Equal(v.clone()),
            Arg::Var(v) => {
                seen.insert(v.clone());
                SeedArg::Bind(v.clone())
            }
            Arg::Const(c) => SeedArg::Const(c.clone()),
            Arg::Wildcard => SeedArg::Ignore,
        })
        .collect();
    Seed { relation: atom.relation.clone(), args }
}

fn cache_spec(lit: &BodyLit) -> Option<AggCacheSpec> {
    let BodyLit::Agg { agg, bound, over, .. } = lit else { return None };
    let mut group_cols = Vec::new();
    let mut value_col = None;
    for (i, a) in over.args.iter().enumerate() {
        match a {
            Arg::Var(v) if v == bound => value_col = Some(i),
            Arg::Var(_) | Arg::Const(_) => group_cols.push(i),
            Arg::Wildcard => {}
        }
    }
    let kind = AggCacheKind::of(*agg);
    if kind == AggCacheKind::Count {
        value_col = None;
    }
    Some(AggCacheSpec { relation: over.relation.clone(), group_cols, value_col, kind })
}

fn upper_first(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

pub fn sanitize_id(id: &str) -> String {
    id.replace('\'', "_prime")
}

struct Lowering<'a> {
    caches: &'a [AggCacheSpec],
}

impl Lowering<'_> {
    fn internal(rule: &Rule, var: &str) -> IrError {
        IrError::Internal { rule: rule.id.clone(), var: var.to_string() }
    }

    fn operand_ok(op: &Operand, bound: &Bound) -> bool {
        op.var().map_or(true, |v| bound.contains(v))
    }

    /// Builds the statement nest for `order`, innermost `terminal`.
    fn chain(&self, rule: &Rule, order: &[usize], seed: &Bound, terminal: Stmt) -> Result<Stmt, IrError> {
        let mut bound = seed.clone();
        let mut frames: Vec<Box<dyn FnOnce(Stmt) -> Stmt>> = Vec::new();
        for &i in order {
            let lit = &rule.body[i];
            match lit {
                BodyLit::Rel(atom) => {
                    let mut constraints = Vec::new();
                    let mut binds: Vec<(usize, String)> = Vec::new();
                    let mut same = Vec::new();
                    for (col, a) in atom.args.iter().enumerate() {
                        match a {
                            Arg::Const(c) => constraints.push((col, Operand::Const(c.clone()))),
                            Arg::Var(v) if bound.contains(v) => constraints.push((col, Operand::Var(v.clone()))),
                            Arg::Var(v) => match binds.iter().find(|(_, b)| b == v) {
                                Some((first, _)) => same.push((*first, col)),
                                None => binds.push((col, v.clone())),
                            },
                            Arg::Wildcard => {}
                        }
                    }
                    bound.extend(binds.iter().map(|(_, v)| v.clone()));
                    let relation = atom.relation.clone();
                    let first_only = binds.is_empty();
                    frames.push(Box::new(move |body| Stmt::Search {
                        literal: i,
                        relation,
                        constraints,
                        binds,
                        same,
                        first_only,
                        body: Box::new(body),
                    }));
                }
                BodyLit::Cond { lhs, op, rhs } => {
                    let (l, r) = (Self::operand_ok(lhs, &bound), Self::operand_ok(rhs, &bound));
                    let (lhs, op, rhs) = (lhs.clone(), *op, rhs.clone());
                    if l && r {
                        frames.push(Box::new(move |body| Stmt::If { literal: i, lhs, op, rhs, body: Box::new(body) }));
                    } else if op == CmpOp::Eq && (l || r) {
                        let (var, value) = if l { (rhs, lhs) } else { (lhs, rhs) };
                        let Operand::Var(var) = var else { unreachable!("unbound side is a variable") };
                        bound.insert(var.clone());
                        frames.push(Box::new(move |body| Stmt::Bind { literal: i, var, value, body: Box::new(body) }));
                    } else {
                        let v = [&lhs, &rhs].into_iter().filter_map(Operand::var).find(|v| !bound.contains(*v));
                        return Err(Self::internal(rule, v.unwrap_or_default()));
                    }
                }
                BodyLit::Func { target, op, lhs, rhs } => {
                    for o in [lhs, rhs] {
                        if !Self::operand_ok(o, &bound) {
                            return Err(Self::internal(rule, o.var().unwrap_or_default()));
                        }
                    }
                    let mode = if bound.contains(target) { AssignMode::Check } else { AssignMode::Bind };
                    bound.insert(target.clone());
                    let (var, op, lhs, rhs) = (target.clone(), *op, lhs.clone(), rhs.clone());
                    frames.push(Box::new(move |body| Stmt::Assign { literal: i, var, op, lhs, rhs, mode, body: Box::new(body) }));
                }
                BodyLit::Agg { target, agg, bound: agg_var, over, free_keys, .. } => {
                    let spec = cache_spec(lit).expect("aggregation literal");
                    let cache = self.caches.iter().position(|c| *c == spec).expect("cache registered");
                    let mut constraints = Vec::new();
                    let mut group_binds = Vec::new();
                    for (col, a) in over.args.iter().enumerate() {
                        match a {
                            Arg::Const(c) => constraints.push((col, Operand::Const(c.clone()))),
                            Arg::Var(v) if v == agg_var => {}
                            Arg::Var(v) if bound.contains(v) => constraints.push((col, Operand::Var(v.clone()))),
                            Arg::Var(v) if free_keys.contains(v) => group_binds.push((col, v.clone())),
                            Arg::Var(v) => return Err(Self::internal(rule, v)),
                            Arg::Wildcard => {}
                        }
                    }
                    bound.extend(group_binds.iter().map(|(_, v): &(usize, String)| v.clone()));
                    let mode = if bound.contains(target) { AssignMode::Check } else { AssignMode::Bind };
                    bound.insert(target.clone());
                    let empty_is_zero = free_keys.is_empty() && matches!(agg, AggKind::Sum | AggKind::Count);
                    let (var, agg, relation) = (target.clone(), *agg, over.relation.clone());
                    frames.push(Box::new(move |body| Stmt::AggAssign {
                        literal: i,
                        var,
                        agg,
                        cache,
                        relation,
                        constraints,
                        group_binds,
                        empty_is_zero,
                        mode,
                        body: Box::new(body),
                    }));
                }
            }
        }
        if let Stmt::Insert(h) | Stmt::Delete(h) = &terminal {
            if let Some(v) = h.vars().find(|v| !bound.contains(*v)) {
                return Err(Self::internal(rule, v));
            }
        }
        Ok(frames.into_iter().rev().fold(terminal, |body, frame| frame(body)))
    }
}

fn collect_join_indexes(model: &ContractModel, stmt: &Stmt, out: &mut BTreeSet<JoinIndexSpec>) {
    for s in stmt.chain() {
        let (relation, constraints) = match s {
            Stmt::Search { relation, constraints, .. } | Stmt::AggAssign { relation, constraints, .. } => {
                (relation, constraints)
            }
            _ => continue,
        };
        let Some(decl) = model.relation(relation) else { continue };
        if decl.kind == RelationKind::Reserved {
            continue;
        }
        let constrained: Vec<usize> =
            decl.primary_keys.iter().copied().filter(|k| constraints.iter().any(|(c, _)| c == k)).collect();
        if !constrained.is_empty() && constrained.len() < decl.primary_keys.len() {
            out.insert(JoinIndexSpec { relation: relation.clone(), constrained });
        }
    }
}

pub fn compile(model: &ContractModel) -> Result<CompiledContract, IrError> {
    let mut agg_caches: Vec<AggCacheSpec> = Vec::new();
    for rule in &model.rules {
        for spec in rule.body.iter().filter_map(cache_spec) {
            if !agg_caches.contains(&spec) {
                agg_caches.push(spec);
            }
        }
    }
    let lowering = Lowering { caches: &agg_caches };

    let mut functions = Vec::new();
    let mut rederive = BTreeMap::new();
    let mut full = BTreeMap::new();
    for rule in &model.rules {
        let occurrences = trigger_occurrences(model, rule);
        for (literal, relation, via_aggregate) in &occurrences {
            let shared = occurrences.iter().filter(|(_, r, _)| r == relation).count() > 1;
            let seed = match &rule.body[*literal] {
                BodyLit::Rel(atom) => seed_for(atom, None),
                BodyLit::Agg { over, bound, .. } => seed_for(over, Some(bound)),
                _ => unreachable!("occurrences are relational"),
            };
            let seeded: Bound = seed.bound_vars().map(str::to_string).collect();
            let pinned = (!via_aggregate).then_some(*literal);
            let order = order_body(model, rule, pinned, &seeded);
            let kinds: &[TriggerKind] =
                if rule.is_transaction() { &[TriggerKind::Insert] } else { &[TriggerKind::Insert, TriggerKind::Delete] };
            for &kind in kinds {
                let terminal = match kind {
                    TriggerKind::Insert => Stmt::Insert(rule.head.clone()),
                    TriggerKind::Delete => Stmt::Delete(rule.head.clone()),
                };
                let body = lowering.chain(rule, &order, &seeded, terminal)?;
                let suffix = if shared { format!("_{literal}") } else { String::new() };
                let name = format!(
                    "update{}On{}{}_{}{suffix}",
                    upper_first(&rule.head.relation),
                    upper_first(relation),
                    kind.name(),
                    sanitize_id(&rule.id)
                );
                functions.push(UpdateFunction {
                    name,
                    rule: rule.id.clone(),
                    trigger: Trigger { kind, relation: relation.clone() },
                    occurrence: *literal,
                    via_aggregate: *via_aggregate,
                    params: seed.bound_vars().map(str::to_string).collect(),
                    seed: seed.clone(),
                    body,
                });
            }
        }
        if !rule.is_transaction() {
            let seed = seed_for(&rule.head, None);
            let seeded: Bound = seed.bound_vars().map(str::to_string).collect();
            let order = order_body(model, rule, None, &seeded);
            let body = lowering.chain(rule, &order, &seeded, Stmt::Insert(rule.head.clone()))?;
            rederive.insert(rule.id.clone(), RederivePlan { rule: rule.id.clone(), seed, body });
            let order = order_body(model, rule, None, &Bound::new());
            full.insert(rule.id.clone(), lowering.chain(rule, &order, &Bound::new(), Stmt::Insert(rule.head.clone()))?);
        }
    }

    let rank = |f: &UpdateFunction| {
        let rule = model.rule(&f.rule).expect("rule exists");
        (model.topo_rank(&rule.head.relation), rule.index, f.occurrence)
    };
    let mut by_trigger: BTreeMap<(String, TriggerKind), Vec<usize>> = BTreeMap::new();
    for (i, f) in functions.iter().enumerate() {
        by_trigger.entry((f.trigger.relation.clone(), f.trigger.kind)).or_default().push(i);
    }
    for list in by_trigger.values_mut() {
        list.sort_by_key(|&i| rank(&functions[i]));
    }

    let mut join_indexes = BTreeSet::new();
    for stmt in functions.iter().map(|f| &f.body).chain(rederive.values().map(|p| &p.body)).chain(full.values()) {
        collect_join_indexes(model, stmt, &mut join_indexes);
    }

    Ok(CompiledContract {
        model: model.clone(),
        functions,
        by_trigger,
        rederive,
        full,
        agg_caches,
        join_indexes,
        interface: Vec::new(),
        record_provenance: false,
    })
}
