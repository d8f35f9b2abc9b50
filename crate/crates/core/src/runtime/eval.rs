//! Interpreter for lowered statement nests. Evaluation only reads the
//! store; derived head tuples are handed to a callback.

use ethnum::{I256, U256};

use super::store::{AggState, Fact, Store, Tuple};
use crate::analysis::{Arg, Operand, Rule, TypedAtom, MSG_SENDER, MSG_VALUE, NOW};
use crate::frontend::AggKind;
use crate::ir::{AssignMode, Seed, SeedArg, Stmt};
use crate::value::{arith, Address, ArithFault, ColumnType, Value};

/// Per-transaction bindings of the read-only reserved relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reserved {
    pub sender: Address,
    pub value: U256,
    pub timestamp: U256,
}

impl Reserved {
    fn row(&self, relation: &str) -> Option<Tuple> {
        match relation {
            MSG_SENDER => Some(vec![Value::Address(self.sender)]),
            MSG_VALUE => Some(vec![Value::Uint(self.value)]),
            NOW => Some(vec![Value::Uint(self.timestamp)]),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Flow {
    Continue,
    Stop,
}

/// Variable bindings as a stack; inner statements shadow nothing, so
/// truncation restores the outer scope.
#[derive(Debug, Default, Clone)]
pub(crate) struct Env {
    vars: Vec<(String, Value)>,
}

impl Env {
    pub fn get(&self, var: &str) -> Option<Value> {
        self.vars.iter().rev().find(|(v, _)| v == var).map(|(_, x)| *x)
    }

    fn push(&mut self, var: &str, value: Value) {
        self.vars.push((var.to_string(), value));
    }

    fn mark(&self) -> usize {
        self.vars.len()
    }

    fn reset(&mut self, mark: usize) {
        self.vars.truncate(mark);
    }

    /// Matches `tuple` against a seed pattern.
    pub fn seeded(seed: &Seed, tuple: &[Value]) -> Option<Env> {
        let mut env = Env::default();
        for (a, v) in seed.args.iter().zip(tuple) {
            match a {
                SeedArg::Bind(var) => env.push(var, *v),
                SeedArg::Equal(var) => {
                    if env.get(var) != Some(*v) {
                        return None;
                    }
                }
                SeedArg::Const(c) => {
                    if c != v {
                        return None;
                    }
                }
                SeedArg::Ignore => {}
            }
        }
        Some(env)
    }
}

pub(crate) type Emit<'e> = dyn FnMut(Tuple, &[Fact]) -> Flow + 'e;

pub(crate) struct Evaluator<'a> {
    pub store: &'a Store,
    pub reserved: Option<&'a Reserved>,
    /// Collect the rows each derivation read.
    pub capture: bool,
    pub visits: u64,
    /// Every row visited, matching or not.
    pub trace: Option<Vec<Fact>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(store: &'a Store, reserved: Option<&'a Reserved>, capture: bool) -> Self {
        Evaluator { store, reserved, capture, visits: 0, trace: None }
    }

    fn operand(env: &Env, op: &Operand) -> Value {
        match op {
            Operand::Const(c) => *c,
            Operand::Var(v) => env.get(v).unwrap_or_else(|| panic!("unbound variable {v}")),
        }
    }

    fn head_tuple(env: &Env, head: &TypedAtom) -> Tuple {
        head.args
            .iter()
            .map(|a| match a {
                Arg::Const(c) => *c,
                Arg::Var(v) => env.get(v).unwrap_or_else(|| panic!("unbound head variable {v}")),
                Arg::Wildcard => unreachable!("wildcards are rejected in heads"),
            })
            .collect()
    }

    pub fn run(
        &mut self,
        rule: &Rule,
        stmt: &Stmt,
        env: &mut Env,
        reads: &mut Vec<Fact>,
        emit: &mut Emit<'_>,
    ) -> Result<Flow, ArithFault> {
        match stmt {
            Stmt::Insert(head) | Stmt::Delete(head) => Ok(emit(Self::head_tuple(env, head), reads)),
            Stmt::If { lhs, op, rhs, body, .. } => {
                if op.eval(&Self::operand(env, lhs), &Self::operand(env, rhs)) {
                    self.run(rule, body, env, reads, emit)
                } else {
                    Ok(Flow::Continue)
                }
            }
            Stmt::Bind { var, value, body, .. } => {
                let mark = env.mark();
                env.push(var, Self::operand(env, value));
                let flow = self.run(rule, body, env, reads, emit);
                env.reset(mark);
                flow
            }
            Stmt::Assign { var, op, lhs, rhs, mode, body, .. } => {
                let v = arith(*op, Self::operand(env, lhs), Self::operand(env, rhs))?;
                self.with_value(rule, var, v, mode, body, env, reads, emit)
            }
            Stmt::Search { relation, constraints, binds, same, first_only, body, .. } => {
                let fixed: Vec<(usize, Value)> =
                    constraints.iter().map(|(c, o)| (*c, Self::operand(env, o))).collect();
                let rows = self.candidate_rows(relation, &fixed);
                for tuple in rows {
                    self.visits += 1;
                    if let Some(trace) = &mut self.trace {
                        trace.push(Fact::new(relation.clone(), tuple.clone()));
                    }
                    if fixed.iter().any(|(c, v)| tuple[*c] != *v) || same.iter().any(|(a, b)| tuple[*a] != tuple[*b]) {
                        continue;
                    }
                    let mark = env.mark();
                    for (c, var) in binds {
                        env.push(var, tuple[*c]);
                    }
                    if self.capture {
                        reads.push(Fact::new(relation.clone(), tuple.clone()));
                    }
                    let flow = self.run(rule, body, env, reads, emit);
                    if self.capture {
                        reads.pop();
                    }
                    env.reset(mark);
                    if flow? == Flow::Stop {
                        return Ok(Flow::Stop);
                    }
                    if *first_only {
                        break;
                    }
                }
                Ok(Flow::Continue)
            }
            Stmt::AggAssign { var, agg, cache, relation, constraints, group_binds, empty_is_zero, mode, body, .. } => {
                let spec = &self.store.caches[*cache].spec;
                let fixed: Vec<(usize, Value)> =
                    constraints.iter().map(|(c, o)| (*c, Self::operand(env, o))).collect();
                let target_ty = rule.var_types.get(var).copied().unwrap_or(ColumnType::Uint);
                let col_of = |c: usize| spec.group_cols.iter().position(|g| *g == c).expect("group column");
                let groups: Vec<(Tuple, Option<Value>)> = if group_binds.is_empty() {
                    let mut key = vec![Value::Bool(false); spec.group_cols.len()];
                    for (c, v) in &fixed {
                        key[col_of(*c)] = *v;
                    }
                    let state = self.store.caches[*cache].groups.get(&key);
                    self.visits += 1;
                    let value = match state {
                        Some(s) => aggregate_value(*agg, s, target_ty),
                        None if *empty_is_zero => Some(target_ty.zero()),
                        None => None,
                    };
                    vec![(key, value)]
                } else {
                    let mut out = Vec::new();
                    for (key, state) in &self.store.caches[*cache].groups {
                        self.visits += 1;
                        if fixed.iter().all(|(c, v)| key[col_of(*c)] == *v) {
                            out.push((key.clone(), aggregate_value(*agg, state, target_ty)));
                        }
                    }
                    out
                };
                for (key, value) in groups {
                    let Some(value) = value else { continue };
                    let mark = env.mark();
                    for (c, v) in group_binds {
                        env.push(v, key[col_of(*c)]);
                    }
                    let pushed = if self.capture { self.push_group_rows(relation, spec.group_cols.clone(), &key, reads) } else { 0 };
                    let flow = self.with_value(rule, var, value, mode, body, env, reads, emit);
                    reads.truncate(reads.len() - pushed);
                    env.reset(mark);
                    if flow? == Flow::Stop {
                        return Ok(Flow::Stop);
                    }
                }
                Ok(Flow::Continue)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn with_value(
        &mut self,
        rule: &Rule,
        var: &str,
        value: Value,
        mode: &AssignMode,
        body: &Stmt,
        env: &mut Env,
        reads: &mut Vec<Fact>,
        emit: &mut Emit<'_>,
    ) -> Result<Flow, ArithFault> {
        match mode {
            AssignMode::Check => {
                if env.get(var) == Some(value) {
                    self.run(rule, body, env, reads, emit)
                } else {
                    Ok(Flow::Continue)
                }
            }
            AssignMode::Bind => {
                let mark = env.mark();
                env.push(var, value);
                let flow = self.run(rule, body, env, reads, emit);
                env.reset(mark);
                flow
            }
        }
    }

    /// Rows that may match `fixed`: a point lookup when every key column is
    /// fixed, a join index when one covers the fixed key columns, else a scan.
    fn candidate_rows(&self, relation: &str, fixed: &[(usize, Value)]) -> Vec<Tuple> {
        if let Some(r) = self.reserved.and_then(|r| r.row(relation)) {
            return vec![r];
        }
        let Some(table) = self.store.table(relation) else { return Vec::new() };
        let lookup = |c: usize| fixed.iter().find(|(k, _)| *k == c).map(|(_, v)| *v);
        let key: Option<Tuple> = table.keys.iter().map(|&k| lookup(k)).collect();
        if let Some(key) = key {
            return table.rows.get(&key).map(|r| r.values.clone()).into_iter().collect();
        }
        let constrained: Vec<usize> = table.keys.iter().copied().filter(|&k| lookup(k).is_some()).collect();
        if !constrained.is_empty() {
            if let Some(idx) = self.store.index(relation, &constrained) {
                let part: Tuple = constrained.iter().map(|&k| lookup(k).expect("constrained")).collect();
                return idx
                    .entries
                    .get(&part)
                    .into_iter()
                    .flatten()
                    .filter_map(|k| table.rows.get(k).map(|r| r.values.clone()))
                    .collect();
            }
        }
        table.tuples().cloned().collect()
    }

    fn push_group_rows(&self, relation: &str, group_cols: Vec<usize>, key: &[Value], reads: &mut Vec<Fact>) -> usize {
        let Some(table) = self.store.table(relation) else { return 0 };
        let before = reads.len();
        for t in table.tuples() {
            if group_cols.iter().zip(key).all(|(c, v)| t[*c] == *v) {
                reads.push(Fact::new(relation, t.clone()));
            }
        }
        reads.len() - before
    }
}

/// The aggregate of a nonempty group, converted to the target type.
fn aggregate_value(agg: AggKind, state: &AggState, target: ColumnType) -> Option<Value> {
    match (agg, state) {
        (AggKind::Sum, AggState::Sum { total, .. }) => Some(*total),
        (AggKind::Count, AggState::Count(n)) => Some(match target {
            ColumnType::Int => Value::Int(I256::from(*n as u128)),
            _ => Value::Uint(U256::from(*n as u128)),
        }),
        (AggKind::Max, AggState::Ordered(m)) => m.keys().next_back().copied(),
        (AggKind::Min, AggState::Ordered(m)) => m.keys().next().copied(),
        _ => None,
    }
}
