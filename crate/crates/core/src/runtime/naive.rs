//! Reference evaluator. Recomputes every view from the committed event
//! tuples by plain nested-loop evaluation of the typed rules, sharing
//! nothing with the lowered update functions.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use ethnum::{I256, U256};

use super::eval::Reserved;
use super::exec::CommittedTx;
use super::store::{Fact, Tuple};
use crate::analysis::ground::{placeable, Bound};
use crate::analysis::{Arg, BodyLit, ContractModel, Operand, Rule, RuleKind, MSG_SENDER, MSG_VALUE, NOW, SEND};
use crate::frontend::{AggKind, RelationKind};
use crate::value::{arith, ArithFault, ArithOp, ColumnType, Value};

/// Rows per relation, keyed by primary key.
pub type Database = BTreeMap<String, BTreeMap<Tuple, Tuple>>;

type Env = BTreeMap<String, Value>;

/// Event tuples accumulated by replaying transactions one at a time.
#[derive(Debug, Clone)]
pub struct NaiveOracle<'m> {
    model: &'m ContractModel,
    events: Database,
    /// Evaluation of `events`, dropped whenever they change.
    cached: Option<Database>,
    /// History entries of the executor already committed here.
    applied: usize,
}

impl<'m> NaiveOracle<'m> {
    pub fn new(model: &'m ContractModel) -> Self {
        NaiveOracle { model, events: Database::new(), cached: None, applied: 0 }
    }

    fn key_of(&self, relation: &str, tuple: &[Value]) -> Tuple {
        match self.model.relation(relation) {
            Some(d) if d.kind == RelationKind::Singleton => Vec::new(),
            Some(d) => d.primary_keys.iter().map(|&k| tuple[k]).collect(),
            None => tuple.to_vec(),
        }
    }

    fn put(&self, db: &mut Database, relation: &str, tuple: Tuple) {
        let key = self.key_of(relation, &tuple);
        db.entry(relation.to_string()).or_default().insert(key, tuple);
    }

    /// Every view recomputed from the events.
    pub fn database(&mut self) -> Result<&Database, ArithFault> {
        if self.cached.is_none() {
            let mut db = self.events.clone();
            for rel in &self.model.topo_order {
                for rule in self.model.rules_deriving(rel).filter(|r| r.kind == RuleKind::View) {
                    let mut out = Vec::new();
                    Solver::new(rule, &db, None).solve(&mut |env| out.push(head(rule, env)))?;
                    for t in out {
                        self.put(&mut db, rel, t);
                    }
                }
            }
            self.cached = Some(db);
        }
        Ok(self.cached.as_ref().expect("just computed"))
    }

    /// Materialized relations as sets, comparable with the store snapshot.
    pub fn materialized(&mut self) -> Result<BTreeMap<String, BTreeSet<Tuple>>, ArithFault> {
        let model = self.model;
        let db = self.database()?;
        Ok(model
            .materialized
            .iter()
            .map(|r| (r.clone(), db.get(r).map(|m| m.values().cloned().collect()).unwrap_or_default()))
            .collect())
    }

    /// Heads the transaction rules derive for `tx` on the current database.
    pub fn fire(&mut self, tx: &CommittedTx) -> Result<Vec<Fact>, ArithFault> {
        let model = self.model;
        let mut db = self.database()?.clone();
        db.insert(tx.relation.clone(), [(tx.args.clone(), tx.args.clone())].into());
        reserved_rows(&mut db, &tx.reserved);
        let mut out = Vec::new();
        for rule in model.rules.iter().filter(|r| r.transaction_relation() == Some(tx.relation.as_str())) {
            Solver::new(rule, &db, Some(&tx.reserved))
                .solve(&mut |env| out.push(Fact::new(rule.head.relation.clone(), head(rule, env))))?;
        }
        Ok(out)
    }

    /// Fires `tx` and keeps its event tuples. Returns the derived heads.
    pub fn commit(&mut self, tx: &CommittedTx) -> Result<Vec<Fact>, ArithFault> {
        let heads = self.fire(tx)?;
        let mut events = std::mem::take(&mut self.events);
        for f in heads.iter().filter(|f| f.relation != SEND) {
            self.put(&mut events, &f.relation, f.values.clone());
        }
        self.events = events;
        self.cached = None;
        Ok(heads)
    }

    /// Commits the part of the executor's history not seen yet, then
    /// compares the stored relations. Returns the first difference.
    pub fn check(&mut self, ex: &super::Executor) -> Result<Option<String>, ArithFault> {
        let history = ex.history();
        for tx in &history[self.applied.min(history.len())..] {
            self.commit(tx)?;
        }
        self.applied = history.len();
        let expected = self.materialized()?;
        Ok(first_difference(&expected, &ex.state().store.snapshot()))
    }
}

/// Replays `history` and returns the materialized relations.
pub fn naive_evaluate(model: &ContractModel, history: &[CommittedTx]) -> Result<BTreeMap<String, BTreeSet<Tuple>>, ArithFault> {
    let mut o = NaiveOracle::new(model);
    for tx in history {
        o.commit(tx)?;
    }
    o.materialized()
}

fn reserved_rows(db: &mut Database, r: &Reserved) {
    for (rel, v) in [(MSG_SENDER, Value::Address(r.sender)), (MSG_VALUE, Value::Uint(r.value)), (NOW, Value::Uint(r.timestamp))] {
        db.insert(rel.to_string(), [(vec![v], vec![v])].into());
    }
}

fn head(rule: &Rule, env: &Env) -> Tuple {
    rule.head
        .args
        .iter()
        .map(|a| match a {
            Arg::Var(v) => env[v],
            Arg::Const(c) => *c,
            Arg::Wildcard => unreachable!("no wildcards in heads"),
        })
        .collect()
}

fn operand(env: &Env, o: &Operand) -> Value {
    match o {
        Operand::Var(v) => env[v],
        Operand::Const(c) => *c,
    }
}

/// Extends `env` by matching `args` against `tuple`; None on mismatch.
fn unify(args: &[Arg], tuple: &[Value], env: &Env) -> Option<Env> {
    let mut env = env.clone();
    for (a, v) in args.iter().zip(tuple) {
        match a {
            Arg::Wildcard => {}
            Arg::Const(c) if c != v => return None,
            Arg::Const(_) => {}
            Arg::Var(x) => match env.get(x) {
                Some(b) if b != v => return None,
                Some(_) => {}
                None => {
                    env.insert(x.clone(), *v);
                }
            },
        }
    }
    Some(env)
}

type Index<'a> = HashMap<Vec<Value>, Vec<&'a Tuple>>;

/// Enumerates all satisfying assignments of a rule body, always taking the
/// first literal (in source order) that can be evaluated. Lookups and
/// aggregate groups are memoized for the duration of one rule.
struct Solver<'a> {
    rule: &'a Rule,
    db: &'a Database,
    indexes: HashMap<(usize, Vec<usize>), Index<'a>>,
    aggregates: HashMap<(usize, Vec<Value>), Vec<(Vec<Value>, Value)>>,
}

impl<'a> Solver<'a> {
    fn new(rule: &'a Rule, db: &'a Database, _reserved: Option<&Reserved>) -> Self {
        Solver { rule, db, indexes: HashMap::new(), aggregates: HashMap::new() }
    }

    fn solve(&mut self, emit: &mut dyn FnMut(&Env)) -> Result<(), ArithFault> {
        let done = vec![false; self.rule.body.len()];
        self.step(&done, &Env::new(), emit)
    }

    fn rows(&self, relation: &str) -> impl Iterator<Item = &'a Tuple> {
        self.db.get(relation).into_iter().flat_map(|m| m.values())
    }

    /// Positions of `args` fixed by `env`, with their values.
    fn fixed(args: &[Arg], env: &Env) -> (Vec<usize>, Vec<Value>) {
        args.iter()
            .enumerate()
            .filter_map(|(i, a)| match a {
                Arg::Const(c) => Some((i, *c)),
                Arg::Var(v) => env.get(v).map(|x| (i, *x)),
                Arg::Wildcard => None,
            })
            .unzip()
    }

    /// Rows of literal `lit` whose `positions` hold `values`.
    fn lookup(&mut self, lit: usize, relation: &str, positions: Vec<usize>, values: &[Value]) -> Vec<&'a Tuple> {
        if positions.is_empty() {
            return self.rows(relation).collect();
        }
        let rows: Vec<&'a Tuple> = self.rows(relation).collect();
        let index = self.indexes.entry((lit, positions.clone())).or_insert_with(|| {
            let mut ix = Index::new();
            for t in rows {
                ix.entry(positions.iter().map(|&p| t[p]).collect()).or_default().push(t);
            }
            ix
        });
        index.get(values).cloned().unwrap_or_default()
    }

    fn step(&mut self, done: &[bool], env: &Env, emit: &mut dyn FnMut(&Env)) -> Result<(), ArithFault> {
        let rule = self.rule;
        let bound: Bound = env.keys().cloned().collect();
        let Some(i) = (0..rule.body.len()).find(|&i| !done[i] && placeable(&rule.body[i], &bound)) else {
            if done.iter().all(|d| *d) {
                emit(env);
            }
            return Ok(());
        };
        let mut done = done.to_vec();
        done[i] = true;
        match &rule.body[i] {
            BodyLit::Rel(atom) => {
                let (positions, values) = Self::fixed(&atom.args, env);
                for t in self.lookup(i, &atom.relation, positions, &values) {
                    if let Some(e) = unify(&atom.args, t, env) {
                        self.step(&done, &e, emit)?;
                    }
                }
            }
            BodyLit::Cond { lhs, op, rhs } => {
                let (l, r) = (lhs.var().map_or(true, |v| env.contains_key(v)), rhs.var().map_or(true, |v| env.contains_key(v)));
                if l && r {
                    if op.eval(&operand(env, lhs), &operand(env, rhs)) {
                        self.step(&done, env, emit)?;
                    }
                } else {
                    let (unbound, value) = if l { (rhs, operand(env, lhs)) } else { (lhs, operand(env, rhs)) };
                    let mut e = env.clone();
                    e.insert(unbound.var().expect("variable").to_string(), value);
                    self.step(&done, &e, emit)?;
                }
            }
            BodyLit::Func { target, op, lhs, rhs } => {
                let v = arith(*op, operand(env, lhs), operand(env, rhs))?;
                match env.get(target) {
                    Some(b) if *b != v => {}
                    Some(_) => self.step(&done, env, emit)?,
                    None => {
                        let mut e = env.clone();
                        e.insert(target.clone(), v);
                        self.step(&done, &e, emit)?;
                    }
                }
            }
            BodyLit::Agg { target, agg, bound: x, over, .. } => {
                // Group variables not yet bound are enumerated.
                let free: Vec<&String> = over
                    .args
                    .iter()
                    .filter_map(|a| match a {
                        Arg::Var(v) if v != x && !env.contains_key(v) => Some(v),
                        _ => None,
                    })
                    .collect();
                let (positions, values) = Self::fixed(&over.args, env);
                let groups = match self.aggregates.get(&(i, values.clone())) {
                    Some(g) => g.clone(),
                    None => {
                        let rows = self.lookup(i, &over.relation, positions, &values);
                        let g = aggregate(rule, *agg, target, x, over, &free, rows, env)?;
                        self.aggregates.insert((i, values), g.clone());
                        g
                    }
                };
                for (key, value) in groups {
                    let mut e = env.clone();
                    for (v, k) in free.iter().zip(&key) {
                        e.insert((*v).clone(), *k);
                    }
                    match e.get(target) {
                        Some(b) if *b != value => continue,
                        Some(_) => {}
                        None => {
                            e.insert(target.clone(), value);
                        }
                    }
                    self.step(&done, &e, emit)?;
                }
            }
        }
        Ok(())
    }
}

/// Groups `rows` by the free variables and folds each group.
#[allow(clippy::too_many_arguments)]
fn aggregate(
    rule: &Rule,
    agg: AggKind,
    target: &str,
    x: &str,
    over: &crate::analysis::TypedAtom,
    free: &[&String],
    rows: Vec<&Tuple>,
    env: &Env,
) -> Result<Vec<(Vec<Value>, Value)>, ArithFault> {
    let target_ty = rule.var_types.get(target).copied().unwrap_or(ColumnType::Uint);
    let value_ty = rule.var_types.get(x).copied().unwrap_or(target_ty);
    let mut groups: BTreeMap<Vec<Value>, Vec<Value>> = BTreeMap::new();
    for t in rows {
        let Some(e) = unify(&over.args, t, env) else { continue };
        let key: Vec<Value> = free.iter().map(|v| e[*v]).collect();
        groups.entry(key).or_default().push(e[x]);
    }
    if free.is_empty() && groups.is_empty() && matches!(agg, AggKind::Sum | AggKind::Count) {
        groups.insert(Vec::new(), Vec::new());
    }
    let mut out = Vec::new();
    for (key, values) in groups {
        let value = match agg {
            AggKind::Sum => {
                let mut s = value_ty.zero();
                for v in values {
                    s = arith(ArithOp::Add, s, v)?;
                }
                Some(s)
            }
            AggKind::Count => Some(match target_ty {
                ColumnType::Int => Value::Int(I256::from(values.len() as u128)),
                _ => Value::Uint(U256::from(values.len() as u128)),
            }),
            AggKind::Max => values.iter().max().copied(),
            AggKind::Min => values.iter().min().copied(),
        };
        if let Some(v) = value {
            out.push((key, v));
        }
    }
    Ok(out)
}

fn first_difference(expected: &BTreeMap<String, BTreeSet<Tuple>>, actual: &BTreeMap<String, BTreeSet<Tuple>>) -> Option<String> {
    for (rel, want) in expected {
        let got = actual.get(rel).cloned().unwrap_or_default();
        if &got != want {
            let show = |s: &BTreeSet<Tuple>| {
                s.iter().map(|t| Fact::new(rel.clone(), t.clone()).to_string()).collect::<Vec<_>>().join(", ")
            };
            return Some(format!("{rel}: incremental {{{}}}, reference {{{}}}", show(&got), show(want)));
        }
    }
    None
}

/// Compares the executor's stored relations with a replay of its history.
/// Returns a description of the first difference.
pub fn oracle_mismatch(ex: &super::Executor) -> Result<Option<String>, ArithFault> {
    NaiveOracle::new(&ex.contract().model).check(ex)
}
