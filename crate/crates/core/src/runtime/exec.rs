use std::collections::BTreeMap;
use std::sync::Arc;

use ethnum::U256;
use serde_json::json;
use thiserror::Error;

use super::eval::{Env, Evaluator, Flow, Reserved};
use super::store::{Fact, Store, Tuple};
use crate::analysis::{RuleKind, SEND};
use crate::frontend::RelationKind;
use crate::ir::{CompiledContract, TriggerKind, UpdateFunction};
use crate::provenance::ProvenanceLog;
use crate::value::{Address, ArithFault, ArithOp, ColumnType, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecOptions {
    /// Revert a transaction that leaves a violation relation nonempty.
    pub check_violations: bool,
    /// Revert as soon as any violation tuple appears, even transiently.
    /// Testing aid; deferred checking is the contract semantics.
    pub eager_violation_check: bool,
    /// Process rules of equal dependency rank in reverse order.
    pub reverse_tie_break: bool,
    pub provenance: bool,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions { check_violations: true, eager_violation_check: false, reverse_tie_break: false, provenance: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionRequest {
    /// Interface name (`mint`) or declared name (`recv_mint`).
    pub name: String,
    pub args: Tuple,
    pub sender: Address,
    pub value: U256,
    pub timestamp: U256,
}

impl TransactionRequest {
    pub fn new(name: impl Into<String>, args: Tuple) -> Self {
        TransactionRequest { name: name.into(), args, sender: Address::ZERO, value: U256::ZERO, timestamp: U256::ZERO }
    }

    pub fn from(mut self, sender: Address) -> Self {
        self.sender = sender;
        self
    }

    pub fn value(mut self, value: U256) -> Self {
        self.value = value;
        self
    }

    pub fn at(mut self, timestamp: U256) -> Self {
        self.timestamp = timestamp;
        self
    }
}

/// A committed transaction, as replayed by the reference evaluator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommittedTx {
    /// Declared transaction relation.
    pub relation: String,
    pub args: Tuple,
    pub reserved: Reserved,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RevertReason {
    #[error("violation: {}", facts(.0))]
    Violation(Vec<Fact>),
    #[error("transient violation: {}", facts(.0))]
    TransientViolation(Vec<Fact>),
    #[error("{0}")]
    Arithmetic(ArithFault),
    #[error("insufficient contract balance: sending {needed} with {available} held")]
    InsufficientBalance { needed: U256, available: U256 },
}

fn facts(f: &[Fact]) -> String {
    f.iter().map(Fact::to_string).collect::<Vec<_>>().join(", ")
}

impl RevertReason {
    pub fn code(&self) -> &'static str {
        match self {
            RevertReason::Violation(_) => "Violation",
            RevertReason::TransientViolation(_) => "TransientViolation",
            RevertReason::Arithmetic(ArithFault::DivisionByZero) => "DivisionByZero",
            RevertReason::Arithmetic(_) => "Overflow",
            RevertReason::InsufficientBalance { .. } => "InsufficientContractBalance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Committed,
    /// No transaction rule derived a head.
    Rejected,
    Reverted(RevertReason),
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Committed => "committed",
            Outcome::Rejected => "rejected",
            Outcome::Reverted(_) => "reverted",
        }
    }

    pub fn is_committed(&self) -> bool {
        *self == Outcome::Committed
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExecStats {
    /// Stored rows and cache groups examined.
    pub row_visits: u64,
    /// Tuples inserted or deleted by rules.
    pub changes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Receipt {
    pub index: usize,
    pub transaction: String,
    pub outcome: Outcome,
    /// Violation tuples present when the transaction finished.
    pub violations: Vec<Fact>,
    pub sends: Vec<(Address, U256)>,
    /// Heads derived by transaction rules.
    pub events: Vec<Fact>,
    pub stats: ExecStats,
}

impl Receipt {
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "index": self.index,
            "transaction": self.transaction,
            "outcome": self.outcome.name(),
            "violations": self.violations.iter().map(Fact::to_json).collect::<Vec<_>>(),
            "sends": self.sends.iter().map(|(to, amt)| json!({"to": to.to_string(), "amount": amt.to_string()})).collect::<Vec<_>>(),
            "events": self.events.iter().map(Fact::to_json).collect::<Vec<_>>(),
            "rowVisits": self.stats.row_visits,
        });
        if let Outcome::Reverted(r) = &self.outcome {
            v["reason"] = json!(r.code());
            v["message"] = json!(r.to_string());
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("unknown transaction `{0}`")]
    UnknownTransaction(String),
    #[error("the constructor runs only at instantiation")]
    ConstructorCall,
    #[error("transaction `{transaction}` takes {expected} arguments, got {found}")]
    ArityMismatch { transaction: String, expected: usize, found: usize },
    #[error("argument {column} of `{transaction}` must be {expected}, got {found}")]
    TypeMismatch { transaction: String, column: usize, expected: ColumnType, found: ColumnType },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstantiateError {
    #[error(transparent)]
    Request(#[from] ExecError),
    #[error("constructor reverted: {}", match &.0.outcome { Outcome::Reverted(r) => r.to_string(), o => o.name().to_string() })]
    ConstructorReverted(Box<Receipt>),
    #[error("constructor derived nothing")]
    ConstructorRejected,
    #[error("initial state is invalid: {0}")]
    Bootstrap(RevertReason),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("`{0}` is not a public view")]
    NotPublic(String),
    #[error("`{relation}` is keyed by {expected} columns, got {found}")]
    KeyArityMismatch { relation: String, expected: usize, found: usize },
}

/// Deployment parameters of [`Executor::instantiate`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Deployment {
    pub args: Tuple,
    pub sender: Address,
    pub value: U256,
    pub timestamp: U256,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractState {
    pub store: Store,
    pub provenance: ProvenanceLog,
    pub history: Vec<CommittedTx>,
    pub executed: usize,
}

enum Abort {
    Fault(ArithFault),
    Eager(Vec<Fact>),
    Balance { needed: U256, available: U256 },
}

impl From<ArithFault> for Abort {
    fn from(f: ArithFault) -> Self {
        Abort::Fault(f)
    }
}

impl From<Abort> for RevertReason {
    fn from(a: Abort) -> Self {
        match a {
            Abort::Fault(f) => RevertReason::Arithmetic(f),
            Abort::Eager(v) => RevertReason::TransientViolation(v),
            Abort::Balance { needed, available } => RevertReason::InsufficientBalance { needed, available },
        }
    }
}

enum Support {
    Event,
    Rule { id: String, reads: Vec<Fact> },
}

/// Candidate changes of one rule, gathered from the old and new sides.
#[derive(Default)]
struct Candidates {
    id: String,
    retract: Vec<Tuple>,
    assert: Vec<Tuple>,
}

/// Runs transactions of one contract instance.
#[derive(Debug, Clone)]
pub struct Executor {
    contract: Arc<CompiledContract>,
    options: ExecOptions,
    state: ContractState,
    reserved: Option<Reserved>,
    stats: ExecStats,
}

impl Executor {
    /// Creates the initial state: view rules that hold on an empty database
    /// are evaluated, then the constructor (if declared) runs.
    pub fn instantiate(contract: &CompiledContract, deploy: Deployment, options: ExecOptions) -> Result<Self, InstantiateError> {
        let contract = Arc::new(contract.clone());
        let options = ExecOptions { provenance: options.provenance || contract.record_provenance, ..options };
        let state = ContractState {
            store: Store::new(&contract),
            provenance: ProvenanceLog::default(),
            history: Vec::new(),
            executed: 0,
        };
        let mut ex = Executor { contract, options, state, reserved: None, stats: ExecStats::default() };
        ex.bootstrap().map_err(|a| InstantiateError::Bootstrap(a.into()))?;

        let ctor = ex.contract.model.constructor().map(|d| d.name.clone());
        match ctor {
            Some(name) => {
                let req = TransactionRequest { name, args: deploy.args, sender: deploy.sender, value: deploy.value, timestamp: deploy.timestamp };
                let receipt = ex.run_checked(&req)?;
                match receipt.outcome {
                    Outcome::Committed => {}
                    Outcome::Rejected => return Err(InstantiateError::ConstructorRejected),
                    Outcome::Reverted(_) => return Err(InstantiateError::ConstructorReverted(Box::new(receipt))),
                }
            }
            None => {
                if !deploy.args.is_empty() {
                    return Err(ExecError::ArityMismatch { transaction: "constructor".into(), expected: 0, found: deploy.args.len() }.into());
                }
                let v = ex.violating();
                if ex.options.check_violations && !v.is_empty() {
                    return Err(InstantiateError::Bootstrap(RevertReason::Violation(v)));
                }
            }
        }
        Ok(ex)
    }

    pub fn contract(&self) -> &CompiledContract {
        &self.contract
    }

    pub fn options(&self) -> ExecOptions {
        self.options
    }

    pub fn state(&self) -> &ContractState {
        &self.state
    }

    pub fn provenance(&self) -> &ProvenanceLog {
        &self.state.provenance
    }

    pub fn history(&self) -> &[CommittedTx] {
        &self.state.history
    }

    pub fn balance(&self) -> U256 {
        self.state.store.balance
    }

    /// Stored tuples of a materialized relation, in key order.
    pub fn tuples(&self, relation: &str) -> Vec<Tuple> {
        self.state.store.table(relation).map(|t| t.tuples().cloned().collect()).unwrap_or_default()
    }

    /// Non-key values of the row of a public view with the given keys.
    /// Singletons ignore `keys`; views keyed by every column yield an empty
    /// tuple when the row exists.
    pub fn query_view(&self, relation: &str, keys: &[Value]) -> Result<Option<Tuple>, QueryError> {
        let model = &self.contract.model;
        let decl = model.relation(relation).filter(|_| model.is_public(relation)).ok_or_else(|| QueryError::NotPublic(relation.into()))?;
        let Some(table) = self.state.store.table(relation) else { return Ok(None) };
        let key: Tuple = if decl.kind == RelationKind::Singleton {
            Vec::new()
        } else {
            if keys.len() != decl.primary_keys.len() {
                return Err(QueryError::KeyArityMismatch { relation: relation.into(), expected: decl.primary_keys.len(), found: keys.len() });
            }
            keys.to_vec()
        };
        Ok(table.rows.get(&key).map(|r| decl.non_key_columns().into_iter().map(|c| r.values[c]).collect()))
    }

    /// Violation tuples currently stored.
    pub fn violating(&self) -> Vec<Fact> {
        let mut out = Vec::new();
        for v in self.contract.violations() {
            for t in self.tuples(v) {
                out.push(Fact::new(v.clone(), t));
            }
        }
        out
    }

    pub fn execute(&mut self, req: &TransactionRequest) -> Result<Receipt, ExecError> {
        let model = &self.contract.model;
        let decl = model.transaction(&req.name).ok_or_else(|| ExecError::UnknownTransaction(req.name.clone()))?;
        if model.constructor().is_some_and(|c| c.name == decl.name) {
            return Err(ExecError::ConstructorCall);
        }
        let req = TransactionRequest { name: decl.name.clone(), ..req.clone() };
        self.run_checked(&req)
    }

    fn run_checked(&mut self, req: &TransactionRequest) -> Result<Receipt, ExecError> {
        let decl = self.contract.model.relation(&req.name).expect("resolved transaction");
        let name = decl.interface_name().to_string();
        if req.args.len() != decl.arity() {
            return Err(ExecError::ArityMismatch { transaction: name, expected: decl.arity(), found: req.args.len() });
        }
        for (i, (a, col)) in req.args.iter().zip(&decl.schema).enumerate() {
            if a.ty() != col.ty {
                return Err(ExecError::TypeMismatch { transaction: name, column: i, expected: col.ty, found: a.ty() });
            }
        }
        Ok(self.run_transaction(req, name))
    }

    fn run_transaction(&mut self, req: &TransactionRequest, name: String) -> Receipt {
        let snapshot = self.state.store.clone();
        let reserved = Reserved { sender: req.sender, value: req.value, timestamp: req.timestamp };
        self.reserved = Some(reserved);
        self.stats = ExecStats::default();
        let mut sends = Vec::new();
        let mut events = Vec::new();
        let result = self.transaction_body(&req.name, &req.args, &mut sends, &mut events);
        self.reserved = None;

        let outcome = match result {
            Ok(false) => Outcome::Rejected,
            Err(a) => Outcome::Reverted(a.into()),
            Ok(true) => {
                let v = self.violating();
                if self.options.check_violations && !v.is_empty() {
                    Outcome::Reverted(RevertReason::Violation(v))
                } else {
                    Outcome::Committed
                }
            }
        };
        let violations = self.violating();
        if outcome.is_committed() {
            self.state.history.push(CommittedTx { relation: req.name.clone(), args: req.args.clone(), reserved });
        } else {
            self.state.store = snapshot;
            sends.clear();
        }
        let index = self.state.executed;
        self.state.executed += 1;
        Receipt { index, transaction: name, outcome, violations, sends, events, stats: self.stats }
    }

    /// Returns whether any transaction rule fired.
    fn transaction_body(
        &mut self,
        relation: &str,
        args: &Tuple,
        sends: &mut Vec<(Address, U256)>,
        events: &mut Vec<Fact>,
    ) -> Result<bool, Abort> {
        let c = Arc::clone(&self.contract);
        let reserved = self.reserved.expect("transaction bindings");
        let balance = self.state.store.balance;
        self.state.store.balance = balance
            .checked_add(reserved.value)
            .ok_or(ArithFault::Overflow { op: ArithOp::Add, lhs: Value::Uint(balance), rhs: Value::Uint(reserved.value) })?;

        let mut derived = Vec::new();
        for f in c.functions_for(relation, TriggerKind::Insert) {
            for (t, reads) in self.eval_function(f, args, self.options.provenance)? {
                derived.push((f.rule.clone(), Fact::new(c.model.rule(&f.rule).expect("rule").head.relation.clone(), t), reads));
            }
        }
        if derived.is_empty() {
            if self.options.provenance {
                for f in c.functions_for(relation, TriggerKind::Insert) {
                    let reads = self.trace_function(f, args);
                    self.state.provenance.reads(&f.rule, &reads);
                }
            }
            return Ok(false);
        }
        for (rule, fact, reads) in derived {
            if fact.relation == SEND {
                let (Value::Address(to), Value::Uint(amount)) = (fact.values[0], fact.values[1]) else {
                    unreachable!("send is (address, uint)")
                };
                let available = self.state.store.balance;
                self.state.store.balance = available.checked_sub(amount).ok_or(Abort::Balance { needed: amount, available })?;
                sends.push((to, amount));
                self.log_firing(&rule, &reads, &fact);
            } else if self.state.store.contains(&fact) {
                self.state.store.mark_event(&fact.relation, &fact.values);
                self.log_firing(&rule, &reads, &fact);
            } else if self.state.store.is_stored(&fact.relation) {
                self.add_fact(&fact.relation, fact.values.clone(), true, &rule, &reads)?;
            } else {
                self.log_firing(&rule, &reads, &fact);
            }
            events.push(fact);
        }
        Ok(true)
    }

    fn log_firing(&mut self, rule: &str, reads: &[Fact], fact: &Fact) {
        if self.options.provenance {
            self.state.provenance.firing(rule, reads, fact.clone());
        }
    }

    fn bootstrap(&mut self) -> Result<(), Abort> {
        let c = Arc::clone(&self.contract);
        let model = &c.model;
        let mut rules: Vec<_> = model
            .rules
            .iter()
            .filter(|r| r.kind == RuleKind::View && self.state.store.is_stored(&r.head.relation))
            .collect();
        rules.sort_by_key(|r| (model.topo_rank(&r.head.relation), r.index));
        for rule in rules {
            let mut out = Vec::new();
            {
                let mut ev = Evaluator::new(&self.state.store, None, self.options.provenance);
                let mut emit = |t: Tuple, reads: &[Fact]| {
                    out.push((t, reads.to_vec()));
                    Flow::Continue
                };
                ev.run(rule, &c.full[&rule.id], &mut Env::default(), &mut Vec::new(), &mut emit)?;
                self.stats.row_visits += ev.visits;
            }
            for (t, reads) in out {
                if !self.state.store.contains(&Fact::new(rule.head.relation.clone(), t.clone())) {
                    self.add_fact(&rule.head.relation, t, false, &rule.id, &reads)?;
                }
            }
        }
        Ok(())
    }

    /// Runs an update function seeded with `tuple`.
    fn eval_function(&mut self, f: &UpdateFunction, tuple: &[Value], capture: bool) -> Result<Vec<(Tuple, Vec<Fact>)>, ArithFault> {
        let Some(mut env) = Env::seeded(&f.seed, tuple) else { return Ok(Vec::new()) };
        let rule = self.contract.model.rule(&f.rule).expect("rule of function");
        let mut reads = Vec::new();
        if capture && !f.via_aggregate {
            reads.push(Fact::new(f.trigger.relation.clone(), tuple.to_vec()));
        }
        let mut out = Vec::new();
        let mut ev = Evaluator::new(&self.state.store, self.reserved.as_ref(), capture);
        let mut emit = |t: Tuple, r: &[Fact]| {
            out.push((t, r.to_vec()));
            Flow::Continue
        };
        ev.run(rule, &f.body, &mut env, &mut reads, &mut emit)?;
        self.stats.row_visits += ev.visits;
        Ok(out)
    }

    /// Rows a transaction function visits, including its trigger tuple.
    fn trace_function(&self, f: &UpdateFunction, tuple: &[Value]) -> Vec<Fact> {
        let mut trace = vec![Fact::new(f.trigger.relation.clone(), tuple.to_vec())];
        let Some(mut env) = Env::seeded(&f.seed, tuple) else { return trace };
        let rule = self.contract.model.rule(&f.rule).expect("rule of function");
        let mut ev = Evaluator::new(&self.state.store, self.reserved.as_ref(), false);
        ev.trace = Some(Vec::new());
        let mut emit = |_t: Tuple, _r: &[Fact]| Flow::Continue;
        // Faults cannot change the outcome here: nothing was derived.
        let _ = ev.run(rule, &f.body, &mut env, &mut Vec::new(), &mut emit);
        trace.extend(ev.trace.unwrap_or_default());
        trace
    }

    /// Why `tuple` of `relation` holds in the current state, if it does.
    fn support(&mut self, relation: &str, tuple: &[Value]) -> Result<Option<Support>, ArithFault> {
        if let Some(row) = self.state.store.table(relation).and_then(|t| t.get(tuple)) {
            if row.event && row.values == tuple {
                return Ok(Some(Support::Event));
            }
        }
        let c = Arc::clone(&self.contract);
        for rule in c.model.rules_deriving(relation).filter(|r| r.kind == RuleKind::View) {
            let plan = &c.rederive[&rule.id];
            let Some(mut env) = Env::seeded(&plan.seed, tuple) else { continue };
            let mut found = None;
            let mut ev = Evaluator::new(&self.state.store, None, self.options.provenance);
            let mut emit = |_t: Tuple, r: &[Fact]| {
                found = Some(r.to_vec());
                Flow::Stop
            };
            ev.run(rule, &plan.body, &mut env, &mut Vec::new(), &mut emit)?;
            self.stats.row_visits += ev.visits;
            if let Some(reads) = found {
                return Ok(Some(Support::Rule { id: rule.id.clone(), reads }));
            }
        }
        Ok(None)
    }

    /// Stores a derived tuple, displacing a row with the same key.
    fn add_fact(&mut self, relation: &str, tuple: Tuple, event: bool, rule: &str, reads: &[Fact]) -> Result<(), Abort> {
        let fact = Fact::new(relation, tuple);
        self.log_firing(rule, reads, &fact);
        let old = self.state.store.table(relation).and_then(|t| t.get(&fact.values)).map(|r| r.values.clone());
        if let Some(old) = old {
            self.remove_fact(relation, old, rule)?;
        }
        self.apply(TriggerKind::Insert, relation, fact.values, event)
    }

    fn remove_fact(&mut self, relation: &str, tuple: Tuple, rule: &str) -> Result<(), Abort> {
        if self.options.provenance {
            self.state.provenance.delete(rule, Fact::new(relation, tuple.clone()));
        }
        self.apply(TriggerKind::Delete, relation, tuple, false)
    }

    /// Applies one change to a stored relation and maintains everything
    /// derived from it.
    ///
    /// Dependent rules are evaluated against the state before the change
    /// (retraction candidates) and after it (assertion candidates). Each
    /// candidate is then re-checked against the current state, rule by rule
    /// in dependency order, retractions first.
    fn apply(&mut self, kind: TriggerKind, relation: &str, tuple: Tuple, event: bool) -> Result<(), Abort> {
        let c = Arc::clone(&self.contract);
        let stored = |f: &&UpdateFunction| {
            c.model.rule(&f.rule).is_some_and(|r| c.materialized().contains(&r.head.relation))
        };
        let mut groups: BTreeMap<(usize, usize), Candidates> = BTreeMap::new();
        let mut group = |f: &UpdateFunction| -> (usize, usize) {
            let r = c.model.rule(&f.rule).expect("rule");
            let k = (c.model.topo_rank(&r.head.relation), r.index);
            groups.entry(k).or_insert_with(|| Candidates { id: r.id.clone(), ..Default::default() });
            k
        };

        let old_side: Vec<&UpdateFunction> = c
            .functions_for(relation, TriggerKind::Delete)
            .filter(|f| kind == TriggerKind::Delete || f.via_aggregate)
            .filter(stored)
            .collect();
        let mut retract = Vec::new();
        for f in old_side {
            let k = group(f);
            for (t, _) in self.eval_function(f, &tuple, false)? {
                retract.push((k, t));
            }
        }

        match kind {
            TriggerKind::Insert => self.state.store.insert(relation, tuple.clone(), event)?,
            TriggerKind::Delete => {
                self.state.store.remove(relation, &tuple)?;
            }
        }
        self.stats.changes += 1;
        if kind == TriggerKind::Insert && self.options.eager_violation_check && c.model.is_violation(relation) {
            return Err(Abort::Eager(vec![Fact::new(relation, tuple)]));
        }

        let new_side: Vec<&UpdateFunction> = c
            .functions_for(relation, TriggerKind::Insert)
            .filter(|f| kind == TriggerKind::Insert || f.via_aggregate)
            .filter(stored)
            .collect();
        let mut assert = Vec::new();
        for f in new_side {
            let k = group(f);
            for (t, _) in self.eval_function(f, &tuple, false)? {
                assert.push((k, t));
            }
        }
        for (k, t) in retract {
            let g = groups.get_mut(&k).expect("group");
            if !g.retract.contains(&t) {
                g.retract.push(t);
            }
        }
        for (k, t) in assert {
            let g = groups.get_mut(&k).expect("group");
            if !g.assert.contains(&t) {
                g.assert.push(t);
            }
        }

        let mut ordered: Vec<Candidates> = groups.into_values().collect();
        if self.options.reverse_tie_break {
            ordered.reverse();
        }
        for g in ordered {
            let head = &c.model.rule(&g.id).expect("rule").head.relation;
            for t in g.retract {
                let fact = Fact::new(head.clone(), t);
                if self.state.store.contains(&fact) && self.support(head, &fact.values)?.is_none() {
                    self.remove_fact(head, fact.values, &g.id)?;
                }
            }
            for t in g.assert {
                if self.state.store.contains(&Fact::new(head.clone(), t.clone())) {
                    continue;
                }
                if let Some(Support::Rule { id, reads }) = self.support(head, &t)? {
                    self.add_fact(head, t, false, &id, &reads)?;
                }
            }
        }
        Ok(())
    }
}
