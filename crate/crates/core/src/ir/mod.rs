//! Lowering of validated rules into update functions: nested searches,
//! conditions and assignments that run when a body relation gains or loses
//! a tuple.

mod dump;
mod lower;
mod order;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::analysis::{public_interface, ContractModel, FunctionSignature, Operand, TypedAtom};
use crate::frontend::AggKind;
use crate::value::{ArithOp, CmpOp, Value};

pub use dump::dump;
pub use lower::{sanitize_id, trigger_occurrences, triggers};
pub use order::order_body;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TriggerKind {
    Insert,
    Delete,
}

impl TriggerKind {
    pub fn name(self) -> &'static str {
        match self {
            TriggerKind::Insert => "Insert",
            TriggerKind::Delete => "Delete",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trigger {
    pub kind: TriggerKind,
    pub relation: String,
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind.name(), self.relation)
    }
}

/// How one argument of a seeding tuple is matched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeedArg {
    /// Binds the variable to the tuple's value.
    Bind(String),
    /// The variable already bound by an earlier position must equal the value.
    Equal(String),
    Const(Value),
    Ignore,
}

/// Unifies a tuple of `relation` with a literal pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seed {
    pub relation: String,
    pub args: Vec<SeedArg>,
}

impl Seed {
    pub fn bound_vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|a| match a {
            SeedArg::Bind(v) => Some(v.as_str()),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssignMode {
    Bind,
    /// The target is already bound; the computed value must equal it.
    Check,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    /// Iterates rows of `relation` with `constraints` (column == operand),
    /// binding `binds` and requiring the columns in `same` to be equal.
    /// With `first_only`, stops at the first match because nothing new is
    /// bound.
    Search {
        literal: usize,
        relation: String,
        constraints: Vec<(usize, Operand)>,
        binds: Vec<(usize, String)>,
        same: Vec<(usize, usize)>,
        first_only: bool,
        body: Box<Stmt>,
    },
    If { literal: usize, lhs: Operand, op: CmpOp, rhs: Operand, body: Box<Stmt> },
    /// `var == value` with `var` not yet bound.
    Bind { literal: usize, var: String, value: Operand, body: Box<Stmt> },
    Assign { literal: usize, var: String, op: ArithOp, lhs: Operand, rhs: Operand, mode: AssignMode, body: Box<Stmt> },
    /// Reads an aggregation cache. `constraints` fix group columns; columns
    /// in `group_binds` are enumerated over the nonempty groups.
    AggAssign {
        literal: usize,
        var: String,
        agg: AggKind,
        cache: usize,
        relation: String,
        constraints: Vec<(usize, Operand)>,
        group_binds: Vec<(usize, String)>,
        /// An empty group yields zero rather than no value.
        empty_is_zero: bool,
        mode: AssignMode,
        body: Box<Stmt>,
    },
    Insert(TypedAtom),
    Delete(TypedAtom),
}

impl Stmt {
    pub fn body(&self) -> Option<&Stmt> {
        match self {
            Stmt::Search { body, .. }
            | Stmt::If { body, .. }
            | Stmt::Bind { body, .. }
            | Stmt::Assign { body, .. }
            | Stmt::AggAssign { body, .. } => Some(body),
            Stmt::Insert(_) | Stmt::Delete(_) => None,
        }
    }

    /// The statements from this one down to the terminal.
    pub fn chain(&self) -> Vec<&Stmt> {
        let mut out = vec![self];
        let mut cur = self;
        while let Some(next) = cur.body() {
            out.push(next);
            cur = next;
        }
        out
    }

    pub fn terminal(&self) -> &Stmt {
        self.chain().last().copied().unwrap_or(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateFunction {
    pub name: String,
    pub rule: String,
    pub trigger: Trigger,
    /// Body literal the trigger tuple is matched against.
    pub occurrence: usize,
    /// Whether that literal is an aggregation, in which case the tuple only
    /// fixes the group and the aggregation itself is re-evaluated.
    pub via_aggregate: bool,
    pub params: Vec<String>,
    pub seed: Seed,
    pub body: Stmt,
}

/// Re-checks whether a given head tuple is derivable by one view rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RederivePlan {
    pub rule: String,
    pub seed: Seed,
    pub body: Stmt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AggCacheKind {
    Sum,
    Count,
    /// Ordered multiset shared by `max` and `min`.
    Ordered,
}

impl AggCacheKind {
    pub fn of(agg: AggKind) -> Self {
        match agg {
            AggKind::Sum => AggCacheKind::Sum,
            AggKind::Count => AggCacheKind::Count,
            AggKind::Max | AggKind::Min => AggCacheKind::Ordered,
        }
    }
}

/// An incrementally maintained aggregate over `relation`, grouped by
/// `group_cols`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AggCacheSpec {
    pub relation: String,
    pub group_cols: Vec<usize>,
    pub value_col: Option<usize>,
    pub kind: AggCacheKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JoinIndexSpec {
    pub relation: String,
    /// Key columns fixed by the search.
    pub constrained: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledContract {
    pub model: ContractModel,
    pub functions: Vec<UpdateFunction>,
    /// Per trigger, indices into `functions` in firing order: head relations
    /// in dependency order, then rule source order, then literal position.
    pub by_trigger: BTreeMap<(String, TriggerKind), Vec<usize>>,
    /// Per view rule id.
    pub rederive: BTreeMap<String, RederivePlan>,
    /// Per view rule id, the body evaluated with nothing bound.
    pub full: BTreeMap<String, Stmt>,
    pub agg_caches: Vec<AggCacheSpec>,
    pub join_indexes: BTreeSet<JoinIndexSpec>,
    pub interface: Vec<FunctionSignature>,
    /// Executions record provenance events.
    pub record_provenance: bool,
}

impl CompiledContract {
    pub fn materialized(&self) -> &BTreeSet<String> {
        &self.model.materialized
    }

    pub fn violations(&self) -> &[String] {
        &self.model.violations
    }

    pub fn functions_for(&self, relation: &str, kind: TriggerKind) -> impl Iterator<Item = &UpdateFunction> {
        self.by_trigger
            .get(&(relation.to_string(), kind))
            .into_iter()
            .flatten()
            .map(|&i| &self.functions[i])
    }

    pub fn function(&self, name: &str) -> Option<&UpdateFunction> {
        self.functions.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IrError {
    #[error("internal error in rule {rule}: variable `{var}` is used before it is bound")]
    Internal { rule: String, var: String },
}

/// Lowers every rule of a validated model.
pub fn compile(model: &ContractModel) -> Result<CompiledContract, IrError> {
    lower::compile(model).map(|mut c| {
        c.interface = public_interface(model);
        c
    })
}
