//! Validation of parsed programs into a [`ContractModel`]: name, arity and
//! type checks, groundedness, the relation dependency graph and the set of
//! relations that must be stored.

pub mod ground;
mod graph;
mod interface;
mod typing;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::frontend::{AggKind, AnnotationKind, Column, RelationDecl, RelationKind, RuleDecl, SourceProgram};
use crate::value::{ArithOp, CmpOp, ColumnType, Value};

pub use graph::{DependencyEdge, DependencyGraph};
pub use interface::{public_interface, FunctionKind, FunctionSignature};

pub const MSG_SENDER: &str = "msgSender";
pub const MSG_VALUE: &str = "msgValue";
pub const NOW: &str = "now";
pub const SEND: &str = "send";
pub const CONSTRUCTOR: &str = "constructor";

/// Relations bound by the runtime for the duration of one transaction.
pub const READ_ONLY_RESERVED: [&str; 3] = [MSG_SENDER, MSG_VALUE, NOW];

fn reserved_decls() -> Vec<RelationDecl> {
    let one = |name: &str, col: &str, ty| RelationDecl {
        name: name.into(),
        schema: vec![Column { name: col.into(), ty }],
        primary_keys: vec![],
        kind: RelationKind::Reserved,
        explicit_keys: false,
    };
    vec![
        one(MSG_SENDER, "a", ColumnType::Address),
        one(MSG_VALUE, "v", ColumnType::Uint),
        one(NOW, "t", ColumnType::Uint),
        RelationDecl {
            name: SEND.into(),
            schema: vec![
                Column { name: "to".into(), ty: ColumnType::Address },
                Column { name: "amount".into(), ty: ColumnType::Uint },
            ],
            primary_keys: vec![0, 1],
            kind: RelationKind::Reserved,
            explicit_keys: false,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arg {
    Var(String),
    Wildcard,
    Const(Value),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operand {
    Var(String),
    Const(Value),
}

impl Operand {
    pub fn var(&self) -> Option<&str> {
        match self {
            Operand::Var(v) => Some(v),
            Operand::Const(_) => None,
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Var(v) => f.write_str(v),
            Operand::Const(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedAtom {
    pub relation: String,
    pub args: Vec<Arg>,
}

impl TypedAtom {
    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|a| match a {
            Arg::Var(v) => Some(v.as_str()),
            _ => None,
        })
    }
}

impl fmt::Display for TypedAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| match a {
                Arg::Var(v) => v.clone(),
                Arg::Wildcard => "_".into(),
                Arg::Const(c) => c.to_string(),
            })
            .collect();
        write!(f, "{}({})", self.relation, args.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BodyLit {
    Rel(TypedAtom),
    Cond { lhs: Operand, op: CmpOp, rhs: Operand },
    Func { target: String, op: ArithOp, lhs: Operand, rhs: Operand },
    Agg {
        target: String,
        agg: AggKind,
        bound: String,
        over: TypedAtom,
        /// Variables of `over` other than `bound`, in order of appearance.
        group_keys: Vec<String>,
        /// Group keys that no other literal binds; the aggregation enumerates
        /// the nonempty groups for them.
        free_keys: Vec<String>,
    },
}

impl BodyLit {
    /// The relation this literal reads, if any.
    pub fn relation(&self) -> Option<&str> {
        match self {
            BodyLit::Rel(a) | BodyLit::Agg { over: a, .. } => Some(&a.relation),
            _ => None,
        }
    }
}

impl fmt::Display for BodyLit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BodyLit::Rel(a) => write!(f, "{a}"),
            BodyLit::Cond { lhs, op, rhs } => write!(f, "{lhs} {} {rhs}", op.symbol()),
            BodyLit::Func { target, op, lhs, rhs } => write!(f, "{target} := {lhs} {} {rhs}", op.symbol()),
            BodyLit::Agg { target, agg, bound, over, .. } => write!(f, "{target} = {} {bound}: {over}", agg.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleKind {
    /// Index of the transaction literal within the body.
    Transaction { literal: usize },
    View,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub id: String,
    /// Position in source order.
    pub index: usize,
    pub kind: RuleKind,
    pub head: TypedAtom,
    pub body: Vec<BodyLit>,
    pub var_types: BTreeMap<String, ColumnType>,
    pub source: RuleDecl,
}

impl Rule {
    pub fn is_transaction(&self) -> bool {
        matches!(self.kind, RuleKind::Transaction { .. })
    }

    pub fn transaction_relation(&self) -> Option<&str> {
        match self.kind {
            RuleKind::Transaction { literal } => self.body[literal].relation(),
            RuleKind::View => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisErrorKind {
    #[error("relation `{0}` is not declared")]
    UnknownRelation(String),
    #[error("`{relation}` has {expected} columns but is used with {found} arguments")]
    ArityMismatch { relation: String, expected: usize, found: usize },
    #[error("{0}")]
    TypeMismatch(String),
    #[error("head variable `{variable}` of rule {rule} is not grounded by the body")]
    UngroundedHeadVariable { variable: String, rule: String },
    #[error("variable `{0}` is used before anything binds it")]
    UngroundedVariable(String),
    #[error("recursion through {}", .0.join(" -> "))]
    RecursionDetected(Vec<String>),
    #[error("rule body reads more than one transaction relation: {}", .0.join(", "))]
    MultipleTransactionTriggers(Vec<String>),
    #[error("`{0}` is bound by the runtime and cannot be derived")]
    WriteToReadOnlyReserved(String),
    #[error("transaction relation `{0}` cannot be derived by a rule")]
    WriteToTransactionRelation(String),
    #[error("`send` can only appear in rule heads")]
    ReadFromWriteOnlyReserved,
    #[error("`{0}` is only available in transaction rules")]
    ReservedOutsideTransactionRule(String),
    #[error("transaction relation `{0}` cannot be annotated")]
    AnnotationOnTransactionRelation(String),
    #[error("reserved relation `{0}` cannot be annotated")]
    AnnotationOnReservedRelation(String),
    #[error("`{0}` is a reserved relation and cannot be declared")]
    ReservedRedeclared(String),
    #[error("{0}")]
    InvalidAggregation(String),
    #[error("wildcard `_` is only allowed as a relation argument")]
    InvalidWildcard,
    #[error("relation `{0}` is never derived by any rule")]
    NeverDerived(String),
    #[error("transaction relation `{0}` is not read by any rule")]
    UnusedTransaction(String),
}

impl AnalysisErrorKind {
    pub fn code(&self) -> &'static str {
        use AnalysisErrorKind::*;
        match self {
            UnknownRelation(_) => "UnknownRelation",
            ArityMismatch { .. } => "ArityMismatch",
            TypeMismatch(_) => "TypeMismatch",
            UngroundedHeadVariable { .. } => "UngroundedHeadVariable",
            UngroundedVariable(_) => "UngroundedVariable",
            RecursionDetected(_) => "RecursionDetected",
            MultipleTransactionTriggers(_) => "MultipleTransactionTriggers",
            WriteToReadOnlyReserved(_) => "WriteToReadOnlyReserved",
            WriteToTransactionRelation(_) => "WriteToTransactionRelation",
            ReadFromWriteOnlyReserved => "ReadFromWriteOnlyReserved",
            ReservedOutsideTransactionRule(_) => "ReservedOutsideTransactionRule",
            AnnotationOnTransactionRelation(_) => "AnnotationOnTransactionRelation",
            AnnotationOnReservedRelation(_) => "AnnotationOnReservedRelation",
            ReservedRedeclared(_) => "ReservedRedeclared",
            InvalidAggregation(_) => "InvalidAggregation",
            InvalidWildcard => "InvalidWildcard",
            NeverDerived(_) => "NeverDerived",
            UnusedTransaction(_) => "UnusedTransaction",
        }
    }
}

/// One finding, attributed to a rule id or a declared relation name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub site: String,
    pub kind: AnalysisErrorKind,
}

impl Diagnostic {
    fn error(site: impl Into<String>, kind: AnalysisErrorKind) -> Self {
        Diagnostic { severity: Severity::Error, site: site.into(), kind }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "severity": match self.severity { Severity::Error => "error", Severity::Warning => "warning" },
            "site": self.site,
            "code": self.kind.code(),
            "message": self.kind.to_string(),
        })
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}:{}:{}:{}", self.site, self.kind.code(), self.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
pub struct AnalysisErrors(pub Vec<Diagnostic>);

impl AnalysisErrors {
    pub fn kinds(&self) -> Vec<&AnalysisErrorKind> {
        self.0.iter().map(|d| &d.kind).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractModel {
    /// Declared relations followed by the injected reserved ones.
    pub relations: Vec<RelationDecl>,
    pub rules: Vec<Rule>,
    /// Annotation order, without duplicates.
    pub public_views: Vec<String>,
    pub violations: Vec<String>,
    pub dep_graph: DependencyGraph,
    /// Relations in dependency order; ties follow declaration order.
    pub topo_order: Vec<String>,
    pub materialized: BTreeSet<String>,
    pub warnings: Vec<Diagnostic>,
}

impl ContractModel {
    pub fn relation(&self, name: &str) -> Option<&RelationDecl> {
        self.relations.iter().find(|r| r.name == name)
    }

    pub fn rule(&self, id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn is_public(&self, name: &str) -> bool {
        self.public_views.iter().any(|p| p == name)
    }

    pub fn is_violation(&self, name: &str) -> bool {
        self.violations.iter().any(|p| p == name)
    }

    pub fn transactions(&self) -> impl Iterator<Item = &RelationDecl> {
        self.relations.iter().filter(|r| r.kind == RelationKind::Transaction)
    }

    pub fn constructor(&self) -> Option<&RelationDecl> {
        self.transactions().find(|r| r.interface_name() == CONSTRUCTOR)
    }

    /// Finds a transaction relation by declared or interface name.
    pub fn transaction(&self, name: &str) -> Option<&RelationDecl> {
        self.transactions().find(|r| r.name == name || r.interface_name() == name)
    }

    pub fn topo_rank(&self, relation: &str) -> usize {
        self.topo_order.iter().position(|r| r == relation).unwrap_or(usize::MAX)
    }

    /// Rules whose head is `relation`, in source order.
    pub fn rules_deriving<'a>(&'a self, relation: &'a str) -> impl Iterator<Item = &'a Rule> + 'a {
        self.rules.iter().filter(move |r| r.head.relation == relation)
    }
}

/// Validates a parsed program. All independent problems are reported
/// together; graph checks run only once every rule checks out.
pub fn validate(program: &SourceProgram) -> Result<ContractModel, AnalysisErrors> {
    let mut errors = Vec::new();
    let mut relations = Vec::new();
    for d in &program.decls {
        if READ_ONLY_RESERVED.contains(&d.name.as_str()) || d.name == SEND {
            errors.push(Diagnostic::error(&d.name, AnalysisErrorKind::ReservedRedeclared(d.name.clone())));
        } else {
            relations.push(d.clone());
        }
    }
    relations.extend(reserved_decls());
    let lookup: BTreeMap<&str, &RelationDecl> = relations.iter().map(|r| (r.name.as_str(), r)).collect();

    let mut public_views = Vec::new();
    let mut violations = Vec::new();
    for a in &program.annotations {
        let kind = match lookup.get(a.relation.as_str()) {
            None => Some(AnalysisErrorKind::UnknownRelation(a.relation.clone())),
            Some(d) if d.kind == RelationKind::Transaction => {
                Some(AnalysisErrorKind::AnnotationOnTransactionRelation(a.relation.clone()))
            }
            Some(d) if d.kind == RelationKind::Reserved => {
                Some(AnalysisErrorKind::AnnotationOnReservedRelation(a.relation.clone()))
            }
            Some(_) => None,
        };
        if let Some(kind) = kind {
            errors.push(Diagnostic::error(&a.relation, kind));
            continue;
        }
        let list = match a.kind {
            AnnotationKind::Public => &mut public_views,
            AnnotationKind::Violation => &mut violations,
        };
        if !list.contains(&a.relation) {
            list.push(a.relation.clone());
        }
    }

    let mut rules = Vec::new();
    for (index, decl) in program.rules.iter().enumerate() {
        match typing::check_rule(decl, index, &lookup) {
            Ok(rule) => rules.push(rule),
            Err(kinds) => errors.extend(kinds.into_iter().map(|k| Diagnostic::error(&decl.id, k))),
        }
    }
    if !errors.is_empty() {
        return Err(AnalysisErrors(errors));
    }

    let dep_graph = DependencyGraph::build(&rules);
    let order: Vec<&str> = relations.iter().map(|r| r.name.as_str()).collect();
    let topo_order = match dep_graph.topological_order(&order) {
        Ok(t) => t,
        Err(cycle) => {
            let site = dep_graph.edge_rule(&cycle[0], &cycle[1]).unwrap_or_default();
            return Err(AnalysisErrors(vec![Diagnostic::error(site, AnalysisErrorKind::RecursionDetected(cycle))]));
        }
    };

    let mut warnings = Vec::new();
    for r in &relations {
        let derived = rules.iter().any(|rule| rule.head.relation == r.name);
        let read = rules.iter().any(|rule| rule.transaction_relation() == Some(&r.name));
        match r.kind {
            RelationKind::Simple | RelationKind::Singleton if !derived => warnings.push(Diagnostic {
                severity: Severity::Warning,
                site: r.name.clone(),
                kind: AnalysisErrorKind::NeverDerived(r.name.clone()),
            }),
            RelationKind::Transaction if !read => warnings.push(Diagnostic {
                severity: Severity::Warning,
                site: r.name.clone(),
                kind: AnalysisErrorKind::UnusedTransaction(r.name.clone()),
            }),
            _ => {}
        }
    }

    let mut model = ContractModel {
        relations,
        rules,
        public_views,
        violations,
        dep_graph,
        topo_order,
        materialized: BTreeSet::new(),
        warnings,
    };
    model.materialized = materialization_set(&model);
    Ok(model)
}

/// Relations that are stored and maintained: public views, violations,
/// everything a transaction rule or a stored relation reads, closed under
/// the rules that derive them. Transaction and reserved relations are
/// never stored.
pub fn materialization_set(model: &ContractModel) -> BTreeSet<String> {
    let storable = |name: &str| {
        model.relation(name).is_some_and(|d| matches!(d.kind, RelationKind::Simple | RelationKind::Singleton))
    };
    let mut set: BTreeSet<String> = model.public_views.iter().chain(&model.violations).cloned().collect();
    for rule in &model.rules {
        if rule.is_transaction() || rule.head.relation == SEND {
            set.extend(rule.body.iter().filter_map(BodyLit::relation).map(str::to_string));
        }
    }
    set.retain(|r| storable(r));
    loop {
        let mut grew = false;
        for rule in &model.rules {
            if set.contains(&rule.head.relation) {
                for rel in rule.body.iter().filter_map(BodyLit::relation) {
                    if storable(rel) && set.insert(rel.to_string()) {
                        grew = true;
                    }
                }
            }
        }
        if !grew {
            return set;
        }
    }
}

#[cfg(test)]
mod tests;
