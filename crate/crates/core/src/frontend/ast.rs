//! Syntax tree for contract sources.

use ethnum::U256;

use crate::value::{Address, ArithOp, CmpOp, ColumnType};

pub const TRANSACTION_PREFIX: &str = "recv_";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub ty: ColumnType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelationKind {
    Simple,
    Singleton,
    Transaction,
    Reserved,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationDecl {
    pub name: String,
    pub schema: Vec<Column>,
    pub primary_keys: Vec<usize>,
    pub kind: RelationKind,
    /// Whether the source carried a `[k, ...]` bracket.
    pub explicit_keys: bool,
}

impl RelationDecl {
    pub fn arity(&self) -> usize {
        self.schema.len()
    }

    pub fn types(&self) -> Vec<ColumnType> {
        self.schema.iter().map(|c| c.ty).collect()
    }

    /// Name of the external entry point for a transaction relation
    /// (`recv_mint` is called as `mint`).
    pub fn interface_name(&self) -> &str {
        self.name.strip_prefix(TRANSACTION_PREFIX).unwrap_or(&self.name)
    }

    pub fn is_key(&self, column: usize) -> bool {
        self.primary_keys.contains(&column)
    }

    pub fn non_key_columns(&self) -> Vec<usize> {
        (0..self.arity()).filter(|c| !self.is_key(*c)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnnotationKind {
    Public,
    Violation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub kind: AnnotationKind,
    pub relation: String,
}

/// A literal constant before type resolution. Decimal integers stay
/// untyped until the checker sees where they are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constant {
    Number { negative: bool, magnitude: U256 },
    Bool(bool),
    Address(Address),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Wildcard,
    Const(Constant),
}

impl Term {
    pub fn var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub relation: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(Term::var)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggKind {
    Sum,
    Max,
    Min,
    Count,
}

impl AggKind {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sum" => Some(AggKind::Sum),
            "max" => Some(AggKind::Max),
            "min" => Some(AggKind::Min),
            "count" => Some(AggKind::Count),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AggKind::Sum => "sum",
            AggKind::Max => "max",
            AggKind::Min => "min",
            AggKind::Count => "count",
        }
    }
}

/// `:=` and `=` are interchangeable for function literals; the spelling is
/// kept so formatting reproduces the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssignSpelling {
    ColonEq,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Literal {
    Relational(Atom),
    Condition { lhs: Term, op: CmpOp, rhs: Term },
    Function { target: String, op: ArithOp, lhs: Term, rhs: Term, spelling: AssignSpelling },
    Aggregation { target: String, agg: AggKind, bound: String, over: Atom },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleDecl {
    pub id: String,
    /// False when the id was synthesized as `rule_<ordinal>`.
    pub labeled: bool,
    pub head: Atom,
    pub body: Vec<Literal>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SourceProgram {
    pub decls: Vec<RelationDecl>,
    pub annotations: Vec<Annotation>,
    pub rules: Vec<RuleDecl>,
}
