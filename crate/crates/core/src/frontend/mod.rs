//! Lexing, parsing and pretty-printing of `.dcn` contract sources.
//!
//! ```
//! let src = ".decl *owner(p: address)\n.decl recv_constructor(p: address)\n\
//!            owner(p) :- recv_constructor(p).";
//! let program = decon::frontend::parse(src).unwrap();
//! assert_eq!(program.rules[0].id, "rule_1");
//! let again = decon::frontend::parse(&decon::frontend::format_program(&program)).unwrap();
//! assert_eq!(program, again);
//! ```

pub mod ast;
mod format;
mod lexer;
mod parser;

use std::fmt;

use thiserror::Error;

pub use ast::*;
pub use format::{format_atom, format_literal, format_program, format_rule, format_term};
pub use parser::parse;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("expected {}, found {found}", join_expected(.expected))]
    Syntax { expected: Vec<String>, found: String },
    #[error("relation `{0}` is declared more than once")]
    DuplicateRelation(String),
    #[error("rule id `{0}` is used more than once")]
    DuplicateRule(String),
    #[error("malformed primary-key bracket: {0}")]
    MalformedPrimaryKey(String),
    #[error("invalid declaration: {0}")]
    InvalidDeclaration(String),
    #[error("integer literal `{0}` does not fit in 256 bits")]
    LiteralOutOfRange(String),
}

fn join_expected(expected: &[String]) -> String {
    match expected {
        [] => "something else".to_string(),
        [one] => one.clone(),
        _ => format!("one of {}", expected.join(", ")),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub fn new(line: usize, column: usize, expected: Vec<String>, found: impl Into<String>) -> Self {
        ParseError { line, column, kind: ParseErrorKind::Syntax { expected, found: found.into() } }
    }

    pub fn at(line: usize, column: usize, kind: ParseErrorKind) -> Self {
        ParseError { line, column, kind }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.kind)
    }
}
