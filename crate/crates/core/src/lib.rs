//! A compiler and interpreter for declarative smart contracts written in a
//! Datalog dialect.
//!
//! The pipeline runs [`frontend::parse`] into [`analysis::validate`], lowers
//! the model with [`ir::compile`], then either executes transactions with
//! [`runtime::Executor`] or emits Solidity with [`backend::emit`].

pub mod analysis;
pub mod backend;
pub mod frontend;
pub mod ir;
pub mod provenance;
pub mod runtime;
pub mod value;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("{0}")]
    Parse(#[from] frontend::ParseError),
    #[error("{0}")]
    Analysis(#[from] analysis::AnalysisErrors),
    #[error("{0}")]
    Lowering(#[from] ir::IrError),
}

/// Parses, validates and lowers a contract.
///
/// ```
/// let c = decon::compile_source(".decl recv_ping(n: uint)\n.decl ping(n: uint)\nping(n) :- recv_ping(n).").unwrap();
/// assert_eq!(c.functions.len(), 1);
/// ```
pub fn compile_source(src: &str) -> Result<ir::CompiledContract, CompileError> {
    let program = frontend::parse(src)?;
    let model = analysis::validate(&program)?;
    Ok(ir::compile(&model)?)
}
