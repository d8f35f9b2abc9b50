//! Solidity source generation.
//!
//! Each stored relation becomes a keyed mapping of records carrying a
//! `valid` flag; each update function becomes an internal function whose
//! body mirrors the lowered statement nest; transactions become external
//! functions that run their rules, apply the derived events and check the
//! violation relations before returning.

mod solidity;

use std::path::Path;

use thiserror::Error;

use crate::analysis::FunctionSignature;
use crate::ir::CompiledContract;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmitOptions {
    /// Revert when a violation relation is nonempty at the end of a
    /// transaction.
    pub instrument_violations: bool,
    /// Emit an event for every rule read and write.
    pub emit_provenance_events: bool,
    pub pragma: String,
    pub contract_name: String,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions {
            instrument_violations: true,
            emit_provenance_events: false,
            pragma: "^0.8.0".into(),
            contract_name: "Contract".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolidityArtifact {
    pub source: String,
    pub interface: Vec<FunctionSignature>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmitError {
    #[error("`{0}` is not a valid contract name")]
    InvalidContractName(String),
    #[error("unsupported: {0}")]
    UnsupportedFeature(String),
}

pub fn emit(contract: &CompiledContract, options: &EmitOptions) -> Result<SolidityArtifact, EmitError> {
    solidity::emit(contract, options)
}

#[derive(Debug, Error)]
pub enum GoldenError {
    #[error("golden file {path} does not exist")]
    Missing { path: String },
    #[error("cannot read golden file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("output differs from {path} at line {line}:\n{diff}")]
    Mismatch { path: String, line: usize, diff: String },
}

/// Byte-exact comparison against a stored file, reporting a unified diff.
pub fn golden_compare(actual: &str, golden: &Path) -> Result<(), GoldenError> {
    let path = golden.display().to_string();
    let expected = match std::fs::read_to_string(golden) {
        Ok(s) => s,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(GoldenError::Missing { path }),
        Err(source) => return Err(GoldenError::Io { path, source }),
    };
    if expected == actual {
        return Ok(());
    }
    let line = expected.lines().zip(actual.lines()).position(|(a, b)| a != b).unwrap_or_else(|| {
        expected.lines().count().min(actual.lines().count())
    }) + 1;
    let diff = similar::TextDiff::from_lines(expected.as_str(), actual)
        .unified_diff()
        .context_radius(3)
        .header(&path, "actual")
        .to_string();
    Err(GoldenError::Mismatch { path, line, diff })
}
