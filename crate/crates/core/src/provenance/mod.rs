//! Records which stored tuples each rule firing read and wrote, and turns
//! that record into derivation trees.

mod explain;
mod log;

pub use explain::{explain, parse_fact, render_dot, render_json, render_text, Derivation, ProvTree, ProvenanceError};
pub use log::{ProvEvent, ProvKind, ProvenanceLog};

use crate::ir::CompiledContract;

/// A copy of `contract` whose executions record provenance.
pub fn record_mode(contract: &CompiledContract) -> CompiledContract {
    CompiledContract { record_provenance: true, ..contract.clone() }
}

#[cfg(test)]
mod tests;
