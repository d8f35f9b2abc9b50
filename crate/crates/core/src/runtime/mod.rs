//! Executes compiled contracts: transactions insert event tuples, and every
//! stored relation is maintained incrementally through the update
//! functions. A transaction that trips a violation or an arithmetic fault
//! is rolled back.

mod eval;
mod exec;
mod naive;
mod script;
mod store;

pub use eval::Reserved;
pub use exec::{
    CommittedTx, ContractState, Deployment, ExecError, ExecOptions, ExecStats, Executor, InstantiateError, Outcome,
    QueryError, Receipt, RevertReason, TransactionRequest,
};
pub use naive::{naive_evaluate, oracle_mismatch, Database, NaiveOracle};
pub use script::{parse_script, run_script, RunSettings, ScriptError, ScriptRun, ScriptTx, TransactionScript, ViewExpectation};
pub use store::{AggState, Fact, Row, Store, Table, Tuple};

#[cfg(test)]
mod tests;
