//! JSON transaction scripts: a deployment, a list of requests, and
//! optional expectations on outcomes and public views.

use ethnum::U256;
use serde::Deserialize;
use serde_json::Value as Json;
use thiserror::Error;

use super::exec::{Deployment, ExecError, ExecOptions, Executor, InstantiateError, Receipt, TransactionRequest};
use super::naive::NaiveOracle;
use super::store::Tuple;
use crate::analysis::ContractModel;
use crate::frontend::RelationDecl;
use crate::ir::CompiledContract;
use crate::value::{Address, ColumnType, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewExpectation {
    pub relation: String,
    pub keys: Tuple,
    /// Non-key values of the row, or `None` when it must be absent.
    pub equals: Option<Tuple>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptTx {
    pub request: TransactionRequest,
    /// `committed`, `rejected` or `reverted`.
    pub expect: Option<String>,
    pub views: Vec<ViewExpectation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TransactionScript {
    pub constructor: Deployment,
    pub txs: Vec<ScriptTx>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScriptError {
    #[error("script: {0}")]
    Parse(String),
    #[error(transparent)]
    Instantiate(#[from] InstantiateError),
    #[error("transaction {index}: {source}")]
    Request { index: usize, source: ExecError },
    #[error("transaction {index}: expectation failed: {detail}")]
    ExpectationFailed { index: usize, detail: String },
    #[error("transaction {index}: incremental state diverges from the reference: {detail}")]
    OracleDivergence { index: usize, detail: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCtor {
    #[serde(default)]
    args: Vec<Json>,
    sender: Option<String>,
    value: Option<Json>,
    timestamp: Option<Json>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawView {
    relation: String,
    #[serde(default)]
    keys: Vec<Json>,
    equals: Option<Vec<Json>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTx {
    name: String,
    #[serde(default)]
    args: Vec<Json>,
    sender: Option<String>,
    value: Option<Json>,
    timestamp: Option<Json>,
    expect: Option<String>,
    #[serde(default)]
    views: Vec<RawView>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScript {
    constructor: Option<RawCtor>,
    #[serde(default)]
    txs: Vec<RawTx>,
}

fn err(msg: impl Into<String>) -> ScriptError {
    ScriptError::Parse(msg.into())
}

fn typed(ty: ColumnType, v: &Json, what: &str) -> Result<Value, ScriptError> {
    Value::from_json(ty, v).map_err(|e| err(format!("{what}: {e}")))
}

fn uint(v: &Option<Json>, what: &str) -> Result<U256, ScriptError> {
    match v {
        None => Ok(U256::ZERO),
        Some(j) => match typed(ColumnType::Uint, j, what)? {
            Value::Uint(u) => Ok(u),
            _ => unreachable!("uint literal"),
        },
    }
}

fn address(v: &Option<String>, what: &str) -> Result<Address, ScriptError> {
    match v {
        None => Ok(Address::ZERO),
        Some(s) => s.parse().map_err(|_| err(format!("{what}: invalid address `{s}`"))),
    }
}

fn args(decl: &RelationDecl, raw: &[Json], what: &str) -> Result<Tuple, ScriptError> {
    if raw.len() != decl.arity() {
        return Err(err(format!("{what}: `{}` takes {} arguments, got {}", decl.interface_name(), decl.arity(), raw.len())));
    }
    raw.iter().zip(&decl.schema).map(|(v, c)| typed(c.ty, v, what)).collect()
}

/// Parses a script, typing every value by the contract's schemas.
pub fn parse_script(model: &ContractModel, text: &str) -> Result<TransactionScript, ScriptError> {
    let raw: RawScript = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
    let mut script = TransactionScript::default();
    if let Some(c) = raw.constructor {
        script.constructor = Deployment {
            args: match model.constructor() {
                Some(d) => args(d, &c.args, "constructor")?,
                None if c.args.is_empty() => Vec::new(),
                None => return Err(err("constructor: the contract declares no constructor")),
            },
            sender: address(&c.sender, "constructor sender")?,
            value: uint(&c.value, "constructor value")?,
            timestamp: uint(&c.timestamp, "constructor timestamp")?,
        };
    }
    for (i, t) in raw.txs.iter().enumerate() {
        let what = format!("transaction {i}");
        let decl = model.transaction(&t.name).ok_or_else(|| err(format!("{what}: unknown transaction `{}`", t.name)))?;
        if let Some(e) = &t.expect {
            if !matches!(e.as_str(), "committed" | "rejected" | "reverted") {
                return Err(err(format!("{what}: unknown expectation `{e}`")));
            }
        }
        let mut views = Vec::new();
        for v in &t.views {
            let d = model.relation(&v.relation).ok_or_else(|| err(format!("{what}: unknown relation `{}`", v.relation)))?;
            let key_types: Vec<ColumnType> = if d.kind == crate::frontend::RelationKind::Singleton {
                Vec::new()
            } else {
                d.primary_keys.iter().map(|&k| d.schema[k].ty).collect()
            };
            let value_types: Vec<ColumnType> = d.non_key_columns().into_iter().map(|c| d.schema[c].ty).collect();
            if v.keys.len() != key_types.len() {
                return Err(err(format!("{what}: `{}` is keyed by {} columns", v.relation, key_types.len())));
            }
            let keys = v.keys.iter().zip(&key_types).map(|(j, ty)| typed(*ty, j, &what)).collect::<Result<_, _>>()?;
            let equals = match &v.equals {
                None => None,
                Some(vals) => {
                    if vals.len() != value_types.len() {
                        return Err(err(format!("{what}: `{}` has {} non-key columns", v.relation, value_types.len())));
                    }
                    Some(vals.iter().zip(&value_types).map(|(j, ty)| typed(*ty, j, &what)).collect::<Result<_, _>>()?)
                }
            };
            views.push(ViewExpectation { relation: v.relation.clone(), keys, equals });
        }
        let request = TransactionRequest {
            name: decl.name.clone(),
            args: args(decl, &t.args, &what)?,
            sender: address(&t.sender, &what)?,
            value: uint(&t.value, &what)?,
            timestamp: uint(&t.timestamp, &what)?,
        };
        script.txs.push(ScriptTx { request, expect: t.expect.clone(), views });
    }
    Ok(script)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunSettings {
    pub options: ExecOptions,
    /// Compare against the reference evaluator after every commit.
    pub oracle_check: bool,
}

#[derive(Debug, Clone)]
pub struct ScriptRun {
    pub executor: Executor,
    pub receipts: Vec<Receipt>,
    /// Unmet expectations; the run continues past them.
    pub failures: Vec<ScriptError>,
}

impl ScriptRun {
    pub fn receipts_json_lines(&self) -> String {
        self.receipts.iter().map(|r| format!("{}\n", r.to_json())).collect()
    }

    /// The first unmet expectation, if any.
    pub fn check(&self) -> Result<(), ScriptError> {
        self.failures.first().map_or(Ok(()), |f| Err(f.clone()))
    }
}

/// Deploys the contract and runs every transaction in order.
pub fn run_script(contract: &CompiledContract, script: &TransactionScript, settings: RunSettings) -> Result<ScriptRun, ScriptError> {
    let mut executor = Executor::instantiate(contract, script.constructor.clone(), settings.options)?;
    let mut receipts = Vec::new();
    let mut failures = Vec::new();
    let mut oracle = NaiveOracle::new(&contract.model);
    for tx in &script.txs {
        let index = executor.state().executed;
        let receipt = executor.execute(&tx.request).map_err(|source| ScriptError::Request { index, source })?;
        if settings.oracle_check && receipt.outcome.is_committed() {
            let detail = match oracle.check(&executor) {
                Ok(d) => d,
                Err(f) => Some(format!("reference evaluation faulted: {f}")),
            };
            if let Some(detail) = detail {
                return Err(ScriptError::OracleDivergence { index, detail });
            }
        }
        if let Some(e) = &tx.expect {
            if receipt.outcome.name() != e {
                let detail = format!("expected {e}, got {}", receipt.outcome.name());
                failures.push(ScriptError::ExpectationFailed { index, detail });
            }
        }
        for v in &tx.views {
            let detail = match executor.query_view(&v.relation, &v.keys) {
                Err(e) => Some(e.to_string()),
                Ok(got) if got != v.equals => Some(format!(
                    "{}{:?}: expected {}, got {}",
                    v.relation,
                    v.keys,
                    show(&v.equals),
                    show(&got)
                )),
                Ok(_) => None,
            };
            if let Some(detail) = detail {
                failures.push(ScriptError::ExpectationFailed { index, detail });
            }
        }
        receipts.push(receipt);
    }
    Ok(ScriptRun { executor, receipts, failures })
}

fn show(v: &Option<Tuple>) -> String {
    match v {
        None => "absent".into(),
        Some(t) => format!("{t:?}"),
    }
}
