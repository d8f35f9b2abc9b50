use std::fmt;

use super::{ContractModel, CONSTRUCTOR};
use crate::frontend::{Column, RelationKind};
use crate::value::ColumnType;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionKind {
    Transaction,
    View,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSignature {
    pub name: String,
    /// Relation backing the function.
    pub relation: String,
    pub kind: FunctionKind,
    pub params: Vec<Column>,
    pub results: Vec<Column>,
}

impl fmt::Display for FunctionSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |cols: &[Column]| cols.iter().map(|c| format!("{}: {}", c.name, c.ty)).collect::<Vec<_>>().join(", ");
        write!(f, "{}({}) -> ({})", self.name, list(&self.params), list(&self.results))
    }
}

/// External entry points: one per transaction relation (the constructor
/// excluded) in declaration order, then one per public view in annotation
/// order.
pub fn public_interface(model: &ContractModel) -> Vec<FunctionSignature> {
    let mut out = Vec::new();
    for tx in model.transactions() {
        if tx.interface_name() == CONSTRUCTOR {
            continue;
        }
        out.push(FunctionSignature {
            name: tx.interface_name().to_string(),
            relation: tx.name.clone(),
            kind: FunctionKind::Transaction,
            params: tx.schema.clone(),
            results: vec![Column { name: "success".into(), ty: ColumnType::Bool }],
        });
    }
    for name in &model.public_views {
        let Some(d) = model.relation(name) else { continue };
        let (params, mut results): (Vec<Column>, Vec<Column>) = if d.kind == RelationKind::Singleton {
            (vec![], d.schema.clone())
        } else {
            let keys = d.primary_keys.iter().map(|&k| d.schema[k].clone()).collect();
            let rest = d.non_key_columns().into_iter().map(|k| d.schema[k].clone()).collect();
            (keys, rest)
        };
        if results.is_empty() {
            results.push(Column { name: "exists".into(), ty: ColumnType::Bool });
        }
        out.push(FunctionSignature { name: name.clone(), relation: name.clone(), kind: FunctionKind::View, params, results });
    }
    out
}
