//! Contract storage: keyed tables, join indexes and aggregation caches,
//! kept consistent by a single insert/delete path.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use ethnum::U256;

use crate::frontend::{RelationDecl, RelationKind};
use crate::ir::{AggCacheKind, AggCacheSpec, CompiledContract};
use crate::value::{arith, ArithFault, ArithOp, Value};

pub type Tuple = Vec<Value>;

/// A tuple of a named relation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fact {
    pub relation: String,
    pub values: Tuple,
}

impl Fact {
    pub fn new(relation: impl Into<String>, values: Tuple) -> Self {
        Fact { relation: relation.into(), values }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "relation": self.relation,
            "values": self.values.iter().map(Value::to_json).collect::<Vec<_>>(),
        })
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vals: Vec<String> = self.values.iter().map(Value::to_string).collect();
        write!(f, "{}({})", self.relation, vals.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub values: Tuple,
    /// Inserted directly by a transaction rule; such rows never need a
    /// supporting derivation.
    pub event: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    /// Key columns; empty for a singleton, every column for a set relation.
    pub keys: Vec<usize>,
    pub rows: BTreeMap<Tuple, Row>,
}

impl Table {
    pub fn for_decl(decl: &RelationDecl) -> Self {
        let keys = match decl.kind {
            RelationKind::Singleton => Vec::new(),
            _ => decl.primary_keys.clone(),
        };
        Table { keys, rows: BTreeMap::new() }
    }

    pub fn key_of(&self, tuple: &[Value]) -> Tuple {
        self.keys.iter().map(|&k| tuple[k]).collect()
    }

    pub fn get(&self, tuple: &[Value]) -> Option<&Row> {
        self.rows.get(&self.key_of(tuple))
    }

    pub fn contains(&self, tuple: &[Value]) -> bool {
        self.get(tuple).is_some_and(|r| r.values == tuple)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn tuples(&self) -> impl Iterator<Item = &Tuple> {
        self.rows.values().map(|r| &r.values)
    }
}

/// Running state of one aggregation group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AggState {
    Sum { total: Value, rows: usize },
    Count(usize),
    /// Value multiset with multiplicities.
    Ordered(BTreeMap<Value, usize>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinIndex {
    pub constrained: Vec<usize>,
    /// Constrained key values to the full keys of matching rows.
    pub entries: BTreeMap<Tuple, BTreeSet<Tuple>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggCache {
    pub spec: AggCacheSpec,
    pub groups: BTreeMap<Tuple, AggState>,
}

/// Everything a transaction may change. Cloned for rollback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Store {
    pub tables: BTreeMap<String, Table>,
    pub indexes: BTreeMap<String, Vec<JoinIndex>>,
    pub caches: Vec<AggCache>,
    /// Ether held by the contract.
    pub balance: U256,
}

impl Store {
    pub fn new(contract: &CompiledContract) -> Self {
        let model = &contract.model;
        let tables = contract
            .materialized()
            .iter()
            .filter_map(|name| model.relation(name).map(|d| (name.clone(), Table::for_decl(d))))
            .collect();
        let mut indexes: BTreeMap<String, Vec<JoinIndex>> = BTreeMap::new();
        for spec in &contract.join_indexes {
            indexes
                .entry(spec.relation.clone())
                .or_default()
                .push(JoinIndex { constrained: spec.constrained.clone(), entries: BTreeMap::new() });
        }
        let caches = contract.agg_caches.iter().map(|s| AggCache { spec: s.clone(), groups: BTreeMap::new() }).collect();
        Store { tables, indexes, caches, balance: U256::ZERO }
    }

    pub fn table(&self, relation: &str) -> Option<&Table> {
        self.tables.get(relation)
    }

    pub fn is_stored(&self, relation: &str) -> bool {
        self.tables.contains_key(relation)
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.table(&fact.relation).is_some_and(|t| t.contains(&fact.values))
    }

    pub fn index(&self, relation: &str, constrained: &[usize]) -> Option<&JoinIndex> {
        self.indexes.get(relation)?.iter().find(|i| i.constrained == constrained)
    }

    /// Stored tuples per relation, without event flags.
    pub fn snapshot(&self) -> BTreeMap<String, BTreeSet<Tuple>> {
        self.tables.iter().map(|(n, t)| (n.clone(), t.tuples().cloned().collect())).collect()
    }

    /// Sets the event flag of an identical stored row.
    pub fn mark_event(&mut self, relation: &str, tuple: &[Value]) {
        if let Some(t) = self.tables.get_mut(relation) {
            let key = t.key_of(tuple);
            if let Some(row) = t.rows.get_mut(&key) {
                row.event = true;
            }
        }
    }

    /// Adds a row whose key is free. The caller resolves key conflicts.
    pub fn insert(&mut self, relation: &str, tuple: Tuple, event: bool) -> Result<(), ArithFault> {
        let Some(table) = self.tables.get_mut(relation) else { return Ok(()) };
        let key = table.key_of(&tuple);
        debug_assert!(!table.rows.contains_key(&key), "key conflict on {relation}");
        for c in self.caches.iter_mut().filter(|c| c.spec.relation == relation) {
            c.add(&tuple)?;
        }
        for idx in self.indexes.get_mut(relation).into_iter().flatten() {
            let part: Tuple = idx.constrained.iter().map(|&k| tuple[k]).collect();
            idx.entries.entry(part).or_default().insert(key.clone());
        }
        table.rows.insert(key, Row { values: tuple, event });
        Ok(())
    }

    /// Removes the row with the key of `tuple`, returning it.
    pub fn remove(&mut self, relation: &str, tuple: &[Value]) -> Result<Option<Row>, ArithFault> {
        let Some(table) = self.tables.get_mut(relation) else { return Ok(None) };
        let key = table.key_of(tuple);
        let Some(row) = table.rows.remove(&key) else { return Ok(None) };
        for c in self.caches.iter_mut().filter(|c| c.spec.relation == relation) {
            c.remove(&row.values)?;
        }
        for idx in self.indexes.get_mut(relation).into_iter().flatten() {
            let part: Tuple = idx.constrained.iter().map(|&k| row.values[k]).collect();
            if let Some(set) = idx.entries.get_mut(&part) {
                set.remove(&key);
                if set.is_empty() {
                    idx.entries.remove(&part);
                }
            }
        }
        Ok(Some(row))
    }
}

impl AggCache {
    fn group(&self, tuple: &[Value]) -> Tuple {
        self.spec.group_cols.iter().map(|&c| tuple[c]).collect()
    }

    fn add(&mut self, tuple: &[Value]) -> Result<(), ArithFault> {
        let group = self.group(tuple);
        let value = self.spec.value_col.map(|c| tuple[c]);
        match self.spec.kind {
            AggCacheKind::Sum => {
                let v = value.expect("sum cache has a value column");
                match self.groups.get_mut(&group) {
                    Some(AggState::Sum { total, rows }) => {
                        *total = arith(ArithOp::Add, *total, v)?;
                        *rows += 1;
                    }
                    _ => {
                        self.groups.insert(group, AggState::Sum { total: v, rows: 1 });
                    }
                }
            }
            AggCacheKind::Count => match self.groups.entry(group).or_insert(AggState::Count(0)) {
                AggState::Count(n) => *n += 1,
                _ => unreachable!("count cache state"),
            },
            AggCacheKind::Ordered => {
                let v = value.expect("ordered cache has a value column");
                match self.groups.entry(group).or_insert_with(|| AggState::Ordered(BTreeMap::new())) {
                    AggState::Ordered(m) => *m.entry(v).or_insert(0) += 1,
                    _ => unreachable!("ordered cache state"),
                }
            }
        }
        Ok(())
    }

    fn remove(&mut self, tuple: &[Value]) -> Result<(), ArithFault> {
        let group = self.group(tuple);
        let value = self.spec.value_col.map(|c| tuple[c]);
        let Some(state) = self.groups.get_mut(&group) else { return Ok(()) };
        let empty = match state {
            AggState::Sum { total, rows } => {
                *total = arith(ArithOp::Sub, *total, value.expect("sum value"))?;
                *rows -= 1;
                *rows == 0
            }
            AggState::Count(n) => {
                *n -= 1;
                *n == 0
            }
            AggState::Ordered(m) => {
                let v = value.expect("ordered value");
                if let Some(c) = m.get_mut(&v) {
                    *c -= 1;
                    if *c == 0 {
                        m.remove(&v);
                    }
                }
                m.is_empty()
            }
        };
        if empty {
            self.groups.remove(&group);
        }
        Ok(())
    }
}
