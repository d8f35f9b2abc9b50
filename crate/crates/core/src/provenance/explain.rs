use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::json;
use thiserror::Error;

use super::log::{ProvKind, ProvenanceLog};
use crate::analysis::ContractModel;
use crate::frontend::RelationKind;
use crate::runtime::Fact;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProvenanceError {
    #[error("{0} was never derived")]
    TupleNeverDerived(Fact),
    #[error("invalid tuple `{text}`: {reason}")]
    BadTupleSpec { text: String, reason: String },
}

/// A tuple and, unless it is a leaf, the firing that last wrote it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProvTree {
    pub fact: Fact,
    pub derivation: Option<Derivation>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    pub rule: String,
    pub firing: u64,
    /// Seq of the write event.
    pub seq: u64,
    pub children: Vec<ProvTree>,
}

impl ProvTree {
    pub fn is_leaf(&self) -> bool {
        self.derivation.is_none()
    }

    /// Rule ids in preorder.
    pub fn rules(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |t| {
            if let Some(d) = &t.derivation {
                out.push(d.rule.as_str());
            }
        });
        out
    }

    /// Every tuple in the tree, preorder.
    pub fn facts(&self) -> Vec<&Fact> {
        let mut out = Vec::new();
        self.walk(&mut |t| out.push(&t.fact));
        out
    }

    fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a ProvTree)) {
        f(self);
        for c in self.derivation.iter().flat_map(|d| &d.children) {
            c.walk(f);
        }
    }

    pub fn child(&self, fact: &Fact) -> Option<&ProvTree> {
        self.derivation.as_ref()?.children.iter().find(|c| &c.fact == fact)
    }
}

struct Index<'l> {
    log: &'l ProvenanceLog,
    /// Write seqs per fact, ascending.
    writes: BTreeMap<&'l Fact, Vec<usize>>,
    /// Read event positions per firing.
    reads: BTreeMap<u64, Vec<usize>>,
}

impl<'l> Index<'l> {
    fn new(log: &'l ProvenanceLog) -> Self {
        let mut writes: BTreeMap<&Fact, Vec<usize>> = BTreeMap::new();
        let mut reads: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, e) in log.events.iter().enumerate() {
            match e.kind {
                ProvKind::Write => writes.entry(&e.fact).or_default().push(i),
                ProvKind::Read => reads.entry(e.firing).or_default().push(i),
                ProvKind::Delete => {}
            }
        }
        Index { log, writes, reads }
    }

    /// The latest write of `fact` before event position `before`.
    fn latest_write(&self, fact: &Fact, before: usize) -> Option<usize> {
        self.writes.get(fact)?.iter().rev().copied().find(|&i| i < before)
    }

    fn tree(&self, fact: &Fact, before: usize) -> ProvTree {
        let Some(w) = self.latest_write(fact, before) else {
            return ProvTree { fact: fact.clone(), derivation: None };
        };
        let write = &self.log.events[w];
        let children = self
            .reads
            .get(&write.firing)
            .into_iter()
            .flatten()
            .map(|&r| self.tree(&self.log.events[r].fact, r))
            .collect();
        let derivation = Derivation { rule: write.rule.clone(), firing: write.firing, seq: write.seq, children };
        ProvTree { fact: fact.clone(), derivation: Some(derivation) }
    }
}

/// Derivation tree of the latest write of `fact`. Each read tuple expands
/// through the latest write preceding that read; tuples never written
/// (transaction tuples, reserved bindings) are leaves.
pub fn explain(log: &ProvenanceLog, fact: &Fact) -> Result<ProvTree, ProvenanceError> {
    let index = Index::new(log);
    if index.writes.contains_key(fact) {
        return Ok(index.tree(fact, usize::MAX));
    }
    if log.events.iter().any(|e| &e.fact == fact) {
        return Ok(ProvTree { fact: fact.clone(), derivation: None });
    }
    Err(ProvenanceError::TupleNeverDerived(fact.clone()))
}

/// Parses `relation(v1,v2,...)`, typing values by the relation's schema.
pub fn parse_fact(model: &ContractModel, text: &str) -> Result<Fact, ProvenanceError> {
    let bad = |reason: &str| ProvenanceError::BadTupleSpec { text: text.to_string(), reason: reason.to_string() };
    let t = text.trim();
    let open = t.find('(').ok_or_else(|| bad("expected `relation(values)`"))?;
    let inner = t[open + 1..].strip_suffix(')').ok_or_else(|| bad("missing `)`"))?;
    let name = t[..open].trim();
    let decl = model.relation(name).ok_or_else(|| bad("unknown relation"))?;
    let parts: Vec<&str> = if inner.trim().is_empty() { Vec::new() } else { inner.split(',').collect() };
    if parts.len() != decl.arity() {
        return Err(bad(&format!("{name} has {} columns", decl.arity())));
    }
    let values = parts
        .iter()
        .zip(&decl.schema)
        .map(|(p, c)| Value::parse_typed(c.ty, p.trim()).map_err(|e| bad(&e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let name = if decl.kind == RelationKind::Transaction { decl.name.clone() } else { name.to_string() };
    Ok(Fact::new(name, values))
}

pub fn render_text(tree: &ProvTree) -> String {
    fn go(t: &ProvTree, depth: usize, out: &mut String) {
        let _ = writeln!(out, "{:indent$}{}", "", t.fact, indent = depth * 4);
        if let Some(d) = &t.derivation {
            let _ = writeln!(out, "{:indent$}<- {}", "", d.rule, indent = depth * 4 + 2);
            for c in &d.children {
                go(c, depth + 1, out);
            }
        }
    }
    let mut out = String::new();
    go(tree, 0, &mut out);
    out
}

pub fn render_json(tree: &ProvTree) -> serde_json::Value {
    let mut v = json!({ "tuple": tree.fact.to_json() });
    if let Some(d) = &tree.derivation {
        v["rule"] = json!(d.rule);
        v["seq"] = json!(d.seq);
        v["children"] = d.children.iter().map(render_json).collect();
    }
    v
}

/// Graphviz rendering: tuples as boxes, rule firings as ellipses, edges in
/// the direction data flows. Nodes are numbered in preorder.
pub fn render_dot(tree: &ProvTree) -> String {
    fn quote(s: &str) -> String {
        format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
    }
    fn go(t: &ProvTree, next: &mut usize, nodes: &mut String, edges: &mut String) -> usize {
        let id = *next;
        *next += 1;
        let _ = writeln!(nodes, "  n{id} [shape=box, label={}];", quote(&t.fact.to_string()));
        if let Some(d) = &t.derivation {
            let rid = *next;
            *next += 1;
            let _ = writeln!(nodes, "  n{rid} [shape=ellipse, label={}];", quote(&d.rule));
            let _ = writeln!(edges, "  n{rid} -> n{id};");
            for c in &d.children {
                let cid = go(c, next, nodes, edges);
                let _ = writeln!(edges, "  n{cid} -> n{rid};");
            }
        }
        id
    }
    let (mut nodes, mut edges, mut next) = (String::new(), String::new(), 0);
    go(tree, &mut next, &mut nodes, &mut edges);
    format!("digraph provenance {{\n  rankdir=BT;\n{nodes}{edges}}}\n")
}
