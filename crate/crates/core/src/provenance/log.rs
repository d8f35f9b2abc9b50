use serde_json::json;

use crate::runtime::Fact;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProvKind {
    Read,
    Write,
    Delete,
}

impl ProvKind {
    pub fn name(self) -> &'static str {
        match self {
            ProvKind::Read => "read",
            ProvKind::Write => "write",
            ProvKind::Delete => "delete",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProvEvent {
    pub seq: u64,
    /// Groups the reads of one rule firing with its write.
    pub firing: u64,
    pub kind: ProvKind,
    pub rule: String,
    pub fact: Fact,
}

impl ProvEvent {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "seq": self.seq,
            "firing": self.firing,
            "kind": self.kind.name(),
            "rule": self.rule,
            "tuple": self.fact.to_json(),
        })
    }
}

/// Append-only record of rule firings. It lives outside contract storage,
/// so reverted transactions leave their events behind.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProvenanceLog {
    pub events: Vec<ProvEvent>,
    next_firing: u64,
}

impl ProvenanceLog {
    fn push(&mut self, firing: u64, kind: ProvKind, rule: &str, fact: Fact) {
        let seq = self.events.len() as u64;
        self.events.push(ProvEvent { seq, firing, kind, rule: rule.to_string(), fact });
    }

    /// One firing of `rule`: its reads, then the write.
    pub fn firing(&mut self, rule: &str, reads: &[Fact], write: Fact) {
        let id = self.next_firing;
        self.next_firing += 1;
        for (i, r) in reads.iter().enumerate() {
            if !reads[..i].contains(r) {
                self.push(id, ProvKind::Read, rule, r.clone());
            }
        }
        self.push(id, ProvKind::Write, rule, write);
    }

    /// Reads of an attempt that derived nothing.
    pub fn reads(&mut self, rule: &str, reads: &[Fact]) {
        let id = self.next_firing;
        self.next_firing += 1;
        for (i, r) in reads.iter().enumerate() {
            if !reads[..i].contains(r) {
                self.push(id, ProvKind::Read, rule, r.clone());
            }
        }
    }

    pub fn delete(&mut self, rule: &str, fact: Fact) {
        let id = self.next_firing;
        self.next_firing += 1;
        self.push(id, ProvKind::Delete, rule, fact);
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn to_json_lines(&self) -> String {
        self.events.iter().map(|e| format!("{}\n", e.to_json())).collect()
    }
}
