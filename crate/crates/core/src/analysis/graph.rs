use std::collections::{BTreeMap, BTreeSet};

use super::{BodyLit, Rule, RuleKind};

/// `to` depends on `from`: a change to `from` may change `to`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DependencyEdge {
    pub from: String,
    pub to: String,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DependencyGraph {
    pub edges: Vec<DependencyEdge>,
}

impl DependencyGraph {
    /// View rules depend on every relation they read; transaction rules only
    /// on their transaction relation.
    pub fn build(rules: &[Rule]) -> Self {
        let mut edges = Vec::new();
        let mut seen = BTreeSet::new();
        for rule in rules {
            let froms: Vec<&str> = match rule.kind {
                RuleKind::Transaction { literal } => rule.body[literal].relation().into_iter().collect(),
                RuleKind::View => rule.body.iter().filter_map(BodyLit::relation).collect(),
            };
            for from in froms {
                if seen.insert((from.to_string(), rule.head.relation.clone(), rule.id.clone())) {
                    edges.push(DependencyEdge { from: from.into(), to: rule.head.relation.clone(), rule: rule.id.clone() });
                }
            }
        }
        DependencyGraph { edges }
    }

    pub fn successors<'a>(&'a self, from: &'a str) -> impl Iterator<Item = &'a DependencyEdge> + 'a {
        self.edges.iter().filter(move |e| e.from == from)
    }

    pub fn edge_rule(&self, from: &str, to: &str) -> Option<String> {
        self.edges.iter().find(|e| e.from == from && e.to == to).map(|e| e.rule.clone())
    }

    /// Whether `to` is reachable from `from` along one or more edges.
    pub fn reaches(&self, from: &str, to: &str) -> bool {
        let mut stack = vec![from];
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            for e in self.successors(n) {
                if e.to == to {
                    return true;
                }
                if seen.insert(e.to.as_str()) {
                    stack.push(&e.to);
                }
            }
        }
        false
    }

    /// Kahn's algorithm, always taking the earliest ready node in `nodes`
    /// order. On a cycle, returns one cycle as a closed path `[a, b, a]`.
    pub fn topological_order(&self, nodes: &[&str]) -> Result<Vec<String>, Vec<String>> {
        let mut indegree: BTreeMap<&str, usize> = nodes.iter().map(|n| (*n, 0)).collect();
        let mut distinct = BTreeSet::new();
        for e in &self.edges {
            if distinct.insert((e.from.as_str(), e.to.as_str())) {
                *indegree.entry(e.to.as_str()).or_default() += 1;
            }
        }
        let mut order = Vec::new();
        let mut done = BTreeSet::new();
        while order.len() < nodes.len() {
            let Some(&next) = nodes.iter().find(|n| !done.contains(**n) && indegree[**n] == 0) else {
                return Err(self.find_cycle(nodes, &done));
            };
            done.insert(next);
            order.push(next.to_string());
            let targets: BTreeSet<&str> = self.successors(next).map(|e| e.to.as_str()).collect();
            for t in targets {
                *indegree.get_mut(t).unwrap() -= 1;
            }
        }
        Ok(order)
    }

    fn find_cycle(&self, nodes: &[&str], done: &BTreeSet<&str>) -> Vec<String> {
        let start = nodes.iter().find(|n| !done.contains(**n)).copied().unwrap_or_default();
        // Every remaining node has a remaining predecessor; walking backwards
        // must revisit a node.
        let mut path = vec![start];
        loop {
            let cur = *path.last().unwrap();
            let pred = self
                .edges
                .iter()
                .find(|e| e.to == cur && !done.contains(e.from.as_str()))
                .map(|e| e.from.as_str())
                .unwrap_or(cur);
            if let Some(pos) = path.iter().position(|p| *p == pred) {
                let mut cycle: Vec<String> = path[pos..].iter().rev().map(|s| s.to_string()).collect();
                let rank = |n: &String| nodes.iter().position(|m| m == n).unwrap_or(usize::MAX);
                let first = (0..cycle.len()).min_by_key(|&i| rank(&cycle[i])).unwrap_or(0);
                cycle.rotate_left(first);
                cycle.push(cycle[0].clone());
                return cycle;
            }
            path.push(pred);
        }
    }
}
