//! Which body literals can be evaluated given a set of bound variables, and
//! what they bind.

use std::collections::BTreeSet;

use super::{BodyLit, Operand};
use crate::value::CmpOp;

pub type Bound = BTreeSet<String>;

fn operand_bound(op: &Operand, bound: &Bound) -> bool {
    match op {
        Operand::Var(v) => bound.contains(v),
        Operand::Const(_) => true,
    }
}

/// Whether `lit` can run once the variables in `bound` are known.
pub fn placeable(lit: &BodyLit, bound: &Bound) -> bool {
    match lit {
        BodyLit::Rel(_) => true,
        BodyLit::Cond { lhs, op, rhs } => {
            let (l, r) = (operand_bound(lhs, bound), operand_bound(rhs, bound));
            (l && r) || (*op == CmpOp::Eq && (l || r))
        }
        BodyLit::Func { lhs, rhs, .. } => operand_bound(lhs, bound) && operand_bound(rhs, bound),
        BodyLit::Agg { group_keys, free_keys, .. } => {
            group_keys.iter().all(|k| free_keys.contains(k) || bound.contains(k))
        }
    }
}

/// Variables that become bound by running `lit` (assumes it is placeable).
pub fn binds(lit: &BodyLit, bound: &Bound) -> Vec<String> {
    let mut out: Vec<String> = match lit {
        BodyLit::Rel(atom) => atom.vars().map(str::to_string).collect(),
        BodyLit::Cond { lhs, rhs, .. } => [lhs, rhs].into_iter().filter_map(Operand::var).map(str::to_string).collect(),
        BodyLit::Func { target, .. } => vec![target.clone()],
        BodyLit::Agg { target, free_keys, .. } => {
            let mut v = vec![target.clone()];
            v.extend(free_keys.iter().cloned());
            v
        }
    };
    out.retain(|v| !bound.contains(v));
    out.dedup();
    out
}

/// Greedily places literals in source order until nothing more fits.
/// Returns the final bound set and the indices left unplaced.
pub fn closure(lits: &[&BodyLit], seed: Bound) -> (Bound, Vec<usize>) {
    let mut bound = seed;
    let mut placed = vec![false; lits.len()];
    loop {
        let next = (0..lits.len()).find(|&i| !placed[i] && placeable(lits[i], &bound));
        let Some(i) = next else { break };
        placed[i] = true;
        for v in binds(lits[i], &bound) {
            bound.insert(v);
        }
    }
    let rest = (0..lits.len()).filter(|&i| !placed[i]).collect();
    (bound, rest)
}
