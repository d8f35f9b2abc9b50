use crate::analysis::ground::{binds, placeable, Bound};
use crate::analysis::{Arg, BodyLit, ContractModel, Rule};
use crate::frontend::RelationKind;

/// Evaluation order for the body of `rule`, excluding `pinned`, given the
/// variables bound by the seed.
///
/// Greedy: first any condition or function whose inputs are bound (source
/// order), then any aggregation whose keys are bound, then one relational
/// literal chosen by tier: reserved and singleton relations, then point
/// lookups with every primary key bound, then scans.
pub fn order_body(model: &ContractModel, rule: &Rule, pinned: Option<usize>, seed: &Bound) -> Vec<usize> {
    let mut bound = seed.clone();
    let mut remaining: Vec<usize> = (0..rule.body.len()).filter(|i| Some(*i) != pinned).collect();
    let mut out = Vec::new();

    while !remaining.is_empty() {
        let lit = |i: usize| &rule.body[i];
        let pick = remaining
            .iter()
            .copied()
            .find(|&i| matches!(lit(i), BodyLit::Cond { .. } | BodyLit::Func { .. }) && placeable(lit(i), &bound))
            .or_else(|| {
                remaining.iter().copied().find(|&i| matches!(lit(i), BodyLit::Agg { .. }) && placeable(lit(i), &bound))
            })
            .or_else(|| {
                remaining
                    .iter()
                    .copied()
                    .filter(|&i| matches!(lit(i), BodyLit::Rel(_)))
                    .min_by_key(|&i| (relational_tier(model, lit(i), &bound), i))
            });
        // Validation guarantees progress; fall back to source order if an
        // unplaceable literal remains.
        let i = pick.unwrap_or(remaining[0]);
        for v in binds(lit(i), &bound) {
            bound.insert(v);
        }
        remaining.retain(|&j| j != i);
        out.push(i);
    }
    out
}

fn relational_tier(model: &ContractModel, lit: &BodyLit, bound: &Bound) -> u8 {
    let BodyLit::Rel(atom) = lit else { return u8::MAX };
    let Some(decl) = model.relation(&atom.relation) else { return 3 };
    if matches!(decl.kind, RelationKind::Reserved | RelationKind::Singleton) {
        return 1;
    }
    let grounded = |k: usize| match &atom.args[k] {
        Arg::Const(_) => true,
        Arg::Var(v) => bound.contains(v),
        Arg::Wildcard => false,
    };
    if decl.primary_keys.iter().all(|&k| grounded(k)) {
        2
    } else {
        3
    }
}
