//! Randomized invariants over the bundled contracts.

mod common;

use std::collections::BTreeSet;

use common::*;
use decon::frontend::{format_program, parse, AggKind, Literal};
use decon::value::CmpOp;
use decon::runtime::{ExecOptions, Executor, Store};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const STEPS: u64 = 40;

/// Runs `steps` generated transactions of bench `which` from `seed`.
fn run(which: usize, seed: u64, options: ExecOptions) -> (Executor, Vec<String>) {
    let bench = &benches()[which];
    let contract = compile(bench.source);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ex = Executor::instantiate(&contract, (bench.deploy)(&mut rng), options).unwrap();
    let mut outcomes = Vec::new();
    for step in 0..STEPS {
        let req = (bench.next)(&ex, &mut rng, step);
        outcomes.push(ex.execute(&req).unwrap().outcome.name().to_string());
    }
    (ex, outcomes)
}

/// Caches and indexes as they would be if every stored row were inserted
/// into an empty store.
fn rebuilt(ex: &Executor) -> Store {
    let live = &ex.state().store;
    let mut fresh = Store::new(ex.contract());
    for (name, table) in &live.tables {
        for row in table.rows.values() {
            fresh.insert(name, row.values.clone(), row.event).unwrap();
        }
    }
    fresh.balance = live.balance;
    fresh
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn aggregate_caches_match_a_rebuild(which in 0..5usize, seed in any::<u64>()) {
        let (ex, _) = run(which, seed, ExecOptions::default());
        let fresh = rebuilt(&ex);
        prop_assert_eq!(&fresh.caches, &ex.state().store.caches);
        prop_assert_eq!(&fresh.indexes, &ex.state().store.indexes);
    }

    #[test]
    fn tie_break_order_does_not_change_state(which in 0..5usize, seed in any::<u64>()) {
        let (forward, a) = run(which, seed, ExecOptions::default());
        let (reverse, b) = run(which, seed, ExecOptions { reverse_tie_break: true, ..ExecOptions::default() });
        prop_assert_eq!(a, b);
        prop_assert_eq!(forward.state().store.snapshot(), reverse.state().store.snapshot());
        prop_assert_eq!(forward.balance(), reverse.balance());
    }
}

const CORPUS: [&str; 9] = [WALLET, WALLET_BUGGY, WALLET_SUPPLY, ERC20, ERC20_BUGGY, ERC721, ERC721_BUGGY, CROWDSALE, SIMPLE_AUCTION];

#[test]
fn formatting_round_trips() {
    for src in CORPUS {
        let program = parse(src).unwrap();
        let printed = format_program(&program);
        let reparsed = parse(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
        assert_eq!(reparsed, program);
        assert_eq!(format_program(&reparsed), printed);
    }
}

#[test]
fn corpus_covers_every_literal_form() {
    let mut seen = BTreeSet::new();
    for src in [WALLET, ERC20, ERC721, CROWDSALE, SIMPLE_AUCTION] {
        for rule in parse(src).unwrap().rules {
            for lit in &rule.body {
                seen.insert(match lit {
                    Literal::Relational(_) => "relational".to_string(),
                    Literal::Condition { op, .. } => format!("condition {op:?}"),
                    Literal::Function { op, .. } => format!("function {op:?}"),
                    Literal::Aggregation { agg, .. } => format!("aggregation {agg:?}"),
                });
            }
        }
    }
    let mut wanted = vec!["relational".to_string()];
    wanted.extend(
        [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge].iter().map(|o| format!("condition {o:?}")),
    );
    wanted.extend([AggKind::Sum, AggKind::Max, AggKind::Min, AggKind::Count].iter().map(|a| format!("aggregation {a:?}")));
    wanted.extend(["function Add", "function Sub"].map(String::from));
    let missing: Vec<_> = wanted.iter().filter(|w| !seen.contains(*w)).collect();
    assert!(missing.is_empty(), "unused literal forms: {missing:?}");
}
