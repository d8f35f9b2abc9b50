//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Run with `cargo test --test acceptance`.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use decon::backend::{emit, golden_compare, EmitOptions, GoldenError};
use decon::provenance::{explain, record_mode, ProvKind, ProvTree};
use decon::runtime::{ExecOptions, Executor, Fact, NaiveOracle, Outcome, RevertReason, TransactionRequest};
use decon::value::{arith, ArithFault, ArithOp, Value, I256, U256};
use num_bigint::BigInt;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SCRIPTS_PER_CONTRACT: u64 = 200;
const SCRIPT_LEN: u64 = 50;
const ORACLE_BUDGET: Duration = Duration::from_secs(60);
const ATOMICITY_SCRIPTS: u64 = 100;
const COST_SIZES: [u64; 3] = [10, 100, 1000];
const OVERFLOW_CASES: u32 = 4096;

type Outcome_ = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fact(rel: &str, values: Vec<Value>) -> Fact {
    Fact::new(rel, values)
}

fn deploy(src: &str, options: ExecOptions) -> Executor {
    Executor::instantiate(&compile(src), owner_deployment(), options).expect("deploys")
}

fn exec(ex: &mut Executor, name: &str, args: Vec<Value>, sender: u64) -> decon::runtime::Receipt {
    ex.execute(&TransactionRequest::new(name, args).from(addr(sender))).expect("well-formed request")
}

fn children(tree: &ProvTree) -> BTreeSet<Fact> {
    tree.derivation.iter().flat_map(|d| d.children.iter().map(|c| c.fact.clone())).collect()
}

fn rule_of(tree: &ProvTree) -> Option<&str> {
    tree.derivation.as_ref().map(|d| d.rule.as_str())
}

fn oracle_equivalence() -> Outcome_ {
    let start = Instant::now();
    let mut detail = Vec::new();
    for bench in benches() {
        let contract = compile(bench.source);
        let (mut commits, mut txs) = (0u64, 0u64);
        for seed in 0..SCRIPTS_PER_CONTRACT {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ex = Executor::instantiate(&contract, (bench.deploy)(&mut rng), ExecOptions::default())
                .map_err(|e| format!("{}: deploy failed: {e}", bench.name))?;
            let mut oracle = NaiveOracle::new(&contract.model);
            for step in 0..SCRIPT_LEN {
                let req = (bench.next)(&ex, &mut rng, step);
                let r = ex.execute(&req).map_err(|e| format!("{} seed {seed}: {e}", bench.name))?;
                txs += 1;
                if r.outcome.is_committed() {
                    commits += 1;
                    if let Some(d) = oracle.check(&ex).map_err(|f| format!("reference faulted: {f}"))? {
                        return Err(format!("{} seed {seed} step {step} ({}): {d}", bench.name, req.name));
                    }
                }
            }
        }
        ensure(commits * 5 >= txs, || format!("{}: only {commits} of {txs} transactions committed", bench.name))?;
        detail.push(format!("{} {commits}/{txs}", bench.name));
    }
    let elapsed = start.elapsed();
    ensure(elapsed <= ORACLE_BUDGET, || format!("took {elapsed:.1?}, budget {ORACLE_BUDGET:?}"))?;
    Ok(format!("committed/total: {}; {elapsed:.1?}", detail.join(", ")))
}

fn buggy_wallet_scenario() -> Outcome_ {
    let (a1, a2) = (Value::addr(0x01), Value::addr(0x02));
    let script = |ex: &mut Executor| {
        vec![
            exec(ex, "mint", vec![a1, Value::int(100)], OWNER),
            exec(ex, "mint", vec![a2, Value::int(50)], OWNER),
            exec(ex, "burn", vec![a1, Value::int(120)], OWNER),
        ]
    };
    let options = ExecOptions { provenance: true, ..Default::default() };
    let mut buggy = deploy(WALLET_BUGGY, options);
    let receipts = script(&mut buggy);
    let neg = fact("negativeBalance", vec![a1, Value::int(-20)]);
    match &receipts[2].outcome {
        Outcome::Reverted(RevertReason::Violation(v)) if v == &vec![neg.clone()] => {}
        o => return Err(format!("buggy burn: {o:?}")),
    }
    ensure(receipts[2].violations == vec![neg], || format!("receipt violations {:?}", receipts[2].violations))?;
    let written: BTreeSet<Fact> = buggy
        .provenance()
        .events
        .iter()
        .filter(|e| e.kind == ProvKind::Write)
        .map(|e| e.fact.clone())
        .collect();
    for f in [fact("totalIn", vec![a1, Value::int(100)]), fact("totalOut", vec![a1, Value::int(120)])] {
        ensure(written.contains(&f), || format!("{f} not derived"))?;
    }
    ensure(buggy.query_view("balanceOf", &[a1]).unwrap() == Some(vec![Value::int(100)]), || "state not restored".into())?;

    let mut fixed = deploy(WALLET, ExecOptions::default());
    let receipts = script(&mut fixed);
    ensure(receipts.iter().all(|r| !matches!(r.outcome, Outcome::Reverted(_))), || {
        format!("corrected wallet reverted: {:?}", receipts.iter().map(|r| r.outcome.name()).collect::<Vec<_>>())
    })?;
    Ok("burn reverted with negativeBalance(0x01,-20); corrected r2 rejects it instead".into())
}

fn transient_violation() -> Outcome_ {
    let mint = |eager| {
        let mut ex = deploy(WALLET_SUPPLY, ExecOptions { eager_violation_check: eager, ..Default::default() });
        exec(&mut ex, "mint", vec![Value::addr(0x01), Value::int(50)], OWNER).outcome
    };
    ensure(mint(false) == Outcome::Committed, || format!("deferred check: {:?}", mint(false)))?;
    match mint(true) {
        Outcome::Reverted(RevertReason::TransientViolation(v)) if v.iter().any(|f| f.relation == "unequalTotalSupply") => {
            Ok(format!("deferred: committed; eager: transient {}", v[0]))
        }
        o => Err(format!("eager check: {o:?}")),
    }
}

fn provenance_fidelity() -> Outcome_ {
    let a1 = Value::addr(0x01);
    let mut ex = deploy(WALLET_BUGGY, ExecOptions { provenance: true, ..Default::default() });
    exec(&mut ex, "mint", vec![a1, Value::int(100)], OWNER);
    exec(&mut ex, "mint", vec![Value::addr(0x02), Value::int(50)], OWNER);
    exec(&mut ex, "burn", vec![a1, Value::int(120)], OWNER);
    let tree = explain(ex.provenance(), &fact("balanceOf", vec![a1, Value::int(-20)])).map_err(|e| e.to_string())?;
    ensure(rule_of(&tree) == Some("r5"), || format!("root rule {:?}", rule_of(&tree)))?;
    let total_out = fact("totalOut", vec![a1, Value::int(120)]);
    let expected: BTreeSet<Fact> = [fact("totalIn", vec![a1, Value::int(100)]), total_out.clone()].into();
    ensure(children(&tree) == expected, || format!("r5 children {:?}", children(&tree)))?;
    let out = tree.child(&total_out).expect("child");
    ensure(rule_of(out) == Some("r8"), || format!("totalOut rule {:?}", rule_of(out)))?;
    let transfers = children(out);
    ensure(!transfers.is_empty() && transfers.iter().all(|f| f.relation == "transfer"), || format!("r8 children {transfers:?}"))?;
    ensure(transfers.contains(&fact("transfer", vec![a1, Value::addr(0), Value::int(120)])), || "burn transfer missing".into())?;

    let (a, b, s, r) = (Value::addr(0xa1), Value::addr(0xb1), Value::addr(0x5a), Value::addr(0xe1));
    let mut ex = Executor::instantiate(&record_mode(&compile(ERC20_BUGGY)), owner_deployment(), ExecOptions::default()).unwrap();
    exec(&mut ex, "mint", vec![a, Value::uint(500)], OWNER);
    exec(&mut ex, "mint", vec![b, Value::uint(500)], OWNER);
    exec(&mut ex, "approve", vec![s, Value::uint(100)], 0xa1);
    exec(&mut ex, "approve", vec![s, Value::uint(100)], 0xb1);
    exec(&mut ex, "transferFrom", vec![b, r, Value::uint(90)], 0x5a);
    let tree = explain(ex.provenance(), &fact("allowance", vec![a, s, Value::uint(10)])).map_err(|e| e.to_string())?;
    ensure(rule_of(&tree) == Some("r3"), || format!("allowance rule {:?}", rule_of(&tree)))?;
    let spent = fact("spentTotal", vec![a, s, Value::uint(90)]);
    let expected: BTreeSet<Fact> = [fact("allowanceTotal", vec![a, s, Value::uint(100)]), spent.clone()].into();
    ensure(children(&tree) == expected, || format!("r3 children {:?}", children(&tree)))?;
    let spent_tree = tree.child(&spent).expect("child");
    ensure(rule_of(spent_tree) == Some("r2'"), || format!("spentTotal rule {:?}", rule_of(spent_tree)))?;
    ensure(children(spent_tree).contains(&fact("transferFrom", vec![b, r, s, Value::uint(90)])), || "b's transfer missing".into())?;
    Ok("balanceOf(0x01,-20) <- r5 <- {totalIn, totalOut <- r8 <- transfers}; allowance(a,s,10) <- r3 <- {allowanceTotal, spentTotal}".into())
}

fn erc721_semantics() -> Outcome_ {
    let call = |ex: &mut Executor, name: &str, args: Vec<Value>, sender: u64, at: u64| {
        ex.execute(&TransactionRequest::new(name, args).from(addr(sender)).at(U256::from(at))).expect("well-formed").outcome
    };
    let t = Value::uint(7);
    let mut ex = deploy(ERC721, ExecOptions::default());
    call(&mut ex, "mint", vec![Value::addr(0xa1), t], OWNER, 1);
    call(&mut ex, "transfer", vec![Value::addr(0xb1), t], 0xa1, 5);
    ensure(ex.query_view("ownerOf", &[t]).unwrap() == Some(vec![Value::addr(0xb1)]), || "ownerOf != b".into())?;
    ensure(ex.query_view("exists", &[t]).unwrap() == Some(vec![Value::Bool(true)]), || "exists != true".into())?;
    let latest: Vec<_> = ex.tuples("latestTransfer");
    ensure(latest == vec![vec![t, Value::addr(0xa1), Value::addr(0xb1), Value::uint(5)]], || format!("latestTransfer {latest:?}"))?;
    call(&mut ex, "burn", vec![t], 0xb1, 9);
    ensure(ex.tuples("tokenNoOwner").is_empty(), || "tokenNoOwner nonempty".into())?;
    ensure(ex.query_view("exists", &[t]).unwrap().is_none(), || "exists survived burn".into())?;
    ensure(ex.query_view("ownerOf", &[t]).unwrap().is_none(), || "ownerOf survived burn".into())?;

    let t = Value::uint(8);
    let stale = |src: &str| {
        let mut ex = Executor::instantiate(&record_mode(&compile(src)), owner_deployment(), ExecOptions::default()).unwrap();
        call(&mut ex, "mint", vec![Value::addr(0xb1), t], OWNER, 1);
        call(&mut ex, "approve", vec![Value::addr(0x5a), t], 0xb1, 2);
        call(&mut ex, "transfer", vec![Value::addr(0xa1), t], 0xb1, 3);
        let args = vec![Value::addr(0x5a), Value::addr(0xa1), Value::addr(0xe1), t];
        let o = call(&mut ex, "transferFrom", args, 0x5a, 4);
        (ex, o)
    };
    let (buggy, o) = stale(ERC721_BUGGY);
    ensure(o == Outcome::Committed, || format!("buggy transferFrom {o:?}"))?;
    let moved = fact("transferFrom", vec![Value::addr(0x5a), Value::addr(0xa1), Value::addr(0xe1), t, Value::uint(4)]);
    let tree = explain(buggy.provenance(), &moved).map_err(|e| e.to_string())?;
    ensure(rule_of(&tree) == Some("r4"), || format!("transferFrom rule {:?}", rule_of(&tree)))?;
    let approved = tree.child(&fact("approved", vec![t, Value::addr(0x5a)])).ok_or("approved not read")?;
    ensure(rule_of(approved) == Some("r5"), || format!("approved rule {:?}", rule_of(approved)))?;
    let (_, o) = stale(ERC721);
    ensure(o == Outcome::Rejected, || format!("corrected transferFrom {o:?}"))?;
    Ok("ownerOf=b, exists=true, burn clears both; stale approval: r5 commits (explained), r5' rejects".into())
}

fn atomicity_fuzz() -> Outcome_ {
    let mut counts = [0usize; 3];
    let cases: [(&str, &str); 3] = [("Wallet (buggy burn)", WALLET_BUGGY), ("ERC20", ERC20), ("Wallet", WALLET)];
    for (name, src) in cases {
        let contract = compile(src);
        for seed in 0..ATOMICITY_SCRIPTS {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let mut ex = Executor::instantiate(&contract, owner_deployment(), ExecOptions::default()).unwrap();
            for step in 0..SCRIPT_LEN {
                let mut req = if src == ERC20 { erc20_tx(&ex, &mut rng, step) } else { wallet_tx(&ex, &mut rng, step) };
                if rng.gen_bool(0.15) && req.name == "mint" {
                    req.args[1] = match req.args[1] {
                        Value::Uint(_) => Value::Uint(U256::MAX - U256::from(rng.gen_range(0..100u64))),
                        _ => huge_int(&mut rng),
                    };
                }
                if src == WALLET_BUGGY && req.name == "burn" && rng.gen_bool(0.5) {
                    req.args[1] = Value::int(rng.gen_range(100..=400));
                }
                let before = ex.state().clone();
                let r = ex.execute(&req).map_err(|e| e.to_string())?;
                let i = match &r.outcome {
                    Outcome::Committed => continue,
                    Outcome::Rejected => 0,
                    Outcome::Reverted(RevertReason::Arithmetic(_)) => 1,
                    Outcome::Reverted(_) => 2,
                };
                counts[i] += 1;
                let after = ex.state();
                ensure(after.store == before.store && after.history == before.history, || {
                    format!("{name} seed {seed} step {step}: {} {} changed state", req.name, r.outcome.name())
                })?;
            }
        }
    }
    ensure(counts.iter().all(|c| *c > 0), || format!("fault classes not all exercised: {counts:?}"))?;
    Ok(format!("{} rejected, {} overflow reverts, {} violation reverts; state unchanged in all", counts[0], counts[1], counts[2]))
}

fn cost_locality() -> Outcome_ {
    let mut visits = Vec::new();
    for n in COST_SIZES {
        let mut ex = deploy(WALLET, ExecOptions::default());
        for i in 0..n {
            let r = exec(&mut ex, "mint", vec![Value::addr(0x1000 + i), Value::int(10)], OWNER);
            ensure(r.outcome.is_committed(), || "setup mint failed".into())?;
        }
        let fresh = exec(&mut ex, "mint", vec![Value::addr(0x01), Value::int(10)], OWNER).stats.row_visits;
        let existing = exec(&mut ex, "mint", vec![Value::addr(0x1000), Value::int(10)], OWNER).stats.row_visits;
        visits.push((n, fresh, existing));
    }
    let (_, f0, e0) = visits[0];
    ensure(visits.iter().all(|(_, f, e)| *f == f0 && *e == e0), || format!("row visits vary: {visits:?}"))?;
    Ok(format!("row visits per mint at N={COST_SIZES:?}: {f0} (new account), {e0} (existing account)"))
}

fn emitter_goldens() -> Outcome_ {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let solc = std::env::var("DECON_SOLC").ok().or_else(|| which("solc"));
    let mut notes = Vec::new();
    for (file, src, name) in [
        ("wallet", WALLET, "Wallet"),
        ("crowdsale", CROWDSALE, "Crowdsale"),
        ("simple_auction", SIMPLE_AUCTION, "SimpleAuction"),
        ("erc20", ERC20, "ERC20"),
        ("erc721", ERC721, "ERC721"),
    ] {
        let options = EmitOptions { contract_name: name.into(), ..Default::default() };
        let a = emit(&compile(src), &options).map_err(|e| e.to_string())?.source;
        let b = emit(&compile(src), &options).map_err(|e| e.to_string())?.source;
        ensure(a == b, || format!("{file}: two emissions differ"))?;
        let path = dir.join(format!("{file}.sol"));
        if update {
            std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
            std::fs::write(&path, &a).map_err(|e| e.to_string())?;
        }
        match golden_compare(&a, &path) {
            Ok(()) => {}
            Err(e @ GoldenError::Missing { .. }) => return Err(format!("{e} (set UPDATE_GOLDEN=1 to create)")),
            Err(e) => return Err(e.to_string()),
        }
        if let Some(solc) = &solc {
            solc_compile(solc, &path).map_err(|e| format!("{file}: {e}"))?;
        }
    }
    notes.push(match solc {
        Some(s) => format!("compiled with {s}"),
        None => "no solc found, compile check skipped".into(),
    });
    Ok(format!("5 contracts byte-identical across runs and equal to goldens; {}", notes.join("")))
}

fn which(cmd: &str) -> Option<String> {
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path).map(|p| p.join(cmd)).find(|p| p.is_file()).map(|p| p.display().to_string())
}

/// Compiles with `solc` or `solcjs`, judged by the executable name.
fn solc_compile(solc: &str, file: &Path) -> Result<(), String> {
    let out = std::env::temp_dir().join(format!("decon-solc-{}", std::process::id()));
    let mut cmd = Command::new(solc);
    if solc.contains("solcjs") {
        cmd.arg("--bin").arg("-o").arg(&out).arg(file);
    } else {
        cmd.arg("--bin").arg(file);
    }
    let output = cmd.output().map_err(|e| format!("cannot run {solc}: {e}"))?;
    let _ = std::fs::remove_dir_all(&out);
    let stderr = String::from_utf8_lossy(&output.stderr);
    if !output.status.success() || stderr.contains("Error:") {
        return Err(format!("{solc} failed: {stderr}"));
    }
    Ok(())
}

fn big_i(v: I256) -> BigInt {
    BigInt::from_signed_bytes_be(&v.to_be_bytes())
}

fn big_u(v: U256) -> BigInt {
    BigInt::from_bytes_be(num_bigint::Sign::Plus, &v.to_be_bytes())
}

/// Signed 256-bit operands spread over all magnitudes and both signs,
/// with the range boundaries overrepresented.
fn int_operand() -> impl Strategy<Value = I256> {
    prop_oneof![
        Just(I256::MIN),
        Just(I256::MAX),
        Just(I256::ZERO),
        Just(I256::ONE),
        Just(I256::MINUS_ONE),
        (any::<[u8; 32]>(), 0u32..256).prop_map(|(b, shift)| I256::from_be_bytes(b) >> shift),
        any::<[u8; 32]>().prop_map(I256::from_be_bytes),
    ]
}

fn uint_operand() -> impl Strategy<Value = U256> {
    prop_oneof![
        Just(U256::MAX),
        Just(U256::ZERO),
        Just(U256::ONE),
        (any::<[u8; 32]>(), 0u32..256).prop_map(|(b, shift)| U256::from_be_bytes(b) >> shift),
    ]
}

fn op() -> impl Strategy<Value = ArithOp> {
    prop_oneof![Just(ArithOp::Add), Just(ArithOp::Sub), Just(ArithOp::Mul), Just(ArithOp::Div)]
}

/// Exact result of `a op b`, or None for division by zero.
fn exact(op: ArithOp, a: &BigInt, b: &BigInt) -> Option<BigInt> {
    Some(match op {
        ArithOp::Add => a + b,
        ArithOp::Sub => a - b,
        ArithOp::Mul => a * b,
        ArithOp::Div if *b == BigInt::from(0) => return None,
        // Truncating division, as in BigInt.
        ArithOp::Div => a / b,
    })
}

/// The monitored overflow conditions over wrapped results: sign rules for
/// addition, the `b != c/a` product check, and a zero divisor.
fn predicate_faults(op: ArithOp, a: I256, b: I256) -> bool {
    let zero = I256::ZERO;
    match op {
        ArithOp::Add => {
            let c = a.wrapping_add(b);
            (c < zero && a > zero && b > zero) || (c > zero && a < zero && b < zero)
        }
        ArithOp::Sub => {
            let c = a.wrapping_sub(b);
            (c < zero && a >= zero && b < zero) || (c > zero && a < zero && b > zero)
        }
        ArithOp::Mul => a != zero && b != a.wrapping_mul(b).wrapping_div(a),
        ArithOp::Div => b == zero || (a == I256::MIN && b == I256::MINUS_ONE),
    }
}

fn overflow_semantics() -> Outcome_ {
    let (lo, hi) = (big_i(I256::MIN), big_i(I256::MAX));
    let umax = big_u(U256::MAX);
    let mut runner = TestRunner::new(Config { cases: OVERFLOW_CASES, failure_persistence: None, ..Config::default() });
    let faults = std::cell::Cell::new(0u32);
    let gaps = std::cell::RefCell::new(BTreeSet::new());
    runner
        .run(&(op(), int_operand(), int_operand()), |(op, a, b)| {
            let got = arith(op, Value::Int(a), Value::Int(b));
            let want = exact(op, &big_i(a), &big_i(b));
            match (&got, want) {
                (Err(ArithFault::DivisionByZero), None) => faults.set(faults.get() + 1),
                (Err(ArithFault::Overflow { .. }), Some(w)) if w < lo || w > hi => faults.set(faults.get() + 1),
                (Ok(Value::Int(c)), Some(w)) if big_i(*c) == w => {}
                _ => return Err(TestCaseError::fail(format!("{a} {} {b}: runtime {got:?}", op.symbol()))),
            }
            // The wrapped-result predicates miss MIN + MIN (wraps to 0) and
            // -1 * MIN (wraps back to MIN); the runtime catches both.
            if predicate_faults(op, a, b) != got.is_err() {
                gaps.borrow_mut().insert(format!("{a} {} {b}", op.symbol()));
            }
            Ok(())
        })
        .map_err(|e| format!("signed: {e}"))?;
    runner
        .run(&(op(), uint_operand(), uint_operand()), |(op, a, b)| {
            let got = arith(op, Value::Uint(a), Value::Uint(b));
            let want = exact(op, &big_u(a), &big_u(b));
            match (&got, want) {
                (Err(ArithFault::DivisionByZero), None) => faults.set(faults.get() + 1),
                (Err(ArithFault::Overflow { .. }), Some(w)) if w < BigInt::from(0) || w > umax => faults.set(faults.get() + 1),
                (Ok(Value::Uint(c)), Some(w)) if big_u(*c) == w => {}
                _ => return Err(TestCaseError::fail(format!("{a} {} {b}: runtime {got:?}", op.symbol()))),
            }
            Ok(())
        })
        .map_err(|e| format!("unsigned: {e}"))?;
    let known: BTreeSet<String> = [
        format!("{} + {}", I256::MIN, I256::MIN),
        format!("{} * {}", I256::MINUS_ONE, I256::MIN),
        format!("{} * {}", I256::MIN, I256::MINUS_ONE),
    ]
    .into();
    let gaps = gaps.into_inner();
    ensure(gaps.is_subset(&known), || format!("predicates disagree beyond the known wrap cases: {gaps:?}"))?;
    Ok(format!("{} cases x 2 types, {} faults, all matching wide arithmetic", OVERFLOW_CASES, faults.get()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome_); 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("buggy wallet scenario", buggy_wallet_scenario),
        ("transient violation", transient_violation),
        ("provenance fidelity", provenance_fidelity),
        ("ERC721 semantics", erc721_semantics),
        ("atomicity fuzz", atomicity_fuzz),
        ("cost locality", cost_locality),
        ("emitter determinism and goldens", emitter_goldens),
        ("overflow semantics", overflow_semantics),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match result {
            Ok(detail) => println!("criterion {}: {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: {name}: FAIL ({why})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
