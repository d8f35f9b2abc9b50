use super::*;
use crate::analysis::validate;
use crate::frontend::parse;
use crate::ir::{compile, CompiledContract};
use crate::value::{Address, Value};

const WALLET: &str = include_str!("../../examples/wallet.dcn");
const WALLET_BUGGY: &str = include_str!("../../examples/wallet_buggy.dcn");

fn compiled(src: &str) -> CompiledContract {
    compile(&validate(&parse(src).unwrap()).unwrap()).unwrap()
}

fn a(n: u64) -> Address {
    Address::from_low_u64(n)
}

fn wallet(src: &str, options: ExecOptions) -> Executor {
    let deploy = Deployment { args: vec![Value::addr(0xA)], sender: a(0xA), ..Default::default() };
    Executor::instantiate(&compiled(src), deploy, options).unwrap()
}

fn tx(ex: &mut Executor, name: &str, args: Vec<Value>, sender: u64) -> Receipt {
    ex.execute(&TransactionRequest::new(name, args).from(a(sender))).unwrap()
}

fn balance(ex: &Executor, who: u64) -> Option<Value> {
    ex.query_view("balanceOf", &[Value::addr(who)]).unwrap().map(|v| v[0])
}

#[test]
fn mint_and_transfer() {
    let mut ex = wallet(WALLET, ExecOptions::default());
    assert_eq!(ex.query_view("totalSupply", &[]).unwrap(), Some(vec![Value::int(0)]));
    let r = tx(&mut ex, "mint", vec![Value::addr(1), Value::int(100)], 0xA);
    assert_eq!(r.outcome, Outcome::Committed, "{r:?}");
    assert_eq!(balance(&ex, 1), Some(Value::int(100)));
    let r = tx(&mut ex, "transfer", vec![Value::addr(1), Value::addr(2), Value::int(30)], 1);
    assert_eq!(r.outcome, Outcome::Committed);
    assert_eq!(balance(&ex, 1), Some(Value::int(70)));
    assert_eq!(balance(&ex, 2), Some(Value::int(30)));
    assert_eq!(ex.query_view("totalSupply", &[]).unwrap(), Some(vec![Value::int(100)]));
    let r = tx(&mut ex, "burn", vec![Value::addr(2), Value::int(30)], 0xA);
    assert!(r.outcome.is_committed());
    assert_eq!(balance(&ex, 2), Some(Value::int(0)));
    assert_eq!(ex.query_view("totalSupply", &[]).unwrap(), Some(vec![Value::int(70)]));
}

#[test]
fn rejected_requests_leave_state() {
    let mut ex = wallet(WALLET, ExecOptions::default());
    tx(&mut ex, "mint", vec![Value::addr(1), Value::int(10)], 0xA);
    let before = ex.state().store.clone();
    // Not the owner.
    assert_eq!(tx(&mut ex, "mint", vec![Value::addr(1), Value::int(10)], 7).outcome, Outcome::Rejected);
    // Overdraft.
    assert_eq!(tx(&mut ex, "transfer", vec![Value::addr(1), Value::addr(2), Value::int(11)], 1).outcome, Outcome::Rejected);
    assert_eq!(ex.state().store, before);
}

#[test]
fn buggy_burn_reverts_on_negative_balance() {
    let mut ex = wallet(WALLET_BUGGY, ExecOptions::default());
    tx(&mut ex, "mint", vec![Value::addr(1), Value::int(100)], 0xA);
    tx(&mut ex, "mint", vec![Value::addr(2), Value::int(50)], 0xA);
    let before = ex.state().store.clone();
    let r = tx(&mut ex, "burn", vec![Value::addr(1), Value::int(120)], 0xA);
    let Outcome::Reverted(RevertReason::Violation(v)) = &r.outcome else { panic!("{r:?}") };
    assert_eq!(v, &[Fact::new("negativeBalance", vec![Value::addr(1), Value::int(-20)])]);
    assert_eq!(ex.state().store, before);
    assert_eq!(balance(&ex, 1), Some(Value::int(100)));
    assert_eq!(ex.query_view("totalSupply", &[]).unwrap(), Some(vec![Value::int(150)]));
}

#[test]
fn errors() {
    let mut ex = wallet(WALLET, ExecOptions::default());
    let err = ex.execute(&TransactionRequest::new("steal", vec![])).unwrap_err();
    assert_eq!(err, ExecError::UnknownTransaction("steal".into()));
    let err = ex.execute(&TransactionRequest::new("mint", vec![Value::addr(1)])).unwrap_err();
    assert!(matches!(err, ExecError::ArityMismatch { expected: 2, found: 1, .. }));
    let err = ex.execute(&TransactionRequest::new("mint", vec![Value::addr(1), Value::uint(1)])).unwrap_err();
    assert!(matches!(err, ExecError::TypeMismatch { column: 1, .. }));
    assert!(matches!(ex.query_view("mint", &[]), Err(QueryError::NotPublic(_))));
    assert!(matches!(ex.query_view("balanceOf", &[]), Err(QueryError::KeyArityMismatch { expected: 1, .. })));
    assert_eq!(ex.execute(&TransactionRequest::new("constructor", vec![Value::addr(1)])).unwrap_err(), ExecError::ConstructorCall);
}

#[test]
fn overflow_reverts() {
    let src = ".decl recv_add(n: uint)\n.decl add(n: uint)\n.decl *total(n: uint)\n.public total\n\
               add(n) :- recv_add(n).\ntotal(s) :- s = sum n: add(n).";
    let mut ex = Executor::instantiate(&compiled(src), Deployment::default(), ExecOptions::default()).unwrap();
    let max = Value::Uint(ethnum::U256::MAX);
    assert!(ex.execute(&TransactionRequest::new("add", vec![max])).unwrap().outcome.is_committed());
    let r = ex.execute(&TransactionRequest::new("add", vec![Value::uint(1)])).unwrap();
    assert!(matches!(r.outcome, Outcome::Reverted(RevertReason::Arithmetic(_))), "{r:?}");
    assert_eq!(ex.query_view("total", &[]).unwrap(), Some(vec![max]));
}

#[test]
fn ether_flows() {
    let src = ".decl recv_deposit()\n.decl recv_withdraw(n: uint)\n.decl deposit(p: address, n: uint)\n\
               deposit(p, n) :- recv_deposit(), msgSender(p), msgValue(n).\n\
               send(p, n) :- recv_withdraw(n), msgSender(p).";
    let mut ex = Executor::instantiate(&compiled(src), Deployment::default(), ExecOptions::default()).unwrap();
    let r = ex.execute(&TransactionRequest::new("deposit", vec![]).from(a(1)).value(10u32.into())).unwrap();
    assert!(r.outcome.is_committed());
    assert_eq!(ex.balance(), ethnum::U256::from(10u32));
    let r = ex.execute(&TransactionRequest::new("withdraw", vec![Value::uint(4)]).from(a(2))).unwrap();
    assert_eq!(r.sends, [(a(2), 4u32.into())]);
    let r = ex.execute(&TransactionRequest::new("withdraw", vec![Value::uint(7)]).from(a(2))).unwrap();
    assert!(matches!(r.outcome, Outcome::Reverted(RevertReason::InsufficientBalance { .. })));
    assert_eq!(ex.balance(), ethnum::U256::from(6u32));
}

#[test]
fn provenance_survives_revert() {
    let options = ExecOptions { provenance: true, ..Default::default() };
    let mut ex = wallet(WALLET_BUGGY, options);
    tx(&mut ex, "mint", vec![Value::addr(1), Value::int(100)], 0xA);
    let n = ex.provenance().len();
    tx(&mut ex, "burn", vec![Value::addr(1), Value::int(120)], 0xA);
    assert!(ex.provenance().len() > n);
    assert!(ex.provenance().events.iter().any(|e| e.fact.relation == "negativeBalance"));
}

#[test]
fn random_wallet_runs_match_reference() {
    use rand::{Rng, SeedableRng};
    for (src, seed) in [(WALLET, 1u64), (WALLET, 2), (WALLET_BUGGY, 3), (WALLET_BUGGY, 4)] {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for reverse in [false, true] {
            let mut ex = wallet(src, ExecOptions { reverse_tie_break: reverse, ..Default::default() });
            let mut committed = 0;
            for _ in 0..40 {
                let who = |rng: &mut rand_chacha::ChaCha8Rng| Value::addr(rng.gen_range(0..4));
                let n = Value::int(rng.gen_range(-5..60));
                let (name, args, sender) = match rng.gen_range(0..3) {
                    0 => ("mint", vec![who(&mut rng), n], 0xA),
                    1 => ("burn", vec![who(&mut rng), n], 0xA),
                    _ => ("transfer", vec![who(&mut rng), who(&mut rng), n], rng.gen_range(0..4)),
                };
                let args = if name == "transfer" { let mut a = args; a[0] = Value::addr(sender); a } else { args };
                let r = tx(&mut ex, name, args, sender);
                assert_eq!(oracle_mismatch(&ex).unwrap(), None, "after {r:?}");
                assert!(ex.violating().is_empty());
                committed += r.outcome.is_committed() as usize;
            }
            assert!(committed >= 10, "only {committed} commits");
        }
    }
}

#[test]
fn scripts() {
    let c = compiled(WALLET);
    let happy = parse_script(&c.model, include_str!("../../examples/scripts/wallet_happy.json")).unwrap();
    let run = run_script(&c, &happy, RunSettings { oracle_check: true, ..Default::default() }).unwrap();
    run.check().unwrap();
    assert_eq!(run.receipts.len(), 5);

    let empty = parse_script(&c.model, r#"{"constructor": {"args": ["0x0a"]}, "txs": []}"#).unwrap();
    assert!(run_script(&c, &empty, RunSettings::default()).unwrap().receipts.is_empty());

    let neg = include_str!("../../examples/scripts/negative_balance.json");
    let buggy = compiled(WALLET_BUGGY);
    let run = run_script(&buggy, &parse_script(&buggy.model, neg).unwrap(), RunSettings::default()).unwrap();
    run.check().unwrap();
    assert_eq!(run.receipts[2].outcome.name(), "reverted");
    let line = run.receipts_json_lines().lines().nth(2).unwrap().to_string();
    assert!(line.contains("\"reason\":\"Violation\""), "{line}");

    let run = run_script(&c, &parse_script(&c.model, neg).unwrap(), RunSettings::default()).unwrap();
    assert_eq!(run.receipts[2].outcome, Outcome::Rejected);

    let bad = parse_script(&c.model, r#"{"txs": [{"name": "mint", "args": ["0x01"]}]}"#).unwrap_err();
    assert!(matches!(bad, ScriptError::Parse(m) if m.contains("takes 2 arguments")));
    let wrong = parse_script(&c.model, r#"{"constructor": {"args": ["0x0a"]}, "txs": [{"name": "mint", "args": ["0x01", "1"], "expect": "committed"}]}"#).unwrap();
    let run = run_script(&c, &wrong, RunSettings::default()).unwrap();
    assert!(matches!(run.check(), Err(ScriptError::ExpectationFailed { index: 1, .. })));
}
