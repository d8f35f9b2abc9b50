use super::*;
use crate::analysis::validate;
use crate::frontend::parse;
use crate::ir::{compile, CompiledContract};
use crate::runtime::{parse_script, run_script, Executor, Fact, RunSettings, Deployment, ExecOptions, TransactionRequest};
use crate::value::{Address, Value};

const WALLET_BUGGY: &str = include_str!("../../examples/wallet_buggy.dcn");
const WALLET: &str = include_str!("../../examples/wallet.dcn");
const NEG: &str = include_str!("../../examples/scripts/negative_balance.json");

fn compiled(src: &str) -> CompiledContract {
    compile(&validate(&parse(src).unwrap()).unwrap()).unwrap()
}

fn fact(model: &crate::analysis::ContractModel, s: &str) -> Fact {
    parse_fact(model, s).unwrap()
}

fn buggy_log() -> (CompiledContract, ProvenanceLog) {
    let c = record_mode(&compiled(WALLET_BUGGY));
    let run = run_script(&c, &parse_script(&c.model, NEG).unwrap(), RunSettings::default()).unwrap();
    (c, run.executor.provenance().clone())
}

#[test]
fn negative_balance_lineage() {
    let (c, log) = buggy_log();
    let m = &c.model;
    let tree = explain(&log, &fact(m, "balanceOf(0x01,-20)")).unwrap();
    let d = tree.derivation.as_ref().unwrap();
    assert_eq!(d.rule, "r5");
    let mut kids: Vec<String> = d.children.iter().map(|c| c.fact.to_string()).collect();
    kids.sort();
    assert_eq!(kids, ["totalIn(0x01,100)", "totalOut(0x01,120)"]);

    let out = tree.child(&fact(m, "totalOut(0x01,120)")).unwrap();
    let od = out.derivation.as_ref().unwrap();
    assert_eq!(od.rule, "r8");
    assert!(od.children.iter().all(|c| c.fact.relation == "transfer"));
    let burn = out.child(&fact(m, "transfer(0x01,0,120)")).unwrap();
    assert_eq!(burn.rules(), ["r7", "r2'", "r0"]);
    let recv = &burn.derivation.as_ref().unwrap().children[0].derivation.as_ref().unwrap().children;
    assert!(recv.iter().any(|t| t.fact.to_string() == "recv_burn(0x01,120)" && t.is_leaf()));
    assert!(recv.iter().any(|t| t.fact.relation == "msgSender" && t.is_leaf()));

    let v = explain(&log, &fact(m, "negativeBalance(0x01,-20)")).unwrap();
    assert_eq!(&v.rules()[..3], ["r14", "r5", "r8"]);
}

#[test]
fn reads_precede_writes_within_firings() {
    let (_, log) = buggy_log();
    let mut last_kind: std::collections::BTreeMap<u64, ProvKind> = Default::default();
    for (i, e) in log.events.iter().enumerate() {
        assert_eq!(e.seq, i as u64);
        if let Some(ProvKind::Write) = last_kind.get(&e.firing) {
            panic!("event after write in firing {}", e.firing);
        }
        last_kind.insert(e.firing, e.kind);
    }
}

#[test]
fn r1_firing_and_rejections() {
    let c = compiled(WALLET);
    let deploy = Deployment { args: vec![Value::addr(0xA)], sender: Address::from_low_u64(0xA), ..Default::default() };
    let mut ex = Executor::instantiate(&c, deploy, ExecOptions { provenance: true, ..Default::default() }).unwrap();
    let start = ex.provenance().len();
    ex.execute(&TransactionRequest::new("mint", vec![Value::addr(1), Value::int(5)]).from(Address::from_low_u64(0xA))).unwrap();
    let r1: Vec<String> = ex.provenance().events[start..]
        .iter()
        .filter(|e| e.rule == "r1")
        .map(|e| format!("{}:{}", e.kind.name(), e.fact))
        .collect();
    assert_eq!(r1, ["read:recv_mint(0x01,5)", "read:msgSender(0x0a)", "read:owner(0x0a)", "write:mint(0x01,5)"]);

    let start = ex.provenance().len();
    let r = ex.execute(&TransactionRequest::new("mint", vec![Value::addr(1), Value::int(5)]).from(Address::from_low_u64(7))).unwrap();
    assert!(!r.outcome.is_committed());
    let new = &ex.provenance().events[start..];
    assert!(!new.is_empty() && new.iter().all(|e| e.kind == ProvKind::Read));

    // A transaction tuple is its own leaf.
    let t = explain(ex.provenance(), &fact(&c.model, "recv_mint(0x01,5)")).unwrap();
    assert!(t.is_leaf());
    assert!(matches!(
        explain(ex.provenance(), &fact(&c.model, "balanceOf(0x09,1)")),
        Err(ProvenanceError::TupleNeverDerived(_))
    ));
}

#[test]
fn rendering() {
    let (c, log) = buggy_log();
    let tree = explain(&log, &fact(&c.model, "balanceOf(0x01,-20)")).unwrap();
    let dot = render_dot(&tree);
    assert_eq!(dot, render_dot(&tree));
    for s in ["label=\"r5\"", "label=\"totalIn(0x01,100)\"", "label=\"totalOut(0x01,120)\""] {
        assert!(dot.contains(s), "{dot}");
    }
    let leaf = ProvTree { fact: Fact::new("a", vec![]), derivation: None };
    let dot = render_dot(&leaf);
    assert_eq!(dot.matches("->").count(), 0);
    assert_eq!(dot.matches("shape=").count(), 1);
    assert!(render_text(&tree).starts_with("balanceOf(0x01,-20)\n  <- r5\n"));
    assert_eq!(render_json(&tree)["rule"], "r5");
}

#[test]
fn tuple_specs() {
    let c = compiled(WALLET);
    let m = &c.model;
    assert_eq!(fact(m, " balanceOf( 0x01 , -20 )"), Fact::new("balanceOf", vec![Value::addr(1), Value::int(-20)]));
    assert_eq!(fact(m, "totalSupply(5)").values, [Value::int(5)]);
    for bad in ["balanceOf", "balanceOf(0x01)", "nope(1)", "balanceOf(x,1)", "balanceOf(0x01,1"] {
        assert!(parse_fact(m, bad).is_err(), "{bad}");
    }
}
