use super::*;
use crate::frontend::parse;

const WALLET: &str = include_str!("../../examples/wallet.dcn");

fn model(src: &str) -> ContractModel {
    validate(&parse(src).unwrap()).unwrap()
}

fn errors(src: &str) -> Vec<AnalysisErrorKind> {
    validate(&parse(src).unwrap()).unwrap_err().0.into_iter().map(|d| d.kind).collect()
}

#[test]
fn wallet_rules_and_dependency_chain() {
    let m = model(WALLET);
    let tx: Vec<&str> = m.rules.iter().filter(|r| r.is_transaction()).map(|r| r.id.as_str()).collect();
    assert_eq!(tx, ["r0", "r1", "r2", "r3"]);
    for (from, to, rule) in [("recv_mint", "mint", "r1"), ("mint", "transfer", "r6"), ("transfer", "totalIn", "r9"), ("totalIn", "balanceOf", "r5")] {
        assert_eq!(m.dep_graph.edge_rule(from, to).as_deref(), Some(rule), "{from} -> {to}");
    }
    assert!(m.dep_graph.reaches("recv_mint", "balanceOf"));
    // Transaction rules depend only on their transaction relation.
    assert!(m.dep_graph.edge_rule("balanceOf", "burn").is_none());
    assert!(m.topo_rank("transfer") < m.topo_rank("totalIn"));
    assert!(m.topo_rank("totalIn") < m.topo_rank("balanceOf"));
}

#[test]
fn wallet_materialization() {
    let m = model(WALLET);
    let expected = [
        "allBurn", "allMint", "balanceOf", "burn", "mint", "negativeBalance", "owner", "totalIn", "totalOut",
        "totalSupply", "transfer",
    ];
    assert_eq!(m.materialized.iter().map(String::as_str).collect::<Vec<_>>(), expected);
    assert!(!m.materialized.contains("recv_mint"));
    assert!(!m.materialized.contains("msgSender"));
}

#[test]
fn materialization_edge_cases() {
    let m = model(".decl a(x: int)\n.decl b(x: int)\nb(x) :- a(x).");
    assert!(m.materialized.is_empty());
    let m = model(".decl a(x: int)\n.decl v(x: int)\n.violation v\nv(x) :- a(x), x < 0.");
    assert!(m.materialized.contains("a"));
}

#[test]
fn materialization_is_monotone_in_annotations() {
    let base = WALLET.replace(".public totalSupply, balanceOf", "");
    let without = model(&base).materialized;
    let with = model(WALLET).materialized;
    assert!(without.is_subset(&with));
}

#[test]
fn interface_signatures() {
    let m = model(
        ".decl recv_mint(p: address, amount: int)\n.decl *totalSupply(n: int)\n.decl k(a: address)[0]\n.decl mint(p: address, amount: int)\n\
         .public totalSupply, k\n\
         mint(p,n) :- recv_mint(p,n).\ntotalSupply(s) :- s = sum n: mint(_,n).\nk(p) :- mint(p,_).",
    );
    let sigs: Vec<String> = public_interface(&m).iter().map(|s| s.to_string()).collect();
    assert_eq!(
        sigs,
        [
            "mint(p: address, amount: int) -> (success: bool)",
            "totalSupply() -> (n: int)",
            "k(a: address) -> (exists: bool)",
        ]
    );
}

#[test]
fn recursion_reports_a_cycle() {
    let errs = errors(".decl a(x: int)\n.decl b(x: int)\na(x) :- b(x).\nb(x) :- a(x).");
    assert_eq!(errs, [AnalysisErrorKind::RecursionDetected(vec!["a".into(), "b".into(), "a".into()])]);
}

#[test]
fn ungrounded_head_variable() {
    let errs = errors(".decl b(x: int)\n.decl h(x: int, y: int)\nh(x,y) :- b(x).");
    assert_eq!(errs, [AnalysisErrorKind::UngroundedHeadVariable { variable: "y".into(), rule: "rule_1".into() }]);
    let errs = errors(".decl b(x: int)\n.decl h(x: int)\nh(x) :- b(x), y > 0.");
    assert_eq!(errs, [AnalysisErrorKind::UngroundedVariable("y".into())]);
}

#[test]
fn equality_binds_and_functions_ground() {
    let m = model(".decl b(x: int)\n.decl h(x: int, y: int, z: int)\nh(x,y,z) :- b(x), y == x, z := y * 2.");
    assert_eq!(m.rules[0].var_types["z"], ColumnType::Int);
}

#[test]
fn name_and_arity_errors() {
    assert_eq!(errors(".decl h(x: int)\nh(x) :- nope(x)."), [AnalysisErrorKind::UnknownRelation("nope".into())]);
    assert!(matches!(
        errors(".decl h(x: int)\n.decl b(x: int)\nh(x) :- b(x, x).")[0],
        AnalysisErrorKind::ArityMismatch { expected: 1, found: 2, .. }
    ));
    assert_eq!(errors(".public nope"), [AnalysisErrorKind::UnknownRelation("nope".into())]);
}

#[test]
fn type_errors() {
    let mixed = ".decl a(x: int)\n.decl b(y: uint)\n.decl h(z: int)\nh(z) :- a(x), b(y), z := x + y.";
    assert!(matches!(errors(mixed)[0], AnalysisErrorKind::TypeMismatch(_)));
    let addr_math = ".decl a(x: address)\n.decl h(z: address)\nh(z) :- a(x), z := x + 1.";
    assert!(matches!(errors(addr_math)[0], AnalysisErrorKind::TypeMismatch(_)));
    let neg_uint = ".decl a(x: uint)\n.decl h(x: uint)\nh(x) :- a(x), x > -1.";
    assert!(matches!(errors(neg_uint)[0], AnalysisErrorKind::TypeMismatch(_)));
    let bool_as_int = ".decl a(x: int)\n.decl h(x: int)\nh(x) :- a(x), x == true.";
    assert!(matches!(errors(bool_as_int)[0], AnalysisErrorKind::TypeMismatch(_)));
}

#[test]
fn transaction_and_reserved_placement() {
    let two = ".decl recv_a(x: int)\n.decl recv_b(x: int)\n.decl h(x: int)\nh(x) :- recv_a(x), recv_b(x).";
    assert!(matches!(errors(two)[0], AnalysisErrorKind::MultipleTransactionTriggers(_)));
    let write_sender = ".decl recv_a(x: address)\nmsgSender(x) :- recv_a(x).";
    assert_eq!(errors(write_sender), [AnalysisErrorKind::WriteToReadOnlyReserved("msgSender".into())]);
    let write_tx = ".decl recv_a(x: int)\n.decl b(x: int)\nrecv_a(x) :- b(x).";
    assert_eq!(errors(write_tx), [AnalysisErrorKind::WriteToTransactionRelation("recv_a".into())]);
    let annotate = ".decl recv_a(x: int)\n.public recv_a";
    assert_eq!(errors(annotate), [AnalysisErrorKind::AnnotationOnTransactionRelation("recv_a".into())]);
    let sender_in_view = ".decl b(x: address)\n.decl h(x: address)\nh(x) :- b(x), msgSender(x).";
    assert_eq!(errors(sender_in_view), [AnalysisErrorKind::ReservedOutsideTransactionRule("msgSender".into())]);
    let read_send = ".decl recv_a(x: address)\n.decl h(x: address)\nh(x) :- recv_a(x), send(x, _).";
    assert_eq!(errors(read_send), [AnalysisErrorKind::ReadFromWriteOnlyReserved]);
    let redeclare = ".decl now(t: uint)";
    assert_eq!(errors(redeclare), [AnalysisErrorKind::ReservedRedeclared("now".into())]);
}

#[test]
fn aggregation_checks() {
    let twice = ".decl a(x: int, y: int)\n.decl h(s: int)\nh(s) :- s = sum n: a(n, n).";
    assert!(matches!(errors(twice)[0], AnalysisErrorKind::InvalidAggregation(_)));
    let leaked = ".decl a(x: int, y: int)\n.decl h(s: int, n: int)\nh(s, n) :- a(_, n), s = sum n: a(_, n).";
    assert!(matches!(errors(leaked)[0], AnalysisErrorKind::InvalidAggregation(_)));
    let m = model(".decl a(k: address, y: int)\n.decl h(k: address, s: int)\nh(k, s) :- s = sum n: a(k, n).");
    let BodyLit::Agg { free_keys, .. } = &m.rules[0].body[0] else { panic!() };
    assert_eq!(free_keys, &["k".to_string()]);
    let m = model(WALLET);
    let r8 = m.rule("r8").unwrap();
    let BodyLit::Agg { free_keys, group_keys, .. } = &r8.body[2] else { panic!() };
    assert_eq!(group_keys, &["p".to_string()]);
    assert!(free_keys.is_empty());
}

#[test]
fn diagnostics_format() {
    let d = validate(&parse(".decl b(x: int)\n.decl h(x: int, y: int)\nr9: h(x,y) :- b(x).").unwrap()).unwrap_err();
    let line = d.0[0].to_string();
    assert!(line.starts_with("error:r9:UngroundedHeadVariable:"), "{line}");
    let m = model(".decl a(x: int)");
    assert_eq!(m.warnings[0].to_string(), "warning:a:NeverDerived:relation `a` is never derived by any rule");
}

#[test]
fn topological_order_is_stable() {
    let a = model(WALLET).topo_order;
    let b = model(WALLET).topo_order;
    assert_eq!(a, b);
}
