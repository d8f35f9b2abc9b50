//! Debugging the Wallet variant whose burn rule skips the balance check.
//! The burn reverts with a negative balance; the provenance log, which
//! survives the revert, shows how that balance was derived.
//!
//! `cargo run --example explain_negative_balance`

use decon::provenance::{explain, record_mode, render_text};
use decon::runtime::{Deployment, ExecOptions, Executor, Fact, TransactionRequest};
use decon::value::{Address, Value};

fn main() {
    let contract = record_mode(&decon::compile_source(include_str!("wallet_buggy.dcn")).expect("contract compiles"));
    let owner = Address::from_low_u64(0x0a);
    let deploy = Deployment { args: vec![Value::Address(owner)], sender: owner, ..Default::default() };
    let mut ex = Executor::instantiate(&contract, deploy, ExecOptions::default()).expect("deploys");

    for (name, who, n) in [("mint", 0x01, 100), ("mint", 0x02, 50), ("burn", 0x01, 120)] {
        let r = ex.execute(&TransactionRequest::new(name, vec![Value::addr(who), Value::int(n)]).from(owner)).unwrap();
        match &r.outcome {
            decon::runtime::Outcome::Reverted(reason) => println!("{name}({who:#04x},{n}): reverted, {reason}"),
            o => println!("{name}({who:#04x},{n}): {}", o.name()),
        }
    }
    println!("balanceOf(0x01) is still {:?}\n", ex.query_view("balanceOf", &[Value::addr(0x01)]).unwrap());

    let bad = Fact::new("balanceOf", vec![Value::addr(0x01), Value::int(-20)]);
    let tree = explain(ex.provenance(), &bad).expect("derived during the burn");
    print!("{}", render_text(&tree));
    println!("\nrules on the path: {}", tree.rules().join(" "));
}
