//! Violations are checked when a transaction finishes, not while its
//! effects propagate. A mint updates totalSupply and totalBalance one
//! after the other, so the property `totalSupply == totalBalance` is
//! briefly false in between. The deferred check commits the mint; the
//! eager test hook rejects it.
//!
//! `cargo run --example transient_violation`

use decon::runtime::{Deployment, ExecOptions, Executor, TransactionRequest};
use decon::value::{Address, Value};

fn main() {
    let contract = decon::compile_source(include_str!("wallet_supply.dcn")).expect("contract compiles");
    let owner = Address::from_low_u64(0x0a);
    let mint = TransactionRequest::new("mint", vec![Value::addr(0x01), Value::int(50)]).from(owner);
    for (label, eager) in [("deferred", false), ("eager", true)] {
        let options = ExecOptions { eager_violation_check: eager, ..Default::default() };
        let deploy = Deployment { args: vec![Value::Address(owner)], sender: owner, ..Default::default() };
        let mut ex = Executor::instantiate(&contract, deploy, options).expect("deploys");
        let r = ex.execute(&mint).expect("well-formed");
        match &r.outcome {
            decon::runtime::Outcome::Reverted(reason) => println!("{label:>8}: reverted ({reason})"),
            other => println!("{label:>8}: {}", other.name()),
        }
        let supply = ex.query_view("totalSupply", &[]).expect("view");
        println!("          totalSupply afterwards: {:?}", supply);
    }
}
