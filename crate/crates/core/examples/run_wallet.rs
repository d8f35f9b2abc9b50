//! Deploys the Wallet and drives it through the library API: mints,
//! transfers, a burn, and requests that the rules refuse.
//!
//! `cargo run --example run_wallet`

use decon::runtime::{Deployment, ExecOptions, Executor, TransactionRequest};
use decon::value::{Address, Value};

fn main() {
    let contract = decon::compile_source(include_str!("wallet.dcn")).expect("wallet compiles");
    let owner = Address::from_low_u64(0x0a);
    let deploy = Deployment { args: vec![Value::Address(owner)], sender: owner, ..Default::default() };
    let mut wallet = Executor::instantiate(&contract, deploy, ExecOptions::default()).expect("deploys");

    let (alice, bob) = (Value::addr(0x01), Value::addr(0x02));
    let requests = [
        TransactionRequest::new("mint", vec![alice, Value::int(100)]).from(owner),
        TransactionRequest::new("transfer", vec![alice, bob, Value::int(40)]).from(Address::from_low_u64(0x01)),
        TransactionRequest::new("burn", vec![bob, Value::int(10)]).from(owner),
        // Only the owner mints.
        TransactionRequest::new("mint", vec![bob, Value::int(5)]).from(Address::from_low_u64(0x02)),
        // More than the sender holds.
        TransactionRequest::new("transfer", vec![bob, alice, Value::int(31)]).from(Address::from_low_u64(0x02)),
    ];
    for req in &requests {
        let r = wallet.execute(req).expect("well-formed request");
        let args: Vec<String> = req.args.iter().map(Value::to_string).collect();
        println!("{}({}) -> {} [{} row visits]", req.name, args.join(","), r.outcome.name(), r.stats.row_visits);
    }
    for who in [alice, bob] {
        let bal = wallet.query_view("balanceOf", &[who]).expect("public view");
        println!("balanceOf({who}) = {}", bal.map_or("absent".into(), |t| t[0].to_string()));
    }
    let supply = wallet.query_view("totalSupply", &[]).expect("public view");
    println!("totalSupply = {}", supply.map_or("absent".into(), |t| t[0].to_string()));
}
