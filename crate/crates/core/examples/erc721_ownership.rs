//! Token ownership derived from the latest transfer, and an approval that
//! outlives a change of owner in the buggy variant.
//!
//! `cargo run --example erc721_ownership`

use decon::provenance::{explain, record_mode, render_text};
use decon::runtime::{Deployment, ExecOptions, Executor, Fact, TransactionRequest};
use decon::value::{Address, Value, U256};

fn deploy(src: &str) -> Executor {
    let contract = record_mode(&decon::compile_source(src).expect("contract compiles"));
    let minter = Address::from_low_u64(0x0a);
    let deploy = Deployment { args: vec![Value::Address(minter)], sender: minter, ..Default::default() };
    Executor::instantiate(&contract, deploy, ExecOptions::default()).expect("deploys")
}

fn call(ex: &mut Executor, name: &str, sender: u64, at: u64, args: Vec<Value>) {
    let req = TransactionRequest::new(name, args).from(Address::from_low_u64(sender)).at(U256::from(at));
    let r = ex.execute(&req).expect("well-formed");
    println!("  t={at:<2} {name} by {sender:#04x}: {}", r.outcome.name());
}

fn main() {
    let token = Value::uint(7);
    let mut ex = deploy(include_str!("erc721.dcn"));
    println!("lifecycle of token 7:");
    call(&mut ex, "mint", 0x0a, 1, vec![Value::addr(0xa1), token]);
    call(&mut ex, "transfer", 0xa1, 5, vec![Value::addr(0xb1), token]);
    println!("  ownerOf = {:?}, exists = {:?}", ex.query_view("ownerOf", &[token]).unwrap(), ex.query_view("exists", &[token]).unwrap());
    call(&mut ex, "burn", 0xb1, 9, vec![token]);
    println!("  ownerOf = {:?}, exists = {:?}, tokenNoOwner = {:?}\n",
        ex.query_view("ownerOf", &[token]).unwrap(),
        ex.query_view("exists", &[token]).unwrap(),
        ex.tuples("tokenNoOwner"));

    let token = Value::uint(8);
    let stale = [
        ("mint", 0x0a, 1, vec![Value::addr(0xb1), token]),
        ("approve", 0xb1, 2, vec![Value::addr(0x5a), token]),
        ("transfer", 0xb1, 3, vec![Value::addr(0xa1), token]),
        ("transferFrom", 0x5a, 4, vec![Value::addr(0x5a), Value::addr(0xa1), Value::addr(0xe1), token]),
    ];
    for (label, src) in [("corrected", include_str!("erc721.dcn")), ("buggy", include_str!("erc721_buggy.dcn"))] {
        println!("{label} approvals:");
        let mut ex = deploy(src);
        for (name, sender, at, args) in stale.clone() {
            call(&mut ex, name, sender, at, args);
        }
        if label == "buggy" {
            let moved = Fact::new("transferFrom", vec![Value::addr(0x5a), Value::addr(0xa1), Value::addr(0xe1), token, Value::uint(4)]);
            let tree = explain(ex.provenance(), &moved).expect("committed transfer");
            let approved = Fact::new("approved", vec![token, Value::addr(0x5a)]);
            let why = tree.child(&approved).expect("approval read by r4");
            println!("\nwhy was 0x5a approved?");
            print!("{}", render_text(why));
        }
    }
}
