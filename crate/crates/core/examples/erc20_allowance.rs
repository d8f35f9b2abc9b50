//! An allowance that is smaller than expected. spentTotal in the buggy
//! ERC20 sums a spender's transfers across every owner, so spending on
//! one owner's behalf eats into the allowance granted by another.
//!
//! `cargo run --example erc20_allowance`

use decon::provenance::{explain, record_mode, render_text};
use decon::runtime::{Deployment, ExecOptions, Executor, Fact, TransactionRequest};
use decon::value::{Address, Value};

fn run(src: &str) -> Executor {
    let contract = record_mode(&decon::compile_source(src).expect("contract compiles"));
    let owner = Address::from_low_u64(0x0a);
    let deploy = Deployment { args: vec![Value::Address(owner)], sender: owner, ..Default::default() };
    let mut ex = Executor::instantiate(&contract, deploy, ExecOptions::default()).expect("deploys");
    let (a, b, s, r) = (0xa1, 0xb1, 0x5a, 0xe1);
    let steps: [(&str, u64, Vec<Value>); 6] = [
        ("mint", 0x0a, vec![Value::addr(a), Value::uint(500)]),
        ("mint", 0x0a, vec![Value::addr(b), Value::uint(500)]),
        ("approve", a, vec![Value::addr(s), Value::uint(100)]),
        ("approve", b, vec![Value::addr(s), Value::uint(100)]),
        ("transferFrom", s, vec![Value::addr(b), Value::addr(r), Value::uint(90)]),
        ("transferFrom", s, vec![Value::addr(a), Value::addr(b), Value::uint(20)]),
    ];
    for (name, sender, args) in steps {
        let req = TransactionRequest::new(name, args).from(Address::from_low_u64(sender));
        let receipt = ex.execute(&req).expect("well-formed");
        println!("  {name} from {sender:#04x}: {}", receipt.outcome.name());
    }
    ex
}

fn main() {
    let allowance = |ex: &Executor| ex.query_view("allowance", &[Value::addr(0xa1), Value::addr(0x5a)]).unwrap();
    println!("correct contract:");
    let good = run(include_str!("erc20.dcn"));
    println!("  allowance(0xa1, 0x5a) = {:?}", allowance(&good));
    println!("buggy contract:");
    let buggy = run(include_str!("erc20_buggy.dcn"));
    println!("  allowance(0xa1, 0x5a) = {:?}\n", allowance(&buggy));
    let fact = Fact::new("allowance", vec![Value::addr(0xa1), Value::addr(0x5a), Value::uint(10)]);
    let tree = explain(buggy.provenance(), &fact).expect("derived");
    // spentTotal(a,s,90) is backed by b's transfer, not by any of a's.
    print!("{}", render_text(&tree));
}
