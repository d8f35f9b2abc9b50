//! Random Wallet transactions, with the incrementally maintained state
//! compared after every commit against a from-scratch evaluation of all
//! rules over the committed transaction history.
//!
//! `cargo run --example oracle_check [seed]`

use decon::runtime::{Deployment, ExecOptions, Executor, NaiveOracle, TransactionRequest};
use decon::value::{Address, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let contract = decon::compile_source(include_str!("wallet.dcn")).expect("contract compiles");
    let owner = Address::from_low_u64(0x0a);
    let deploy = Deployment { args: vec![Value::Address(owner)], sender: owner, ..Default::default() };
    let mut ex = Executor::instantiate(&contract, deploy, ExecOptions::default()).expect("deploys");

    let mut oracle = NaiveOracle::new(&contract.model);
    let mut outcomes = std::collections::BTreeMap::<&str, usize>::new();
    for step in 0..300 {
        let who = |rng: &mut ChaCha8Rng| rng.gen_range(1..=6u64);
        let amount = Value::int(rng.gen_range(0..=60));
        let req = match rng.gen_range(0..3) {
            0 => TransactionRequest::new("mint", vec![Value::addr(who(&mut rng)), amount]).from(owner),
            1 => TransactionRequest::new("burn", vec![Value::addr(who(&mut rng)), amount]).from(owner),
            _ => {
                let (s, r) = (who(&mut rng), who(&mut rng));
                TransactionRequest::new("transfer", vec![Value::addr(s), Value::addr(r), amount]).from(Address::from_low_u64(s))
            }
        };
        let receipt = ex.execute(&req).expect("well-formed");
        *outcomes.entry(receipt.outcome.name()).or_default() += 1;
        if receipt.outcome.is_committed() {
            if let Some(diff) = oracle.check(&ex).expect("reference evaluation") {
                println!("step {step}: divergence\n{diff}");
                std::process::exit(1);
            }
        }
    }
    println!("seed {seed}: {outcomes:?}; state matched the reference after every commit");
    for t in ex.tuples("balanceOf") {
        println!("  balanceOf({}) = {}", t[0], t[1]);
    }
}
