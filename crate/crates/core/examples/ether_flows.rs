//! Contracts that hold and pay out ether: a crowdsale that refunds its
//! investors when the goal is missed, and an open auction. Both run from
//! JSON transaction scripts with embedded expectations.
//!
//! `cargo run --example ether_flows`

use decon::runtime::{parse_script, run_script, Outcome, RunSettings};

fn main() {
    let cases = [
        ("crowdsale", include_str!("crowdsale.dcn"), "crowdsale_success", include_str!("scripts/crowdsale_success.json")),
        ("crowdsale", include_str!("crowdsale.dcn"), "crowdsale_refund", include_str!("scripts/crowdsale_refund.json")),
        ("simple_auction", include_str!("simple_auction.dcn"), "auction_basic", include_str!("scripts/auction_basic.json")),
    ];
    for (contract_name, src, script_name, script) in cases {
        let contract = decon::compile_source(src).expect("contract compiles");
        let script = parse_script(&contract.model, script).expect("script parses");
        let run = run_script(&contract, &script, RunSettings { oracle_check: true, ..Default::default() }).expect("runs");
        println!("{contract_name} / {script_name}:");
        for r in &run.receipts {
            let sends: Vec<String> = r.sends.iter().map(|(to, n)| format!("{n} wei to {to}")).collect();
            let extra = match &r.outcome {
                Outcome::Reverted(reason) => format!(" ({reason})"),
                _ if !sends.is_empty() => format!(", pays {}", sends.join(", ")),
                _ => String::new(),
            };
            println!("  #{:<2} {:<12} {}{extra}", r.index, r.transaction, r.outcome.name());
        }
        println!("  contract balance: {}", run.executor.balance());
        match run.check() {
            Ok(()) => println!("  all expectations met\n"),
            Err(e) => println!("  {e}\n"),
        }
    }
}
