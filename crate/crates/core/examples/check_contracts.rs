//! Parses and validates every bundled contract, then prints its public
//! interface and any warnings.
//!
//! `cargo run --example check_contracts`

use decon::analysis::FunctionKind;
use decon::compile_source;

const CONTRACTS: &[(&str, &str)] = &[
    ("wallet", include_str!("wallet.dcn")),
    ("wallet_buggy", include_str!("wallet_buggy.dcn")),
    ("wallet_supply", include_str!("wallet_supply.dcn")),
    ("erc20", include_str!("erc20.dcn")),
    ("erc20_buggy", include_str!("erc20_buggy.dcn")),
    ("erc721", include_str!("erc721.dcn")),
    ("erc721_buggy", include_str!("erc721_buggy.dcn")),
    ("crowdsale", include_str!("crowdsale.dcn")),
    ("simple_auction", include_str!("simple_auction.dcn")),
];

fn main() {
    for (name, src) in CONTRACTS {
        let contract = match compile_source(src) {
            Ok(c) => c,
            Err(e) => {
                println!("{name}: {e}");
                continue;
            }
        };
        let m = &contract.model;
        println!(
            "{name}: {} relations, {} rules, {} update functions",
            m.relations.len(),
            m.rules.len(),
            contract.functions.len()
        );
        for f in &contract.interface {
            let kind = match f.kind {
                FunctionKind::Transaction => "tx  ",
                _ => "view",
            };
            let params: Vec<String> = f.params.iter().map(|c| format!("{}: {}", c.name, c.ty)).collect();
            let results: Vec<String> = f.results.iter().map(|c| format!("{}: {}", c.name, c.ty)).collect();
            println!("  {kind} {}({}) -> ({})", f.name, params.join(", "), results.join(", "));
        }
        for w in &m.warnings {
            println!("  warning: {w}");
        }
    }
}
