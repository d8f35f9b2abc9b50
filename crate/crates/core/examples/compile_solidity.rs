//! Emits Solidity for the Wallet, with and without the violation check.
//!
//! `cargo run --example compile_solidity [out_dir]`

use decon::backend::{emit, EmitOptions};

fn main() {
    let contract = decon::compile_source(include_str!("wallet.dcn")).expect("wallet compiles");
    let checked = EmitOptions { contract_name: "Wallet".into(), ..Default::default() };
    let plain = EmitOptions { instrument_violations: false, contract_name: "WalletUnchecked".into(), ..Default::default() };
    let a = emit(&contract, &checked).expect("emit");
    let b = emit(&contract, &plain).expect("emit");
    match std::env::args().nth(1) {
        Some(dir) => {
            let dir = std::path::Path::new(&dir);
            std::fs::create_dir_all(dir).expect("create output directory");
            std::fs::write(dir.join("Wallet.sol"), &a.source).expect("write");
            std::fs::write(dir.join("WalletUnchecked.sol"), &b.source).expect("write");
            println!("wrote {}", dir.display());
        }
        None => print!("{}", a.source),
    }
    eprintln!("checked: {} lines, unchecked: {} lines", a.source.lines().count(), b.source.lines().count());
    for f in &a.interface {
        eprintln!("  {}", f.name);
    }
}
