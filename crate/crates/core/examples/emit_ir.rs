//! Prints the update functions the compiler derives for the Wallet: one
//! per (rule, body literal, insert/delete) triple, plus the rederivation
//! plans used to decide whether a retracted tuple still holds.
//!
//! `cargo run --example emit_ir`

fn main() {
    let contract = decon::compile_source(include_str!("wallet.dcn")).expect("wallet compiles");
    print!("{}", decon::ir::dump(&contract));
}
