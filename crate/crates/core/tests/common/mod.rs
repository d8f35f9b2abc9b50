//! Contracts and random transaction generators shared by the integration
//! tests.

#![allow(dead_code)]

use decon::ir::CompiledContract;
use decon::runtime::{Deployment, Executor, TransactionRequest};
use decon::value::{Address, Value, I256, U256};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const WALLET: &str = include_str!("../../examples/wallet.dcn");
pub const WALLET_BUGGY: &str = include_str!("../../examples/wallet_buggy.dcn");
pub const WALLET_SUPPLY: &str = include_str!("../../examples/wallet_supply.dcn");
pub const ERC20: &str = include_str!("../../examples/erc20.dcn");
pub const ERC20_BUGGY: &str = include_str!("../../examples/erc20_buggy.dcn");
pub const ERC721: &str = include_str!("../../examples/erc721.dcn");
pub const ERC721_BUGGY: &str = include_str!("../../examples/erc721_buggy.dcn");
pub const CROWDSALE: &str = include_str!("../../examples/crowdsale.dcn");
pub const SIMPLE_AUCTION: &str = include_str!("../../examples/simple_auction.dcn");

pub const OWNER: u64 = 0x0a;
pub const BENEFICIARY: u64 = 0x0b;
/// Ordinary accounts.
pub const USERS: std::ops::RangeInclusive<u64> = 1..=6;
pub const AUCTION_END: u64 = 40;

pub fn compile(src: &str) -> CompiledContract {
    decon::compile_source(src).expect("bundled contract compiles")
}

pub fn addr(v: u64) -> Address {
    Address::from_low_u64(v)
}

pub fn owner_deployment() -> Deployment {
    Deployment { args: vec![Value::Address(addr(OWNER))], sender: addr(OWNER), ..Default::default() }
}

fn user(rng: &mut ChaCha8Rng) -> u64 {
    rng.gen_range(USERS)
}

/// Mostly `preferred`, sometimes a random user.
fn usually(rng: &mut ChaCha8Rng, preferred: u64) -> u64 {
    if rng.gen_bool(0.85) {
        preferred
    } else {
        user(rng)
    }
}

fn req(name: &str, args: Vec<Value>, sender: u64) -> TransactionRequest {
    TransactionRequest::new(name, args).from(addr(sender))
}

/// A bundled contract with a generator of plausible transactions.
pub struct Bench {
    pub name: &'static str,
    pub source: &'static str,
    pub deploy: fn(&mut ChaCha8Rng) -> Deployment,
    /// Next request given the current state and the step number. Steps
    /// are used as strictly increasing timestamps.
    pub next: fn(&Executor, &mut ChaCha8Rng, u64) -> TransactionRequest,
}

pub fn benches() -> Vec<Bench> {
    vec![
        Bench { name: "Wallet", source: WALLET, deploy: |_| owner_deployment(), next: wallet_tx },
        Bench { name: "Crowdsale", source: CROWDSALE, deploy: crowdsale_deploy, next: crowdsale_tx },
        Bench { name: "SimpleAuction", source: SIMPLE_AUCTION, deploy: auction_deploy, next: auction_tx },
        Bench { name: "ERC20", source: ERC20, deploy: |_| owner_deployment(), next: erc20_tx },
        Bench { name: "ERC721", source: ERC721, deploy: |_| owner_deployment(), next: erc721_tx },
    ]
}

pub fn wallet_tx(_: &Executor, rng: &mut ChaCha8Rng, _step: u64) -> TransactionRequest {
    let amount = Value::int(rng.gen_range(0..=80));
    match rng.gen_range(0..10) {
        0..=2 => req("mint", vec![Value::Address(addr(user(rng))), amount], usually(rng, OWNER)),
        3..=4 => req("burn", vec![Value::Address(addr(user(rng))), amount], usually(rng, OWNER)),
        _ => {
            let (s, r) = (user(rng), rng.gen_range(0..=6));
            req("transfer", vec![Value::Address(addr(s)), Value::Address(addr(r)), amount], usually(rng, s))
        }
    }
}

pub fn erc20_tx(_: &Executor, rng: &mut ChaCha8Rng, _step: u64) -> TransactionRequest {
    let amount = Value::uint(rng.gen_range(0..=80));
    let (a, b) = (Value::Address(addr(user(rng))), Value::Address(addr(rng.gen_range(0..=6))));
    match rng.gen_range(0..10) {
        0..=1 => req("mint", vec![a, amount], usually(rng, OWNER)),
        2..=3 => req("transfer", vec![b, amount], user(rng)),
        4..=5 => req("approve", vec![b, amount], user(rng)),
        _ => req("transferFrom", vec![a, b, amount], user(rng)),
    }
}

fn owner_of(ex: &Executor, token: Value) -> Option<u64> {
    let row = ex.query_view("ownerOf", &[token]).ok()??;
    match row[0] {
        Value::Address(a) => Some(u64::from_be_bytes(a.0[12..].try_into().expect("8 bytes"))),
        _ => None,
    }
}

pub fn erc721_tx(ex: &Executor, rng: &mut ChaCha8Rng, step: u64) -> TransactionRequest {
    let token = Value::uint(rng.gen_range(1..=6));
    let holder = owner_of(ex, token).unwrap_or_else(|| user(rng));
    let other = Value::Address(addr(rng.gen_range(0..=6)));
    let r = match rng.gen_range(0..10) {
        0..=1 => req("mint", vec![other, token], usually(rng, OWNER)),
        2..=3 => req("transfer", vec![other, token], usually(rng, holder)),
        4 => req("burn", vec![token], usually(rng, holder)),
        5..=6 => req("approve", vec![Value::Address(addr(user(rng))), token], usually(rng, holder)),
        _ => {
            let op = user(rng);
            let from = if rng.gen_bool(0.8) { holder } else { user(rng) };
            req("transferFrom", vec![Value::Address(addr(op)), Value::Address(addr(from)), other, token], op)
        }
    };
    r.at(U256::from(step + 1))
}

fn crowdsale_deploy(rng: &mut ChaCha8Rng) -> Deployment {
    Deployment {
        args: vec![Value::Address(addr(BENEFICIARY)), Value::uint(rng.gen_range(100..=600))],
        sender: addr(OWNER),
        ..Default::default()
    }
}

pub fn crowdsale_tx(_: &Executor, rng: &mut ChaCha8Rng, step: u64) -> TransactionRequest {
    match rng.gen_range(0..20) {
        0..=11 => req("invest", vec![], user(rng)).value(U256::from(rng.gen_range(0..=80u64))),
        12 if step > 15 => req("close", vec![], usually(rng, OWNER)),
        13..=14 => req("withdraw", vec![], usually(rng, BENEFICIARY)),
        _ => req("claimRefund", vec![], user(rng)),
    }
}

fn auction_deploy(_: &mut ChaCha8Rng) -> Deployment {
    Deployment {
        args: vec![Value::Address(addr(BENEFICIARY)), Value::uint(AUCTION_END as u128)],
        sender: addr(OWNER),
        ..Default::default()
    }
}

pub fn auction_tx(ex: &Executor, rng: &mut ChaCha8Rng, step: u64) -> TransactionRequest {
    let highest = ex
        .query_view("highestBid", &[])
        .ok()
        .flatten()
        .and_then(|t| t[0].as_uint())
        .map_or(0u64, |v| v.as_u64());
    let r = match rng.gen_range(0..10) {
        0..=5 => {
            let bid = if rng.gen_bool(0.8) { highest + rng.gen_range(1..=20) } else { rng.gen_range(0..=highest + 1) };
            req("bid", vec![], user(rng)).value(U256::from(bid))
        }
        6..=8 => req("withdraw", vec![], user(rng)),
        _ => req("auctionEnd", vec![], user(rng)),
    };
    r.at(U256::from(step + 1))
}

/// A Wallet amount close to the top of the signed range.
pub fn huge_int(rng: &mut ChaCha8Rng) -> Value {
    let shift = rng.gen_range(250u32..=254);
    Value::Int(I256::ONE << shift)
}
