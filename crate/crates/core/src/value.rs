//! Column types and runtime values.
//!
//! `Int` and `Uint` are 256-bit; every arithmetic operation is checked and
//! reports an [`ArithFault`] instead of wrapping.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

pub use ethnum::{I256, U256};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Int,
    Uint,
    Bool,
    Address,
}

impl ColumnType {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "int" => Some(ColumnType::Int),
            "uint" => Some(ColumnType::Uint),
            "bool" => Some(ColumnType::Bool),
            "address" => Some(ColumnType::Address),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ColumnType::Int => "int",
            ColumnType::Uint => "uint",
            ColumnType::Bool => "bool",
            ColumnType::Address => "address",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, ColumnType::Int | ColumnType::Uint)
    }

    /// The value a sum or count over an empty group takes.
    pub fn zero(self) -> Value {
        match self {
            ColumnType::Int => Value::Int(I256::ZERO),
            ColumnType::Uint => Value::Uint(U256::ZERO),
            ColumnType::Bool => Value::Bool(false),
            ColumnType::Address => Value::Address(Address::ZERO),
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A 160-bit account identifier.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub const ZERO: Address = Address([0u8; 20]);

    pub fn from_low_u64(v: u64) -> Self {
        let mut bytes = [0u8; 20];
        bytes[12..].copy_from_slice(&v.to_be_bytes());
        Address(bytes)
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0u8; 20]
    }

    /// Interprets an unsigned integer as an address if it fits in 160 bits.
    pub fn from_u256(v: U256) -> Option<Self> {
        let bytes = v.to_be_bytes();
        if bytes[..12].iter().any(|b| *b != 0) {
            return None;
        }
        let mut out = [0u8; 20];
        out.copy_from_slice(&bytes[12..]);
        Some(Address(out))
    }

    /// Full 40-digit lowercase hex form with `0x` prefix.
    pub fn to_full_hex(&self) -> String {
        let mut s = String::with_capacity(42);
        s.push_str("0x");
        for b in self.0 {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }
}

impl FromStr for Address {
    type Err = ValueParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .strip_prefix("0x")
            .or_else(|| s.strip_prefix("0X"))
            .ok_or_else(|| ValueParseError::Address(s.to_string()))?;
        if digits.is_empty() || digits.len() > 40 || !digits.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(ValueParseError::Address(s.to_string()));
        }
        let padded = format!("{digits:0>40}");
        let mut out = [0u8; 20];
        for (i, byte) in out.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&padded[2 * i..2 * i + 2], 16)
                .map_err(|_| ValueParseError::Address(s.to_string()))?;
        }
        Ok(Address(out))
    }
}

/// Compact form: leading zero bytes are dropped, at least one byte is kept.
impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let first = self.0.iter().position(|b| *b != 0).unwrap_or(19);
        f.write_str("0x")?;
        for b in &self.0[first..] {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValueParseError {
    #[error("invalid address literal `{0}`")]
    Address(String),
    #[error("invalid {ty} literal `{text}`")]
    Literal { ty: ColumnType, text: String },
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub enum Value {
    Int(I256),
    Uint(U256),
    Bool(bool),
    Address(Address),
}

impl Value {
    pub fn ty(&self) -> ColumnType {
        match self {
            Value::Int(_) => ColumnType::Int,
            Value::Uint(_) => ColumnType::Uint,
            Value::Bool(_) => ColumnType::Bool,
            Value::Address(_) => ColumnType::Address,
        }
    }

    pub fn int(v: i128) -> Value {
        Value::Int(I256::from(v))
    }

    pub fn uint(v: u128) -> Value {
        Value::Uint(U256::from(v))
    }

    pub fn addr(v: u64) -> Value {
        Value::Address(Address::from_low_u64(v))
    }

    /// Parses a literal of a known column type. Integers are decimal (an
    /// optional leading `-` for `int`), addresses are `0x` hex or the
    /// decimal `0`, booleans are `true` / `false`.
    pub fn parse_typed(ty: ColumnType, text: &str) -> Result<Value, ValueParseError> {
        let bad = || ValueParseError::Literal { ty, text: text.to_string() };
        let text = text.trim();
        match ty {
            ColumnType::Int => I256::from_str_radix(text, 10).map(Value::Int).map_err(|_| bad()),
            ColumnType::Uint => U256::from_str_radix(text, 10).map(Value::Uint).map_err(|_| bad()),
            ColumnType::Bool => match text {
                "true" => Ok(Value::Bool(true)),
                "false" => Ok(Value::Bool(false)),
                _ => Err(bad()),
            },
            ColumnType::Address => {
                if text.starts_with("0x") || text.starts_with("0X") {
                    text.parse().map(Value::Address)
                } else {
                    let v = U256::from_str_radix(text, 10).map_err(|_| bad())?;
                    Address::from_u256(v).map(Value::Address).ok_or_else(bad)
                }
            }
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_uint(&self) -> Option<U256> {
        match self {
            Value::Uint(v) => Some(*v),
            _ => None,
        }
    }

    /// JSON rendering used by scripts and receipts: integers as decimal
    /// strings, addresses as hex strings, booleans as JSON booleans.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Bool(b) => serde_json::Value::Bool(*b),
            other => serde_json::Value::String(other.to_string()),
        }
    }

    pub fn from_json(ty: ColumnType, v: &serde_json::Value) -> Result<Value, ValueParseError> {
        match v {
            serde_json::Value::String(s) => Value::parse_typed(ty, s),
            serde_json::Value::Bool(b) if ty == ColumnType::Bool => Ok(Value::Bool(*b)),
            serde_json::Value::Number(n) => Value::parse_typed(ty, &n.to_string()),
            other => Err(ValueParseError::Literal { ty, text: other.to_string() }),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Uint(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Address(a) => write!(f, "{a}"),
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

// Values of different types never meet at run time (the checker forbids
// it); the type rank only makes the order total.
impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Uint(a), Value::Uint(b)) => a.cmp(b),
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Address(a), Value::Address(b)) => a.cmp(b),
            _ => self.ty().cmp(&other.ty()),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Gt,
    Lt,
    Ge,
    Le,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Gt => ">",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    pub fn eval(self, lhs: &Value, rhs: &Value) -> bool {
        let ord = lhs.cmp(rhs);
        match self {
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Ge => ord != Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ArithFault {
    #[error("integer overflow in {lhs} {op} {rhs}", op = .op.symbol())]
    Overflow { op: ArithOp, lhs: Value, rhs: Value },
    #[error("division by zero")]
    DivisionByZero,
    #[error("arithmetic on non-numeric operands")]
    NotNumeric,
}

/// Checked 256-bit arithmetic. Operands must share a numeric type.
pub fn arith(op: ArithOp, lhs: Value, rhs: Value) -> Result<Value, ArithFault> {
    let overflow = ArithFault::Overflow { op, lhs, rhs };
    match (lhs, rhs) {
        (Value::Int(a), Value::Int(b)) => {
            let r = match op {
                ArithOp::Add => a.checked_add(b),
                ArithOp::Sub => a.checked_sub(b),
                ArithOp::Mul => a.checked_mul(b),
                ArithOp::Div => {
                    if b == I256::ZERO {
                        return Err(ArithFault::DivisionByZero);
                    }
                    a.checked_div(b)
                }
            };
            r.map(Value::Int).ok_or(overflow)
        }
        (Value::Uint(a), Value::Uint(b)) => {
            let r = match op {
                ArithOp::Add => a.checked_add(b),
                ArithOp::Sub => a.checked_sub(b),
                ArithOp::Mul => a.checked_mul(b),
                ArithOp::Div => {
                    if b == U256::ZERO {
                        return Err(ArithFault::DivisionByZero);
                    }
                    a.checked_div(b)
                }
            };
            r.map(Value::Uint).ok_or(overflow)
        }
        _ => Err(ArithFault::NotNumeric),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn address_forms() {
        let a: Address = "0x01".parse().unwrap();
        assert_eq!(a, Address::from_low_u64(1));
        assert_eq!(a.to_string(), "0x01");
        assert_eq!(Address::ZERO.to_string(), "0x00");
        assert_eq!(a.to_full_hex().len(), 42);
        assert!("0x".parse::<Address>().is_err());
        assert!("12".parse::<Address>().is_err());
        assert_eq!(Value::parse_typed(ColumnType::Address, "0").unwrap(), Value::Address(Address::ZERO));
    }

    #[test]
    fn typed_literals() {
        assert_eq!(Value::parse_typed(ColumnType::Int, "-20").unwrap(), Value::int(-20));
        assert!(Value::parse_typed(ColumnType::Uint, "-1").is_err());
        assert_eq!(Value::parse_typed(ColumnType::Bool, "true").unwrap(), Value::Bool(true));
        let j = serde_json::json!("115792089237316195423570985008687907853269984665640564039457584007913129639935");
        assert_eq!(Value::from_json(ColumnType::Uint, &j).unwrap(), Value::Uint(U256::MAX));
    }

    #[test]
    fn checked_arith_faults() {
        assert!(arith(ArithOp::Add, Value::Int(I256::MAX), Value::int(1)).is_err());
        assert!(arith(ArithOp::Sub, Value::uint(1), Value::uint(2)).is_err());
        assert_eq!(arith(ArithOp::Div, Value::int(7), Value::int(0)), Err(ArithFault::DivisionByZero));
        assert!(arith(ArithOp::Div, Value::Int(I256::MIN), Value::int(-1)).is_err());
        assert_eq!(arith(ArithOp::Div, Value::int(-7), Value::int(2)).unwrap(), Value::int(-3));
        assert_eq!(arith(ArithOp::Add, Value::int(1), Value::uint(1)), Err(ArithFault::NotNumeric));
    }
}
