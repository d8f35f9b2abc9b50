use std::fmt::Write;

use super::{AssignMode, CompiledContract, Seed, SeedArg, Stmt};
use crate::analysis::Operand;

fn seed_text(seed: &Seed) -> String {
    let args: Vec<String> = seed
        .args
        .iter()
        .map(|a| match a {
            SeedArg::Bind(v) | SeedArg::Equal(v) => v.clone(),
            SeedArg::Const(c) => c.to_string(),
            SeedArg::Ignore => "_".into(),
        })
        .collect();
    format!("{}({})", seed.relation, args.join(", "))
}

fn constraints_text(constraints: &[(usize, Operand)]) -> String {
    constraints.iter().map(|(c, o)| format!("#{c} == {o}")).collect::<Vec<_>>().join(", ")
}

fn binds_text(binds: &[(usize, String)]) -> String {
    binds.iter().map(|(c, v)| format!("{v} = #{c}")).collect::<Vec<_>>().join(", ")
}

pub(crate) fn stmt_line(s: &Stmt) -> String {
    match s {
        Stmt::Search { relation, constraints, binds, same, first_only, .. } => {
            let mut line = format!("search {relation}");
            if !constraints.is_empty() {
                write!(line, " where {}", constraints_text(constraints)).unwrap();
            }
            for (a, b) in same {
                write!(line, " and #{a} == #{b}").unwrap();
            }
            if !binds.is_empty() {
                write!(line, " bind {}", binds_text(binds)).unwrap();
            }
            if *first_only {
                line.push_str(" first");
            }
            line
        }
        Stmt::If { lhs, op, rhs, .. } => format!("if {lhs} {} {rhs}", op.symbol()),
        Stmt::Bind { var, value, .. } => format!("let {var} = {value}"),
        Stmt::Assign { var, op, lhs, rhs, mode, .. } => match mode {
            AssignMode::Bind => format!("let {var} = {lhs} {} {rhs}", op.symbol()),
            AssignMode::Check => format!("check {var} == {lhs} {} {rhs}", op.symbol()),
        },
        Stmt::AggAssign { var, agg, cache, relation, constraints, group_binds, empty_is_zero, mode, .. } => {
            let verb = match mode {
                AssignMode::Bind => "let",
                AssignMode::Check => "check",
            };
            let mut line = format!("{verb} {var} = {} {relation} cache {cache}", agg.name());
            if !constraints.is_empty() {
                write!(line, " where {}", constraints_text(constraints)).unwrap();
            }
            if !group_binds.is_empty() {
                write!(line, " group {}", binds_text(group_binds)).unwrap();
            }
            if *empty_is_zero {
                line.push_str(" empty 0");
            }
            line
        }
        Stmt::Insert(h) => format!("insert {h}"),
        Stmt::Delete(h) => format!("delete {h}"),
    }
}

fn write_nest(out: &mut String, stmt: &Stmt, indent: usize) {
    for (depth, s) in stmt.chain().into_iter().enumerate() {
        writeln!(out, "{}{}", "  ".repeat(indent + depth), stmt_line(s)).unwrap();
    }
}

/// Indented text form of the compiled contract, stable across runs.
pub fn dump(contract: &CompiledContract) -> String {
    let mut out = String::new();
    let materialized: Vec<&str> = contract.materialized().iter().map(String::as_str).collect();
    writeln!(out, "materialized: {}", materialized.join(", ")).unwrap();
    writeln!(out, "violations: {}", contract.violations().join(", ")).unwrap();
    for (i, c) in contract.agg_caches.iter().enumerate() {
        let value = c.value_col.map(|v| format!(" value #{v}")).unwrap_or_default();
        let groups: Vec<String> = c.group_cols.iter().map(|g| format!("#{g}")).collect();
        writeln!(out, "cache {i}: {:?} {} by [{}]{value}", c.kind, c.relation, groups.join(", ")).unwrap();
    }
    for j in &contract.join_indexes {
        let cols: Vec<String> = j.constrained.iter().map(|g| format!("#{g}")).collect();
        writeln!(out, "index {} on [{}]", j.relation, cols.join(", ")).unwrap();
    }
    for f in &contract.functions {
        writeln!(out, "\nfunction {} (rule {}, literal {})", f.name, f.rule, f.occurrence).unwrap();
        writeln!(out, "  on {} {}", f.trigger.kind.name().to_lowercase(), seed_text(&f.seed)).unwrap();
        write_nest(&mut out, &f.body, 2);
    }
    for p in contract.rederive.values() {
        writeln!(out, "\nrederive {}", p.rule).unwrap();
        writeln!(out, "  for {}", seed_text(&p.seed)).unwrap();
        write_nest(&mut out, &p.body, 2);
    }
    out
}
