use std::fmt::Write;

use super::ast::*;

pub fn format_term(term: &Term) -> String {
    match term {
        Term::Var(v) => v.clone(),
        Term::Wildcard => "_".into(),
        Term::Const(Constant::Number { negative, magnitude }) => {
            format!("{}{magnitude}", if *negative { "-" } else { "" })
        }
        Term::Const(Constant::Bool(b)) => b.to_string(),
        Term::Const(Constant::Address(a)) => a.to_string(),
    }
}

pub fn format_atom(atom: &Atom) -> String {
    let args: Vec<_> = atom.args.iter().map(format_term).collect();
    format!("{}({})", atom.relation, args.join(", "))
}

pub fn format_literal(lit: &Literal) -> String {
    match lit {
        Literal::Relational(a) => format_atom(a),
        Literal::Condition { lhs, op, rhs } => format!("{} {} {}", format_term(lhs), op.symbol(), format_term(rhs)),
        Literal::Function { target, op, lhs, rhs, spelling } => {
            let assign = match spelling {
                AssignSpelling::ColonEq => ":=",
                AssignSpelling::Eq => "=",
            };
            format!("{target} {assign} {} {} {}", format_term(lhs), op.symbol(), format_term(rhs))
        }
        Literal::Aggregation { target, agg, bound, over } => {
            format!("{target} = {} {bound}: {}", agg.name(), format_atom(over))
        }
    }
}

pub fn format_rule(rule: &RuleDecl) -> String {
    let body: Vec<_> = rule.body.iter().map(format_literal).collect();
    let label = if rule.labeled { format!("{}: ", rule.id) } else { String::new() };
    format!("{label}{} :- {}.", format_atom(&rule.head), body.join(", "))
}

/// Canonical text for a program: declarations, then annotations, then rules,
/// each block separated by a blank line.
pub fn format_program(program: &SourceProgram) -> String {
    let mut blocks = Vec::new();
    if !program.decls.is_empty() {
        let mut out = String::new();
        for d in &program.decls {
            let star = if d.kind == RelationKind::Singleton { "*" } else { "" };
            let cols: Vec<_> = d.schema.iter().map(|c| format!("{}: {}", c.name, c.ty)).collect();
            write!(out, ".decl {star}{}({})", d.name, cols.join(", ")).unwrap();
            if d.explicit_keys {
                let keys: Vec<_> = d.primary_keys.iter().map(|k| k.to_string()).collect();
                write!(out, "[{}]", keys.join(", ")).unwrap();
            }
            out.push('\n');
        }
        blocks.push(out);
    }
    if !program.annotations.is_empty() {
        let mut out = String::new();
        for a in &program.annotations {
            let kw = match a.kind {
                AnnotationKind::Public => ".public",
                AnnotationKind::Violation => ".violation",
            };
            writeln!(out, "{kw} {}", a.relation).unwrap();
        }
        blocks.push(out);
    }
    if !program.rules.is_empty() {
        let mut out = String::new();
        for r in &program.rules {
            writeln!(out, "{}", format_rule(r)).unwrap();
        }
        blocks.push(out);
    }
    blocks.join("\n")
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    #[test]
    fn empty_and_single_decl() {
        assert_eq!(format_program(&SourceProgram::default()), "");
        let p = parse(".decl balanceOf(p:address,n:int)[0]").unwrap();
        assert_eq!(format_program(&p), ".decl balanceOf(p: address, n: int)[0]\n");
    }

    #[test]
    fn round_trip() {
        let src = ".decl *owner(p: address)\n.public owner, x\nr2': a(x, -3) :- b(x, _), y := x + 1, z = x / 2, s = min v: c(x, v), x == 0x01, true != false.\nq(x) :- b(x, 0).";
        let p = parse(src).unwrap();
        let text = format_program(&p);
        assert_eq!(parse(&text).unwrap(), p);
        assert_eq!(format_program(&parse(&text).unwrap()), text);
        assert!(text.contains("q(x) :- b(x, 0)."));
        assert!(text.contains("r2': a(x, -3)"));
    }
}
