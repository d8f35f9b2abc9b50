use std::collections::HashSet;
use std::str::FromStr;

use ethnum::U256;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::{ParseError, ParseErrorKind};
use crate::value::{Address, ArithOp, CmpOp, ColumnType};

/// Parses contract source text, keeping declarations, annotations and rules
/// in source order.
pub fn parse(src: &str) -> Result<SourceProgram, ParseError> {
    let tokens = tokenize(src)?;
    Parser { tokens, pos: 0 }.program()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.tokens[self.pos];
        (t.line, t.column)
    }

    fn advance(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T, ParseError> {
        let (line, column) = self.here();
        Err(ParseError::new(line, column, expected.iter().map(|s| s.to_string()).collect(), self.peek().to_string()))
    }

    fn fail_kind<T>(&self, kind: ParseErrorKind) -> Result<T, ParseError> {
        let (line, column) = self.here();
        Err(ParseError::at(line, column, kind))
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            self.fail(&[&tok.to_string()])
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Tok::Ident(s) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => self.fail(&["identifier"]),
        }
    }

    fn program(mut self) -> Result<SourceProgram, ParseError> {
        let mut program = SourceProgram::default();
        let mut relation_names = HashSet::new();
        let mut rule_ids = HashSet::new();
        loop {
            let (line, column) = self.here();
            match self.peek() {
                Tok::Eof => break,
                Tok::Decl => {
                    self.advance();
                    let decl = self.decl()?;
                    if !relation_names.insert(decl.name.clone()) {
                        return Err(ParseError::at(line, column, ParseErrorKind::DuplicateRelation(decl.name)));
                    }
                    program.decls.push(decl);
                }
                Tok::Public | Tok::Violation => {
                    let kind = if self.advance() == Tok::Public { AnnotationKind::Public } else { AnnotationKind::Violation };
                    loop {
                        let relation = self.ident()?;
                        program.annotations.push(Annotation { kind, relation });
                        if *self.peek() != Tok::Comma {
                            break;
                        }
                        self.advance();
                    }
                }
                Tok::Ident(_) => {
                    let ordinal = program.rules.len() + 1;
                    let rule = self.rule(ordinal)?;
                    if !rule_ids.insert(rule.id.clone()) {
                        return Err(ParseError::at(line, column, ParseErrorKind::DuplicateRule(rule.id)));
                    }
                    program.rules.push(rule);
                }
                _ => return self.fail(&["`.decl`", "`.public`", "`.violation`", "rule"]),
            }
        }
        Ok(program)
    }

    fn decl(&mut self) -> Result<RelationDecl, ParseError> {
        let singleton = if *self.peek() == Tok::Star {
            self.advance();
            true
        } else {
            false
        };
        let name = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut schema = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let col = self.ident()?;
                self.expect(Tok::Colon)?;
                let ty_name = self.ident()?;
                let Some(ty) = ColumnType::from_name(&ty_name) else {
                    self.pos -= 1;
                    return self.fail(&["`int`", "`uint`", "`bool`", "`address`"]);
                };
                schema.push(Column { name: col, ty });
                if *self.peek() != Tok::Comma {
                    break;
                }
                self.advance();
            }
        }
        self.expect(Tok::RParen)?;

        let transaction = name.starts_with(TRANSACTION_PREFIX) || name == "constructor";
        if singleton && transaction {
            return self.fail_kind(ParseErrorKind::InvalidDeclaration(format!(
                "transaction relation `{name}` cannot be a singleton"
            )));
        }
        let kind = if transaction {
            RelationKind::Transaction
        } else if singleton {
            RelationKind::Singleton
        } else {
            RelationKind::Simple
        };

        let mut explicit_keys = false;
        let mut primary_keys: Vec<usize> = match kind {
            RelationKind::Singleton => Vec::new(),
            _ => (0..schema.len()).collect(),
        };
        if *self.peek() == Tok::LBracket {
            let (line, column) = self.here();
            self.advance();
            let malformed = |msg: String| Err(ParseError::at(line, column, ParseErrorKind::MalformedPrimaryKey(msg)));
            if kind != RelationKind::Simple {
                return malformed(format!("`{name}` is not a simple relation and takes no key list"));
            }
            let mut keys = Vec::new();
            loop {
                let Tok::Number(text) = self.peek().clone() else {
                    return self.fail(&["column index"]);
                };
                self.advance();
                let idx: usize = match text.parse() {
                    Ok(i) if i < schema.len() => i,
                    _ => return malformed(format!("index {text} is out of range for arity {}", schema.len())),
                };
                if keys.last().is_some_and(|&prev| prev >= idx) {
                    return malformed("indices must be strictly increasing".into());
                }
                keys.push(idx);
                match self.peek() {
                    Tok::Comma => {
                        self.advance();
                    }
                    Tok::RBracket => break,
                    _ => return self.fail(&["`,`", "`]`"]),
                }
            }
            self.advance();
            explicit_keys = true;
            primary_keys = keys;
        }
        Ok(RelationDecl { name, schema, primary_keys, kind, explicit_keys })
    }

    fn rule(&mut self, ordinal: usize) -> Result<RuleDecl, ParseError> {
        let (id, labeled) = if matches!(self.peek_at(1), Tok::Colon) {
            let id = self.ident()?;
            self.advance();
            (id, true)
        } else {
            (format!("rule_{ordinal}"), false)
        };
        let head = self.atom(false)?;
        self.expect(Tok::ColonDash)?;
        let mut body = vec![self.literal()?];
        while *self.peek() == Tok::Comma {
            self.advance();
            body.push(self.literal()?);
        }
        self.expect(Tok::Dot)?;
        Ok(RuleDecl { id, labeled, head, body })
    }

    fn atom(&mut self, allow_wildcard: bool) -> Result<Atom, ParseError> {
        let relation = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                if !allow_wildcard && matches!(self.peek(), Tok::Ident(s) if s == "_") {
                    return self.fail(&["variable", "constant"]);
                }
                args.push(self.term()?);
                if *self.peek() != Tok::Comma {
                    break;
                }
                self.advance();
            }
        }
        self.expect(Tok::RParen)?;
        Ok(Atom { relation, args })
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let negative = if *self.peek() == Tok::Minus {
            self.advance();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Number(text) => {
                let Ok(magnitude) = U256::from_str_radix(&text, 10) else {
                    return self.fail_kind(ParseErrorKind::LiteralOutOfRange(text));
                };
                self.advance();
                let negative = negative && magnitude != U256::ZERO;
                Ok(Term::Const(Constant::Number { negative, magnitude }))
            }
            _ if negative => self.fail(&["integer literal"]),
            Tok::Hex(text) => match Address::from_str(&text) {
                Ok(a) => {
                    self.advance();
                    Ok(Term::Const(Constant::Address(a)))
                }
                Err(_) => self.fail_kind(ParseErrorKind::LiteralOutOfRange(text)),
            },
            Tok::Ident(name) => {
                self.advance();
                Ok(match name.as_str() {
                    "_" => Term::Wildcard,
                    "true" => Term::Const(Constant::Bool(true)),
                    "false" => Term::Const(Constant::Bool(false)),
                    _ => Term::Var(name),
                })
            }
            _ => self.fail(&["variable", "`_`", "constant"]),
        }
    }

    fn cmp_op(&self) -> Option<CmpOp> {
        Some(match self.peek() {
            Tok::Gt => CmpOp::Gt,
            Tok::Lt => CmpOp::Lt,
            Tok::Ge => CmpOp::Ge,
            Tok::Le => CmpOp::Le,
            Tok::EqEq => CmpOp::Eq,
            Tok::NotEq => CmpOp::Ne,
            _ => return None,
        })
    }

    fn arith_op(&self) -> Option<ArithOp> {
        Some(match self.peek() {
            Tok::Plus => ArithOp::Add,
            Tok::Minus => ArithOp::Sub,
            Tok::Star => ArithOp::Mul,
            Tok::Slash => ArithOp::Div,
            _ => return None,
        })
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        if let Tok::Ident(name) = self.peek().clone() {
            match self.peek_at(1) {
                Tok::LParen => return Ok(Literal::Relational(self.atom(true)?)),
                Tok::ColonEq | Tok::Assign => {
                    let spelling = if *self.peek_at(1) == Tok::ColonEq { AssignSpelling::ColonEq } else { AssignSpelling::Eq };
                    self.advance();
                    self.advance();
                    return self.assignment(name, spelling);
                }
                _ => {}
            }
        }
        let lhs = self.term()?;
        let Some(op) = self.cmp_op() else {
            return self.fail(&["`>`", "`<`", "`>=`", "`<=`", "`==`", "`!=`"]);
        };
        self.advance();
        let rhs = self.term()?;
        Ok(Literal::Condition { lhs, op, rhs })
    }

    fn assignment(&mut self, target: String, spelling: AssignSpelling) -> Result<Literal, ParseError> {
        if spelling == AssignSpelling::Eq {
            if let (Tok::Ident(agg), Tok::Ident(_), Tok::Colon) = (self.peek().clone(), self.peek_at(1), self.peek_at(2)) {
                if let Some(agg) = AggKind::from_name(&agg) {
                    self.advance();
                    let bound = self.ident()?;
                    self.advance();
                    let over = self.atom(true)?;
                    return Ok(Literal::Aggregation { target, agg, bound, over });
                }
            }
        }
        let lhs = self.term()?;
        let Some(op) = self.arith_op() else {
            return self.fail(&["`+`", "`-`", "`*`", "`/`"]);
        };
        self.advance();
        let rhs = self.term()?;
        Ok(Literal::Function { target, op, lhs, rhs, spelling })
    }
}
