//! Recursive-descent parser for `.dp` programs. The expression and domain
//! rules are shared with the causal model reader.

use super::ast::{BinaryOp, DecisionProgram, Expr, Param, Stmt, UnaryOp};
use super::lexer::{tokenize, Tok, Token};
use crate::error::{Error, Result};
use crate::rational::{self, Rational};
use crate::spaces::Domain;

pub const KEYWORDS: [&str; 11] = [
    "program", "const", "let", "if", "then", "else", "return", "true", "false", "bg", "protected",
];

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    origin: String,
}

impl Parser {
    pub fn new(src: &str, origin: &str) -> Result<Self> {
        Ok(Parser {
            toks: tokenize(src, origin)?,
            pos: 0,
            origin: origin.to_string(),
        })
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if !matches!(t.tok, Tok::Eof) {
            self.pos += 1;
        }
        t
    }

    pub fn error(&self, message: impl Into<String>, expected: &[&str]) -> Error {
        let t = &self.toks[self.pos];
        Error::Syntax {
            origin: self.origin.clone(),
            line: t.line,
            column: t.column,
            message: message.into(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn unexpected(&self, expected: &[&str]) -> Error {
        self.error(format!("unexpected {}", self.peek()), expected)
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    pub fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.advance();
            true
        } else {
            false
        }
    }

    pub fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.unexpected(&[&format!("`{s}`")]))
        }
    }

    pub fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    pub fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    pub fn expect_kw(&mut self, kw: &str) -> Result<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&[&format!("`{kw}`")]))
        }
    }

    pub fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                let name = name.clone();
                self.advance();
                Ok(name)
            }
            _ => Err(self.unexpected(&["an identifier"])),
        }
    }

    pub fn int(&mut self) -> Result<i64> {
        let negative = self.eat_sym("-");
        match self.peek().clone() {
            Tok::Number(text) if !text.contains('.') => {
                let value: i64 = text
                    .parse()
                    .map_err(|_| self.error(format!("integer literal {text} is too large"), &["an integer"]))?;
                self.advance();
                Ok(if negative { -value } else { value })
            }
            _ => Err(self.unexpected(&["an integer"])),
        }
    }

    /// `3/10`, `0.3`, or `1`.
    pub fn rational(&mut self) -> Result<Rational> {
        let text = match self.peek().clone() {
            Tok::Number(text) => {
                self.advance();
                text
            }
            _ => return Err(self.unexpected(&["a probability"])),
        };
        if self.eat_sym("/") {
            let denom = self.int()?;
            return rational::parse(&format!("{text}/{denom}"))
                .map_err(|_| self.error("invalid fraction", &["a nonzero denominator"]));
        }
        rational::parse(&text).map_err(|_| self.error("invalid probability", &["a probability"]))
    }

    /// `[lo, hi]` or `{v1, v2, ...}`.
    pub fn domain(&mut self) -> Result<Domain> {
        if self.eat_sym("[") {
            let lo = self.int()?;
            self.expect_sym(",")?;
            let hi = self.int()?;
            self.expect_sym("]")?;
            return Domain::range(lo, hi).map_err(|e| self.error(e.to_string(), &["a non-empty range"]));
        }
        if self.eat_sym("{") {
            let mut values = vec![self.int()?];
            while self.eat_sym(",") {
                values.push(self.int()?);
            }
            self.expect_sym("}")?;
            return Domain::set(values).map_err(|e| self.error(e.to_string(), &["distinct values"]));
        }
        Err(self.unexpected(&["`[`", "`{`"]))
    }

    pub fn program(&mut self) -> Result<DecisionProgram> {
        let mut consts: Vec<(String, i64)> = Vec::new();
        while self.eat_kw("const") {
            let name = self.ident()?;
            if consts.iter().any(|(n, _)| *n == name) {
                return Err(self.error(format!("constant `{name}` declared twice"), &["a new name"]));
            }
            self.expect_sym("=")?;
            let value = self.int()?;
            self.expect_sym(";")?;
            consts.push((name, value));
        }
        self.expect_kw("program")?;
        let name = self.ident()?;
        self.expect_sym("(")?;
        let mut params = Vec::new();
        if !self.is_sym(")") {
            loop {
                let pname = self.ident()?;
                let domain = if self.eat_sym(":") { Some(self.domain()?) } else { None };
                params.push(Param { name: pname, domain });
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        let body = self.block()?;
        if !self.at_eof() {
            return Err(self.unexpected(&["end of input"]));
        }
        Ok(DecisionProgram {
            name,
            consts,
            params,
            body,
        })
    }

    fn block(&mut self) -> Result<Vec<Stmt>> {
        self.expect_sym("{")?;
        let mut stmts = Vec::new();
        while !self.eat_sym("}") {
            if self.at_eof() {
                return Err(self.unexpected(&["`}`"]));
            }
            stmts.push(self.stmt()?);
        }
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt> {
        if self.eat_kw("return") {
            let e = self.expr()?;
            self.expect_sym(";")?;
            return Ok(Stmt::Return(e));
        }
        if self.eat_kw("if") {
            return self.if_tail();
        }
        self.eat_kw("let");
        let name = match self.ident() {
            Ok(name) => name,
            Err(_) => return Err(self.unexpected(&["`return`", "`if`", "`let`", "an identifier"])),
        };
        self.expect_sym("=")?;
        let value = self.expr()?;
        self.expect_sym(";")?;
        Ok(Stmt::Assign { name, value })
    }

    fn if_tail(&mut self) -> Result<Stmt> {
        let cond = self.expr()?;
        let then_branch = self.block()?;
        let else_branch = if self.eat_kw("else") {
            if self.eat_kw("if") {
                vec![self.if_tail()?]
            } else {
                self.block()?
            }
        } else {
            Vec::new()
        };
        Ok(Stmt::If {
            cond,
            then_branch,
            else_branch,
        })
    }

    pub fn expr(&mut self) -> Result<Expr> {
        if self.eat_kw("if") {
            let c = self.expr()?;
            self.expect_kw("then")?;
            let a = self.expr()?;
            self.expect_kw("else")?;
            let b = self.expr()?;
            return Ok(Expr::ite(c, a, b));
        }
        self.binary(1)
    }

    fn peek_binop(&self) -> Option<BinaryOp> {
        match self.peek() {
            Tok::Sym(s) => BinaryOp::ALL.into_iter().find(|op| op.symbol() == *s),
            _ => None,
        }
    }

    /// Precedence climbing; comparisons do not chain.
    fn binary(&mut self, min_prec: u8) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.advance();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
            if op.is_comparison() {
                if let Some(next) = self.peek_binop() {
                    if next.is_comparison() {
                        return Err(self.error("comparisons cannot be chained", &["`&&`", "`)`", "`;`"]));
                    }
                }
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_sym("-") {
            if let Tok::Number(text) = self.peek().clone() {
                if !text.contains('.') {
                    let value = self.int()?;
                    return Ok(Expr::Int(-value));
                }
            }
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(self.unary()?)));
        }
        if self.eat_sym("!") {
            return Ok(Expr::Unary(UnaryOp::Not, Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Tok::Number(_) => Ok(Expr::Int(self.int()?)),
            Tok::Ident(name) if name == "true" => {
                self.advance();
                Ok(Expr::Int(1))
            }
            Tok::Ident(name) if name == "false" => {
                self.advance();
                Ok(Expr::Int(0))
            }
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                self.advance();
                Ok(Expr::Var(name))
            }
            Tok::Sym("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            _ => Err(self.unexpected(&["an expression"])),
        }
    }
}
