//! The decision-program language: a loop-free integer language with
//! assignments, nested `if`/`else`, and `return`.
//!
//! ```text
//! const T = 5;
//! program credit(gender, amount: [1, 10]) {
//!   if (gender == 0) {
//!     return amount <= T;
//!   } else {
//!     return amount > 10 - T;
//!   }
//! }
//! ```
//!
//! Booleans are the integers 0 and 1. Programs are checked against an input
//! space by [`typecheck`], which proves every intermediate value fits in 32
//! bits and infers the set of reachable outputs.

mod ast;
mod check;
pub(crate) mod eval;
mod lexer;
pub(crate) mod parser;
mod printer;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use ast::{BinaryOp, DecisionProgram, Expr, Param, Stmt, UnaryOp};
pub use check::{for_each_product, typecheck, typecheck_declared, typecheck_inputs, ValidatedProgram};
pub use parser::KEYWORDS;

use crate::error::Result;
use crate::spaces::UniformWrapping;

/// Program text plus where it came from, for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceProgram {
    pub text: String,
    pub origin: String,
}

impl SourceProgram {
    pub fn inline(text: impl Into<String>) -> Self {
        SourceProgram {
            text: text.into(),
            origin: "<inline>".into(),
        }
    }

    pub fn from_file(path: &std::path::Path) -> std::io::Result<Self> {
        Ok(SourceProgram {
            text: std::fs::read_to_string(path)?,
            origin: path.display().to_string(),
        })
    }
}

pub fn parse_program(src: &SourceProgram) -> Result<DecisionProgram> {
    parser::Parser::new(&src.text, &src.origin)?.program()
}

/// Parses a bare expression, e.g. a causal equation right-hand side.
pub fn parse_expr(text: &str) -> Result<Expr> {
    let mut p = parser::Parser::new(text, "<inline>")?;
    let e = p.expr()?;
    if !p.at_eof() {
        return Err(p.error("trailing input after expression", &["end of input"]));
    }
    Ok(e)
}

/// Concrete values for named inputs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(BTreeMap<String, i64>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: &str, value: i64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn with(mut self, name: &str, value: i64) -> Self {
        self.set(name, value);
        self
    }

    pub fn get(&self, name: &str) -> Option<i64> {
        self.0.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, i64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl<'a> FromIterator<(&'a str, i64)> for Assignment {
    fn from_iter<T: IntoIterator<Item = (&'a str, i64)>>(iter: T) -> Self {
        Assignment(iter.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(", "))
    }
}

/// Rewrites `p` so that input `wrapping.name` is computed from a uniform raw
/// input through the wrapping's lookup table. The raw input takes the
/// original's position in the parameter list.
pub fn wrap_program(p: &DecisionProgram, wrapping: &UniformWrapping) -> Result<DecisionProgram> {
    let Some(position) = p.params.iter().position(|q| q.name == wrapping.name) else {
        return Err(crate::Error::UnknownVariable(wrapping.name.clone()));
    };
    let runs = wrapping.runs();
    let raw = Expr::var(&wrapping.raw_name);
    let mut lookup = Expr::Int(runs.last().expect("non-empty table").0);
    for (value, end) in runs.iter().rev().skip(1) {
        lookup = Expr::ite(
            Expr::bin(BinaryOp::Lt, raw.clone(), Expr::Int(*end as i64)),
            Expr::Int(*value),
            lookup,
        );
    }
    let mut out = p.clone();
    out.name = format!("{}_wrapped", p.name);
    out.params[position] = Param {
        name: wrapping.raw_name.clone(),
        domain: None,
    };
    let mut body = vec![Stmt::Assign {
        name: wrapping.name.clone(),
        value: lookup,
    }];
    body.extend(p.body.iter().cloned());
    out.body = body;
    Ok(out)
}

#[cfg(test)]
mod tests;
