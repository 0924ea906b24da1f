//! Reader for `.scm` model files.
//!
//! ```text
//! bg B1 : [0, 9] ~ uniform
//! bg B3 : {0, 1, 2} ~ pmf {0: 1/2, 1: 1/4, 2: 1/4}
//! let group = B1
//! let zipCode = if group >= 6 then B3 else B4;
//! protected group
//! ```
//!
//! Background declarations come first; `let` equations may only mention
//! background variables and earlier equations. The trailing `;` is optional.

use std::collections::BTreeMap;

use super::CausalModel;
use crate::dsl::parser::Parser;
use crate::error::Result;
use crate::spaces::{Distribution, Variable};

pub fn parse_model(text: &str, origin: &str) -> Result<CausalModel> {
    let mut p = Parser::new(text, origin)?;
    let mut background = Vec::new();
    while p.eat_kw("bg") {
        let name = p.ident()?;
        p.expect_sym(":")?;
        let domain = p.domain()?;
        p.expect_sym("~")?;
        let dist = if p.eat_kw("uniform") {
            Distribution::Uniform
        } else if p.eat_kw("pmf") {
            p.expect_sym("{")?;
            let mut pmf = BTreeMap::new();
            loop {
                let value = p.int()?;
                p.expect_sym(":")?;
                let mass = p.rational()?;
                if pmf.insert(value, mass).is_some() {
                    return Err(p.error(format!("mass for {value} given twice"), &["a new value"]));
                }
                if !p.eat_sym(",") {
                    break;
                }
            }
            p.expect_sym("}")?;
            Distribution::Pmf(pmf)
        } else {
            return Err(p.error("unknown distribution", &["`uniform`", "`pmf`"]));
        };
        p.eat_sym(";");
        background.push(Variable::new(name, domain, dist)?);
    }
    let mut equations = Vec::new();
    while p.eat_kw("let") {
        let name = p.ident()?;
        p.expect_sym("=")?;
        let e = p.expr()?;
        p.eat_sym(";");
        equations.push((name, e));
    }
    if !p.eat_kw("protected") {
        let expected: &[&str] = if equations.is_empty() {
            &["`bg`", "`let`", "`protected`"]
        } else {
            &["`let`", "`protected`"]
        };
        return Err(p.error("expected the protected variable declaration", expected));
    }
    let protected = p.ident()?;
    p.eat_sym(";");
    if !p.at_eof() {
        return Err(p.error("trailing input after the protected declaration", &["end of input"]));
    }
    CausalModel::new(background, equations, protected)
}
