//! Random loop-free programs over small random spaces, for differential and
//! property-based testing of the analyses against each other.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dsl::{typecheck, BinaryOp, DecisionProgram, Expr, Param, Stmt, UnaryOp, ValidatedProgram};
use crate::rational::ratio;
use crate::spaces::{Distribution, Domain, InputSpace, Variable};

#[derive(Debug, Clone)]
pub struct Case {
    pub program: DecisionProgram,
    pub validated: ValidatedProgram,
    pub space: InputSpace,
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    /// Every `return` yields 0 or 1.
    pub binary: bool,
    /// Allow non-uniform distributions on the unprotected inputs.
    pub weighted: bool,
    pub max_groups: i64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            binary: true,
            weighted: true,
            max_groups: 4,
        }
    }
}

const LOCALS: [&str; 3] = ["t0", "t1", "t2"];

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    binary: bool,
}

impl<R: Rng> Gen<'_, R> {
    fn leaf(&mut self, vars: &[String]) -> Expr {
        if !vars.is_empty() && self.rng.gen_bool(0.7) {
            Expr::Var(vars.choose(self.rng).unwrap().clone())
        } else {
            Expr::Int(self.rng.gen_range(-4..=6))
        }
    }

    fn expr(&mut self, vars: &[String], depth: u32) -> Expr {
        if depth == 0 || self.rng.gen_bool(0.3) {
            return self.leaf(vars);
        }
        match self.rng.gen_range(0..10) {
            0 => {
                let op = if self.rng.gen_bool(0.5) { UnaryOp::Neg } else { UnaryOp::Not };
                Expr::Unary(op, Box::new(self.expr(vars, depth - 1)))
            }
            1 => Expr::ite(
                self.condition(vars, depth - 1),
                self.expr(vars, depth - 1),
                self.expr(vars, depth - 1),
            ),
            2 => {
                // keep products small: one side is a literal
                let k = self.rng.gen_range(-3..=3);
                Expr::bin(BinaryOp::Mul, Expr::Int(k), self.expr(vars, depth - 1))
            }
            _ => {
                let op = *BinaryOp::ALL
                    .iter()
                    .filter(|op| **op != BinaryOp::Mul)
                    .collect::<Vec<_>>()
                    .choose(self.rng)
                    .unwrap();
                Expr::bin(*op, self.expr(vars, depth - 1), self.expr(vars, depth - 1))
            }
        }
    }

    fn condition(&mut self, vars: &[String], depth: u32) -> Expr {
        let ops = [
            BinaryOp::Eq,
            BinaryOp::Ne,
            BinaryOp::Lt,
            BinaryOp::Le,
            BinaryOp::Gt,
            BinaryOp::Ge,
        ];
        let op = *ops.choose(self.rng).unwrap();
        let lhs = self.expr(vars, depth);
        let rhs = self.leaf(vars);
        let c = Expr::bin(op, lhs, rhs);
        if depth > 0 && self.rng.gen_bool(0.25) {
            let other = self.condition(vars, depth - 1);
            let join = if self.rng.gen_bool(0.5) { BinaryOp::And } else { BinaryOp::Or };
            Expr::bin(join, c, other)
        } else {
            c
        }
    }

    fn return_value(&mut self, vars: &[String]) -> Expr {
        if self.binary {
            if self.rng.gen_bool(0.1) {
                Expr::Int(self.rng.gen_range(0..=1))
            } else {
                self.condition(vars, 2)
            }
        } else {
            self.expr(vars, 2)
        }
    }

    /// A block that returns on every path.
    fn block(&mut self, vars: &mut Vec<String>, depth: u32) -> Vec<Stmt> {
        let mut out = Vec::new();
        for _ in 0..self.rng.gen_range(0..=2) {
            let name = LOCALS.choose(self.rng).unwrap().to_string();
            let value = self.expr(vars, 2);
            out.push(Stmt::Assign {
                name: name.clone(),
                value,
            });
            if !vars.contains(&name) {
                vars.push(name);
            }
        }
        if depth > 0 && self.rng.gen_bool(0.6) {
            let cond = self.condition(vars, 1);
            let mut then_vars = vars.clone();
            let then_branch = self.block(&mut then_vars, depth - 1);
            if self.rng.gen_bool(0.3) {
                // one-armed `if`; the continuation returns
                out.push(Stmt::If {
                    cond,
                    then_branch,
                    else_branch: Vec::new(),
                });
                out.extend(self.block(vars, depth - 1));
            } else {
                let mut else_vars = vars.clone();
                let else_branch = self.block(&mut else_vars, depth - 1);
                out.push(Stmt::If {
                    cond,
                    then_branch,
                    else_branch,
                });
            }
        } else {
            out.push(Stmt::Return(self.return_value(vars)));
        }
        out
    }
}

fn random_domain(rng: &mut impl Rng, max_len: i64) -> Domain {
    let lo = rng.gen_range(-3..=3);
    let len = rng.gen_range(1..=max_len);
    if rng.gen_bool(0.2) && len > 1 {
        let mut values: Vec<i64> = (lo..lo + 3 * len).collect();
        values.shuffle(rng);
        values.truncate(len as usize);
        Domain::set(values).expect("distinct values")
    } else {
        Domain::range(lo, lo + len - 1).expect("non-empty")
    }
}

fn random_distribution(rng: &mut impl Rng, domain: &Domain) -> Distribution {
    let values = domain.values();
    let raw: Vec<i64> = values.iter().map(|_| rng.gen_range(1..=5)).collect();
    let total: i64 = raw.iter().sum();
    Distribution::Pmf(
        values
            .into_iter()
            .zip(raw)
            .map(|(v, w)| (v, ratio(w, total)))
            .collect::<BTreeMap<_, _>>(),
    )
}

/// Draws programs until one typechecks over its drawn space.
pub fn random_case(rng: &mut impl Rng, options: Options) -> Case {
    loop {
        let groups = rng.gen_range(1..=options.max_groups.max(1));
        let g_lo = rng.gen_range(-2..=2);
        let protected = Variable::uniform("g", Domain::range(g_lo, g_lo + groups - 1).unwrap());
        let n_u = rng.gen_range(1..=2);
        let unprotected: Vec<Variable> = (0..n_u)
            .map(|i| {
                let domain = random_domain(rng, 5);
                let dist = if options.weighted && rng.gen_bool(0.4) {
                    random_distribution(rng, &domain)
                } else {
                    Distribution::Uniform
                };
                Variable::new(format!("u{i}"), domain, dist).expect("valid distribution")
            })
            .collect();
        let space = InputSpace::new(protected, unprotected).expect("distinct names");
        let mut vars: Vec<String> = space.names().iter().map(|s| s.to_string()).collect();
        let params = vars
            .iter()
            .map(|n| Param {
                name: n.clone(),
                domain: None,
            })
            .collect();
        let mut gen = Gen {
            rng,
            binary: options.binary,
        };
        let body = gen.block(&mut vars, 3);
        let program = DecisionProgram {
            name: "random".into(),
            consts: Vec::new(),
            params,
            body,
        };
        if let Ok(validated) = typecheck(&program, &space) {
            return Case {
                program,
                validated,
                space,
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn generated_programs_typecheck_and_stay_binary() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let case = random_case(&mut rng, Options::default());
            assert!(case.validated.output_domain().iter().all(|d| *d == 0 || *d == 1));
        }
    }
}
