//! Tseitin encoding with projection sets, and DIMACS output.

use std::fmt::Write as _;

use super::circuit::{Bit, Circuit, Gate, Role};

/// DIMACS-style literal: a nonzero variable index, negative when negated.
pub type Lit = i32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    pub num_vars: u32,
    pub clauses: Vec<Vec<Lit>>,
    /// Variables of the protected input's bits, least significant first.
    pub g_vars: Vec<u32>,
    /// Per unprotected input: its name and bit variables.
    pub u_vars: Vec<(String, Vec<u32>)>,
    /// The decision word's bits.
    pub d_vars: Vec<u32>,
}

struct Encoder {
    num_vars: u32,
    clauses: Vec<Vec<Lit>>,
    lits: Vec<Lit>,
}

impl Encoder {
    fn fresh(&mut self) -> Lit {
        self.num_vars += 1;
        self.num_vars as Lit
    }

    fn lit(&self, b: Bit) -> Lit {
        self.lits[b.0 as usize]
    }
}

pub fn to_cnf(c: &Circuit) -> CnfFormula {
    let mut e = Encoder {
        num_vars: 0,
        clauses: Vec::new(),
        lits: Vec::with_capacity(c.len()),
    };
    let truth = e.fresh();
    e.clauses.push(vec![truth]);
    for g in c.gates() {
        let lit = match *g {
            Gate::Const(v) => {
                if v {
                    truth
                } else {
                    -truth
                }
            }
            Gate::Input { .. } => e.fresh(),
            Gate::Not(a) => -e.lit(a),
            Gate::And(a, b) => {
                let (a, b, x) = (e.lit(a), e.lit(b), e.fresh());
                e.clauses.push(vec![-x, a]);
                e.clauses.push(vec![-x, b]);
                e.clauses.push(vec![x, -a, -b]);
                x
            }
            Gate::Or(a, b) => {
                let (a, b, x) = (e.lit(a), e.lit(b), e.fresh());
                e.clauses.push(vec![x, -a]);
                e.clauses.push(vec![x, -b]);
                e.clauses.push(vec![-x, a, b]);
                x
            }
            Gate::Xor(a, b) => {
                let (a, b, x) = (e.lit(a), e.lit(b), e.fresh());
                e.clauses.push(vec![-x, a, b]);
                e.clauses.push(vec![-x, -a, -b]);
                e.clauses.push(vec![x, -a, b]);
                e.clauses.push(vec![x, a, -b]);
                x
            }
        };
        e.lits.push(lit);
    }
    for s in &c.side_conditions {
        let l = e.lit(*s);
        e.clauses.push(vec![l]);
    }
    let var_of = |e: &Encoder, b: &Bit| e.lit(*b) as u32;
    let mut g_vars = Vec::new();
    let mut u_vars = Vec::new();
    for w in &c.inputs {
        let vars: Vec<u32> = w.bits.iter().map(|b| var_of(&e, b)).collect();
        match w.role {
            Role::Group => g_vars.extend(vars),
            Role::Unprotected => u_vars.push((w.name.clone(), vars)),
        }
    }
    // fresh decision variables keep the projection sets disjoint
    let mut d_vars = Vec::with_capacity(c.outputs.len());
    for b in &c.outputs {
        let src = e.lit(*b);
        let d = e.fresh();
        e.clauses.push(vec![-d, src]);
        e.clauses.push(vec![d, -src]);
        d_vars.push(d as u32);
    }
    CnfFormula {
        num_vars: e.num_vars,
        clauses: e.clauses,
        g_vars,
        u_vars,
        d_vars,
    }
}

impl CnfFormula {
    /// The variables counted over: every U bit, then every D bit.
    pub fn projection(&self) -> Vec<u32> {
        self.u_vars
            .iter()
            .flat_map(|(_, v)| v.iter().copied())
            .chain(self.d_vars.iter().copied())
            .collect()
    }

    /// Standard DIMACS with the projection as `c ind` lines.
    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        let join = |vars: &[u32]| vars.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(out, "c projected count of (u, d) pairs reachable for some group").unwrap();
        writeln!(out, "c g {}", join(&self.g_vars)).unwrap();
        for (name, vars) in &self.u_vars {
            writeln!(out, "c u {name} {}", join(vars)).unwrap();
        }
        writeln!(out, "c d {}", join(&self.d_vars)).unwrap();
        let projection = self.projection();
        for chunk in projection.chunks(16) {
            writeln!(out, "c ind {} 0", join(chunk)).unwrap();
        }
        writeln!(out, "p cnf {} {}", self.num_vars, self.clauses.len()).unwrap();
        for cl in &self.clauses {
            for l in cl {
                write!(out, "{l} ").unwrap();
            }
            out.push_str("0\n");
        }
        out
    }

    /// Reads a word back from a full assignment (`model[v]` for variable `v`).
    pub fn decode(model: &[bool], vars: &[u32]) -> i64 {
        let mut v: u32 = 0;
        for (i, var) in vars.iter().enumerate() {
            if model[*var as usize] {
                v |= 1 << i;
            }
        }
        v as i32 as i64
    }

    pub fn satisfied_by(&self, model: &[bool]) -> bool {
        self.clauses.iter().all(|cl| {
            cl.iter()
                .any(|l| model[l.unsigned_abs() as usize] == (*l > 0))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::circuit::Role;

    #[test]
    fn single_and_gate_is_three_clauses() {
        let mut c = Circuit::new();
        let a = c.add_input("a", Role::Group)[0];
        let b = c.add_input("b", Role::Unprotected)[0];
        let before = to_cnf(&c).clauses.len();
        c.and(a, b);
        assert_eq!(to_cnf(&c).clauses.len(), before + 3);
    }

    #[test]
    fn dimacs_header_counts() {
        let mut c = Circuit::new();
        let a = c.add_input("a", Role::Group)[0];
        let b = c.add_input("b", Role::Unprotected)[0];
        let x = c.xor(a, b);
        c.outputs = c.bool_word(x);
        let f = to_cnf(&c);
        let text = f.to_dimacs();
        let header = text.lines().find(|l| l.starts_with("p cnf")).unwrap();
        assert_eq!(header, format!("p cnf {} {}", f.num_vars, f.clauses.len()));
        let body = text.lines().filter(|l| !l.starts_with('c') && !l.starts_with('p')).count();
        assert_eq!(body, f.clauses.len());
        assert!(text.lines().all(|l| l.starts_with('c') || l.starts_with('p') || l.ends_with(" 0") || l == "0"));
    }
}
