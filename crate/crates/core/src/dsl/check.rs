//! Typechecking: scoping, return coverage, 32-bit interval analysis and
//! output-domain inference.

use std::collections::{BTreeSet, HashMap};

use super::ast::{BinaryOp, DecisionProgram, Expr, Stmt, UnaryOp};
use super::eval::{exec, Code, Instr};
use super::Assignment;
use crate::error::{Error, Result};
use crate::spaces::{Domain, InputSpace, DEFAULT_CAP};

const MIN: i128 = i32::MIN as i128;
const MAX: i128 = i32::MAX as i128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Interval {
    lo: i128,
    hi: i128,
}

impl Interval {
    fn point(v: i128) -> Self {
        Interval { lo: v, hi: v }
    }

    fn boolean() -> Self {
        Interval { lo: 0, hi: 1 }
    }

    fn hull(self, other: Interval) -> Self {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }
}

/// Per-slot interval, `None` when the slot is not definitely assigned.
/// The outer `None` marks unreachable code.
type State = Option<Vec<Option<Interval>>>;

fn join(a: State, b: State) -> State {
    match (a, b) {
        (None, s) | (s, None) => s,
        (Some(a), Some(b)) => Some(
            a.into_iter()
                .zip(b)
                .map(|(x, y)| match (x, y) {
                    (Some(x), Some(y)) => Some(x.hull(y)),
                    _ => None,
                })
                .collect(),
        ),
    }
}

struct Lowering<'a> {
    slots: Vec<String>,
    index: HashMap<String, usize>,
    consts: &'a [(String, i64)],
}

impl Lowering<'_> {
    fn slot_for(&mut self, name: &str) -> usize {
        if let Some(&s) = self.index.get(name) {
            return s;
        }
        self.slots.push(name.to_string());
        self.index.insert(name.to_string(), self.slots.len() - 1);
        self.slots.len() - 1
    }

    fn expr(&mut self, e: &Expr, state: &State) -> Result<(Code, Interval)> {
        let (code, iv) = match e {
            Expr::Int(v) => (Code::Const(*v), Interval::point(*v as i128)),
            Expr::Var(name) => {
                if let Some((_, v)) = self.consts.iter().find(|(n, _)| n == name) {
                    (Code::Const(*v), Interval::point(*v as i128))
                } else {
                    let slot = match self.index.get(name) {
                        Some(&s) => s,
                        None if state.is_none() => self.slot_for(name),
                        None => return Err(Error::UnboundVariable { name: name.clone() }),
                    };
                    let iv = match state {
                        None => Interval::point(0),
                        Some(env) => env
                            .get(slot)
                            .copied()
                            .flatten()
                            .ok_or_else(|| Error::UnboundVariable { name: name.clone() })?,
                    };
                    (Code::Slot(slot), iv)
                }
            }
            Expr::Unary(op, inner) => {
                let (c, i) = self.expr(inner, state)?;
                let iv = match op {
                    UnaryOp::Neg => Interval { lo: -i.hi, hi: -i.lo },
                    UnaryOp::Not => Interval::boolean(),
                };
                (Code::Unary(*op, Box::new(c)), iv)
            }
            Expr::Binary(op, lhs, rhs) => {
                let (a, x) = self.expr(lhs, state)?;
                let (b, y) = self.expr(rhs, state)?;
                let iv = match op {
                    BinaryOp::Add => Interval {
                        lo: x.lo + y.lo,
                        hi: x.hi + y.hi,
                    },
                    BinaryOp::Sub => Interval {
                        lo: x.lo - y.hi,
                        hi: x.hi - y.lo,
                    },
                    BinaryOp::Mul => {
                        let p = [x.lo * y.lo, x.lo * y.hi, x.hi * y.lo, x.hi * y.hi];
                        Interval {
                            lo: *p.iter().min().unwrap(),
                            hi: *p.iter().max().unwrap(),
                        }
                    }
                    _ => Interval::boolean(),
                };
                (Code::Binary(*op, Box::new(a), Box::new(b)), iv)
            }
            Expr::Ite(c, a, b) => {
                let (c, _) = self.expr(c, state)?;
                let (a, x) = self.expr(a, state)?;
                let (b, y) = self.expr(b, state)?;
                (Code::Ite(Box::new(c), Box::new(a), Box::new(b)), x.hull(y))
            }
        };
        if state.is_some() && (iv.lo < MIN || iv.hi > MAX) {
            return Err(Error::WidthOverflowRisk {
                expr: e.to_string(),
                lo: iv.lo,
                hi: iv.hi,
            });
        }
        Ok((code, iv))
    }

    fn block(&mut self, stmts: &[Stmt], state: &mut State) -> Result<Vec<Instr>> {
        let mut out = Vec::with_capacity(stmts.len());
        for s in stmts {
            match s {
                Stmt::Assign { name, value } => {
                    if self.consts.iter().any(|(n, _)| n == name) {
                        return Err(Error::Config(format!("cannot assign to constant `{name}`")));
                    }
                    let (code, iv) = self.expr(value, state)?;
                    let slot = self.slot_for(name);
                    if let Some(env) = state {
                        if env.len() <= slot {
                            env.resize(slot + 1, None);
                        }
                        env[slot] = Some(iv);
                    }
                    out.push(Instr::Assign(slot, code));
                }
                Stmt::Return(e) => {
                    let (code, _) = self.expr(e, state)?;
                    out.push(Instr::Return(code));
                    *state = None;
                }
                Stmt::If {
                    cond,
                    then_branch,
                    else_branch,
                } => {
                    let (c, _) = self.expr(cond, state)?;
                    let mut then_state = state.clone();
                    let t = self.block(then_branch, &mut then_state)?;
                    let mut else_state = state.clone();
                    let e = self.block(else_branch, &mut else_state)?;
                    // slots first assigned inside a branch extend the vectors unevenly
                    let width = self.slots.len();
                    for st in [&mut then_state, &mut else_state] {
                        if let Some(env) = st {
                            env.resize(width, None);
                        }
                    }
                    *state = join(then_state, else_state);
                    out.push(Instr::If(c, t, e));
                }
            }
        }
        Ok(out)
    }
}

/// A decision program that passed [`typecheck`]; immutable and shareable
/// across threads.
#[derive(Debug, Clone)]
pub struct ValidatedProgram {
    source: DecisionProgram,
    slots: Vec<String>,
    body: Vec<Instr>,
    inputs: Vec<(String, Domain)>,
    layout: Vec<usize>,
    output_domain: BTreeSet<i64>,
}

/// Checks `p` against the inputs of `space` (protected input first).
pub fn typecheck(p: &DecisionProgram, space: &InputSpace) -> Result<ValidatedProgram> {
    let inputs: Vec<(String, Domain)> = std::iter::once(&space.protected)
        .chain(&space.unprotected)
        .map(|v| (v.name.clone(), v.domain.clone()))
        .collect();
    typecheck_inputs(p, &inputs, space.cap)
}

/// Checks `p` against explicitly listed inputs; the list fixes the order
/// used by [`ValidatedProgram::eval_inputs`].
pub fn typecheck_inputs(
    p: &DecisionProgram,
    inputs: &[(String, Domain)],
    cap: u128,
) -> Result<ValidatedProgram> {
    let mut seen = BTreeSet::new();
    for param in &p.params {
        if !seen.insert(param.name.as_str()) {
            return Err(Error::DomainMismatch(format!(
                "parameter `{}` declared twice",
                param.name
            )));
        }
        if p.consts.iter().any(|(n, _)| *n == param.name) {
            return Err(Error::DomainMismatch(format!(
                "`{}` is both a parameter and a constant",
                param.name
            )));
        }
    }
    let input_names: BTreeSet<&str> = inputs.iter().map(|(n, _)| n.as_str()).collect();
    if input_names != seen || input_names.len() != inputs.len() {
        return Err(Error::DomainMismatch(format!(
            "program `{}` takes ({}) but the inputs are ({})",
            p.name,
            p.param_names().join(", "),
            inputs.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }
    for param in &p.params {
        let (_, actual) = inputs.iter().find(|(n, _)| *n == param.name).unwrap();
        if let Some(declared) = &param.domain {
            if !actual.is_subset_of(declared) {
                return Err(Error::DomainMismatch(format!(
                    "`{}` ranges over {actual}, outside its declared domain {declared}",
                    param.name
                )));
            }
        }
    }
    for (name, value) in &p.consts {
        if (*value as i128) < MIN || (*value as i128) > MAX {
            return Err(Error::WidthOverflowRisk {
                expr: name.clone(),
                lo: *value as i128,
                hi: *value as i128,
            });
        }
    }

    let mut lowering = Lowering {
        slots: Vec::new(),
        index: HashMap::new(),
        consts: &p.consts,
    };
    let mut env = Vec::new();
    for param in &p.params {
        let slot = lowering.slot_for(&param.name);
        let (_, d) = inputs.iter().find(|(n, _)| *n == param.name).unwrap();
        let iv = Interval {
            lo: d.min() as i128,
            hi: d.max() as i128,
        };
        if iv.lo < MIN || iv.hi > MAX {
            return Err(Error::WidthOverflowRisk {
                expr: param.name.clone(),
                lo: iv.lo,
                hi: iv.hi,
            });
        }
        debug_assert_eq!(slot, env.len());
        env.push(Some(iv));
    }
    let mut state: State = Some(env);
    let body = lowering.block(&p.body, &mut state)?;
    if state.is_some() {
        return Err(Error::MissingReturn {
            program: p.name.clone(),
        });
    }
    let layout = inputs
        .iter()
        .map(|(n, _)| lowering.index[n.as_str()])
        .collect();
    let mut program = ValidatedProgram {
        source: p.clone(),
        slots: lowering.slots,
        body,
        inputs: inputs.to_vec(),
        layout,
        output_domain: BTreeSet::new(),
    };
    program.output_domain = program.reachable_outputs(cap)?;
    Ok(program)
}

impl ValidatedProgram {
    pub fn name(&self) -> &str {
        &self.source.name
    }

    pub fn source(&self) -> &DecisionProgram {
        &self.source
    }

    /// Inputs in evaluation order, with the domains they were checked against.
    pub fn inputs(&self) -> &[(String, Domain)] {
        &self.inputs
    }

    pub fn input_names(&self) -> Vec<&str> {
        self.inputs.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// The set of values some in-domain input makes the program return.
    pub fn output_domain(&self) -> &BTreeSet<i64> {
        &self.output_domain
    }

    pub(crate) fn slots(&self) -> &[String] {
        &self.slots
    }

    pub(crate) fn body(&self) -> &[Instr] {
        &self.body
    }

    pub(crate) fn layout(&self) -> &[usize] {
        &self.layout
    }

    /// Evaluates on values listed in input order. Values must lie in the
    /// checked domains.
    pub fn eval_inputs(&self, values: &[i64]) -> i64 {
        debug_assert_eq!(values.len(), self.inputs.len());
        let mut env = vec![0i64; self.slots.len()];
        for (&slot, &v) in self.layout.iter().zip(values) {
            env[slot] = v;
        }
        exec(&self.body, &mut env).expect("typechecked programs always return")
    }

    /// Evaluates at a point (g, u) of the space the program was checked against.
    pub fn eval_point(&self, group: i64, u: &[i64]) -> i64 {
        let mut values = Vec::with_capacity(u.len() + 1);
        values.push(group);
        values.extend_from_slice(u);
        self.eval_inputs(&values)
    }

    pub fn evaluate(&self, a: &Assignment) -> Result<i64> {
        let mut values = Vec::with_capacity(self.inputs.len());
        for (name, domain) in &self.inputs {
            let v = a
                .get(name)
                .ok_or_else(|| Error::DomainMismatch(format!("`{name}` is not bound")))?;
            if !domain.contains(v) {
                return Err(Error::DomainMismatch(format!("{name}={v} lies outside {domain}")));
            }
            values.push(v);
        }
        if a.len() != self.inputs.len() {
            return Err(Error::DomainMismatch(format!("assignment {a} binds extra names")));
        }
        Ok(self.eval_inputs(&values))
    }

    fn reachable_outputs(&self, cap: u128) -> Result<BTreeSet<i64>> {
        let domains: Vec<Vec<i64>> = self.inputs.iter().map(|(_, d)| d.values()).collect();
        let points: u128 = domains.iter().map(|d| d.len() as u128).product();
        if points > cap.max(1) {
            return Err(Error::SpaceTooLarge { points, cap });
        }
        let mut out = BTreeSet::new();
        for_each_product(&domains, |values| {
            out.insert(self.eval_inputs(values));
        });
        Ok(out)
    }
}

/// Visits every tuple of the product, last component fastest.
pub fn for_each_product(domains: &[Vec<i64>], mut f: impl FnMut(&[i64])) {
    if domains.iter().any(|d| d.is_empty()) {
        return;
    }
    let mut index = vec![0usize; domains.len()];
    let mut values: Vec<i64> = domains.iter().map(|d| d[0]).collect();
    loop {
        f(&values);
        let mut k = domains.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            index[k] += 1;
            if index[k] < domains[k].len() {
                values[k] = domains[k][index[k]];
                break;
            }
            index[k] = 0;
            values[k] = domains[k][0];
        }
    }
}

/// Checks `p` over the domains it declares itself.
pub fn typecheck_declared(p: &DecisionProgram) -> Result<ValidatedProgram> {
    let mut inputs = Vec::new();
    for param in &p.params {
        let d = param.domain.clone().ok_or_else(|| {
            Error::DomainMismatch(format!("parameter `{}` declares no domain", param.name))
        })?;
        inputs.push((param.name.clone(), d));
    }
    typecheck_inputs(p, &inputs, DEFAULT_CAP)
}
