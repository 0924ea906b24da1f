//! Structural causal models over finite background variables, composed with
//! decision programs.
//!
//! A model computes every variable from the background tuple `b`; composing
//! it with a program `P` gives `P̂(b)`, and replacing the protected
//! variable's equation by a constant `g` gives `P̂(g, b)`. Compositions are
//! generated as ordinary decision programs over the background variables, so
//! they go through the same typechecker and evaluator as everything else.

mod parse;

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use parse::parse_model;

use crate::dsl::eval::{apply_binary, apply_unary};
use crate::dsl::{typecheck_inputs, Assignment, DecisionProgram, Expr, Param, Stmt, ValidatedProgram};
use crate::error::{Error, Result};
use crate::qualitative::Verdict;
use crate::quantitative::{ensure_binary, fairness_spread_of_table, Backend, ConditionalOutcomeTable, MetricValue, Spread};
use crate::rational::{self, Rational};
use crate::spaces::{Distribution, Domain, UPoints, Variable, DEFAULT_CAP};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalModel {
    pub background: Vec<Variable>,
    /// In definition order; each right-hand side mentions only background
    /// variables and earlier equations.
    pub equations: Vec<(String, Expr)>,
    pub protected: String,
}

/// `C_{target ← value}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intervention {
    pub target: String,
    pub value: i64,
}

/// Variables held at their factual values in counterfactual runs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSpec {
    pub clamped: BTreeSet<String>,
}

impl PathSpec {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        PathSpec {
            clamped: names.into_iter().map(Into::into).collect(),
        }
    }
}

fn eval_expr(e: &Expr, env: &BTreeMap<String, i64>) -> Result<i64> {
    Ok(match e {
        Expr::Int(v) => *v,
        Expr::Var(n) => *env.get(n).ok_or_else(|| Error::UnknownVariable(n.clone()))?,
        Expr::Unary(op, a) => apply_unary(*op, eval_expr(a, env)?),
        Expr::Binary(op, a, b) => apply_binary(*op, eval_expr(a, env)?, eval_expr(b, env)?),
        Expr::Ite(c, a, b) => {
            if eval_expr(c, env)? != 0 {
                eval_expr(a, env)?
            } else {
                eval_expr(b, env)?
            }
        }
    })
}

impl CausalModel {
    pub fn new(background: Vec<Variable>, equations: Vec<(String, Expr)>, protected: String) -> Result<Self> {
        let mut defined = BTreeSet::new();
        for v in &background {
            if !defined.insert(v.name.clone()) {
                return Err(Error::Model(format!("`{}` is declared twice", v.name)));
            }
        }
        for (name, e) in &equations {
            let mut used = Vec::new();
            e.variables(&mut used);
            if let Some(u) = used.iter().find(|u| !defined.contains(*u)) {
                return Err(Error::Model(format!(
                    "the equation for `{name}` uses `{u}` before it is defined"
                )));
            }
            if !defined.insert(name.clone()) {
                return Err(Error::Model(format!("`{name}` is defined twice")));
            }
        }
        if !defined.contains(&protected) {
            return Err(Error::Model(format!("protected variable `{protected}` is not defined")));
        }
        Ok(CausalModel {
            background,
            equations,
            protected,
        })
    }

    /// Background variables, then equation variables, in definition order.
    pub fn variables(&self) -> Vec<&str> {
        self.background
            .iter()
            .map(|v| v.name.as_str())
            .chain(self.equations.iter().map(|(n, _)| n.as_str()))
            .collect()
    }

    pub fn is_defined(&self, name: &str) -> bool {
        self.variables().contains(&name)
    }

    pub fn background_names(&self) -> Vec<&str> {
        self.background.iter().map(|v| v.name.as_str()).collect()
    }

    pub fn background_size(&self) -> u128 {
        self.background.iter().map(|v| v.domain.len() as u128).product()
    }

    /// Every background tuple with its probability.
    pub fn background_points(&self) -> Result<Vec<(Vec<i64>, Rational)>> {
        let points = self.background_size();
        if points > DEFAULT_CAP {
            return Err(Error::SpaceTooLarge {
                points,
                cap: DEFAULT_CAP,
            });
        }
        Ok(UPoints::new(self.background.iter().map(Variable::weights).collect()).collect())
    }

    pub fn background_assignment(&self, b: &[i64]) -> Assignment {
        self.background_names().into_iter().zip(b.iter().copied()).collect()
    }

    pub fn with_background_distribution(&self, name: &str, dist: Distribution) -> Result<Self> {
        let mut out = self.clone();
        let var = out
            .background
            .iter_mut()
            .find(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
        *var = Variable::new(var.name.clone(), var.domain.clone(), dist)?;
        Ok(out)
    }

    /// Replaces the equation of `i.target` by the constant `i.value`.
    pub fn intervene(&self, i: &Intervention) -> Result<Self> {
        let mut out = self.clone();
        match out.equations.iter_mut().find(|(n, _)| *n == i.target) {
            Some(eq) => eq.1 = Expr::Int(i.value),
            None if self.is_defined(&i.target) => {
                return Err(Error::Model(format!(
                    "`{}` is a background variable and cannot be intervened on",
                    i.target
                )))
            }
            None => return Err(Error::UnknownVariable(i.target.clone())),
        }
        Ok(out)
    }

    /// Values of every model variable at background point `b`.
    pub fn evaluate(&self, b: &Assignment) -> Result<Assignment> {
        let mut env = BTreeMap::new();
        for v in &self.background {
            let x = b
                .get(&v.name)
                .ok_or_else(|| Error::DomainMismatch(format!("background `{}` is not bound", v.name)))?;
            if !v.domain.contains(x) {
                return Err(Error::DomainMismatch(format!("{}={x} lies outside {}", v.name, v.domain)));
            }
            env.insert(v.name.clone(), x);
        }
        for (name, e) in &self.equations {
            let x = eval_expr(e, &env)?;
            env.insert(name.clone(), x);
        }
        Ok(env.iter().map(|(k, v)| (k.as_str(), *v)).collect())
    }

    /// The values `name` takes over the whole background space.
    pub fn reachable_values(&self, name: &str) -> Result<Domain> {
        if !self.is_defined(name) {
            return Err(Error::UnknownVariable(name.to_string()));
        }
        let sep = separator(self, None);
        let program = generate(self, &sep, &Plan::factual(Tail::Variable(name)));
        let checked = typecheck_inputs(&program, &background_inputs(self, None), DEFAULT_CAP)?;
        Domain::set(checked.output_domain().iter().copied())
    }

    /// The protected variable's reachable values: the groups of counterfactual analyses.
    pub fn groups(&self) -> Result<Domain> {
        self.reachable_values(&self.protected)
    }
}

fn stmt_identifiers(stmts: &[Stmt], out: &mut Vec<String>) {
    for s in stmts {
        match s {
            Stmt::Assign { name, value } => {
                out.push(name.clone());
                value.variables(out);
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                cond.variables(out);
                stmt_identifiers(then_branch, out);
                stmt_identifiers(else_branch, out);
            }
            Stmt::Return(e) => e.variables(out),
        }
    }
}

fn rename_stmts(stmts: &[Stmt], f: &impl Fn(&str) -> String) -> Vec<Stmt> {
    stmts
        .iter()
        .map(|s| match s {
            Stmt::Assign { name, value } => Stmt::Assign {
                name: f(name),
                value: value.rename(f),
            },
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => Stmt::If {
                cond: cond.rename(f),
                then_branch: rename_stmts(then_branch, f),
                else_branch: rename_stmts(else_branch, f),
            },
            Stmt::Return(e) => Stmt::Return(e.rename(f)),
        })
        .collect()
}

/// An underscore run that occurs in no identifier of the model or program,
/// so generated names cannot collide.
fn separator(model: &CausalModel, p: Option<&DecisionProgram>) -> String {
    let mut idents: Vec<String> = model.variables().iter().map(|s| s.to_string()).collect();
    for (_, e) in &model.equations {
        e.variables(&mut idents);
    }
    if let Some(p) = p {
        idents.extend(p.params.iter().map(|q| q.name.clone()));
        idents.extend(p.consts.iter().map(|(n, _)| n.clone()));
        stmt_identifiers(&p.body, &mut idents);
    }
    let mut sep = "__".to_string();
    while idents.iter().any(|i| i.contains(&sep)) {
        sep.push('_');
    }
    sep
}

enum Tail<'a> {
    Decision(&'a DecisionProgram),
    Variable(&'a str),
}

struct Plan<'a> {
    tail: Tail<'a>,
    /// Fixed interventions applied to the factual chain.
    fixed: Option<&'a Intervention>,
    /// Add a group parameter and a counterfactual chain driven by it.
    counterfactual: bool,
    clamped: Option<&'a BTreeSet<String>>,
}

impl<'a> Plan<'a> {
    fn factual(tail: Tail<'a>) -> Self {
        Plan {
            tail,
            fixed: None,
            counterfactual: false,
            clamped: None,
        }
    }
}

fn group_param(sep: &str) -> String {
    format!("cf{sep}group")
}

fn chain(model: &CausalModel, prefix: &str, overrides: &BTreeMap<&str, Expr>, out: &mut Vec<Stmt>) {
    let local = |n: &str| format!("{prefix}{n}");
    for v in &model.background {
        let value = overrides.get(v.name.as_str()).cloned().unwrap_or_else(|| Expr::var(&v.name));
        out.push(Stmt::Assign {
            name: local(&v.name),
            value,
        });
    }
    for (name, e) in &model.equations {
        let value = overrides
            .get(name.as_str())
            .cloned()
            .unwrap_or_else(|| e.rename(&|n| local(n)));
        out.push(Stmt::Assign {
            name: local(name),
            value,
        });
    }
}

fn generate(model: &CausalModel, sep: &str, plan: &Plan) -> DecisionProgram {
    let factual = format!("f{sep}");
    let counter = format!("c{sep}");
    let mut body = Vec::new();
    let mut fixed = BTreeMap::new();
    if let Some(i) = plan.fixed {
        fixed.insert(i.target.as_str(), Expr::Int(i.value));
    }
    chain(model, &factual, &fixed, &mut body);
    let mut params = Vec::new();
    let out_prefix = if plan.counterfactual {
        let g = group_param(sep);
        params.push(g.clone());
        let mut overrides: BTreeMap<&str, Expr> = BTreeMap::new();
        for v in plan.clamped.into_iter().flatten() {
            overrides.insert(v.as_str(), Expr::var(&format!("{factual}{v}")));
        }
        overrides.insert(model.protected.as_str(), Expr::var(&g));
        chain(model, &counter, &overrides, &mut body);
        counter
    } else {
        factual
    };
    params.extend(model.background.iter().map(|v| v.name.clone()));
    let (name, consts) = match plan.tail {
        Tail::Variable(v) => {
            body.push(Stmt::Return(Expr::var(&format!("{out_prefix}{v}"))));
            (format!("value_of_{v}"), Vec::new())
        }
        Tail::Decision(p) => {
            let local = |n: &str| format!("p{sep}{n}");
            for q in &p.params {
                body.push(Stmt::Assign {
                    name: local(&q.name),
                    value: Expr::var(&format!("{out_prefix}{}", q.name)),
                });
            }
            body.extend(rename_stmts(&p.body, &local));
            let consts = p.consts.iter().map(|(n, v)| (local(n), *v)).collect();
            (format!("{}_composed", p.name), consts)
        }
    };
    DecisionProgram {
        name,
        consts,
        params: params
            .into_iter()
            .map(|name| Param { name, domain: None })
            .collect(),
        body,
    }
}

fn background_inputs(model: &CausalModel, groups: Option<(&str, &Domain)>) -> Vec<(String, Domain)> {
    groups
        .map(|(n, d)| (n.to_string(), d.clone()))
        .into_iter()
        .chain(model.background.iter().map(|v| (v.name.clone(), v.domain.clone())))
        .collect()
}

/// `P̂_C(b)`, or `P̂_C(g, b)` when an intervention on the protected variable is set.
#[derive(Debug, Clone)]
pub struct ComposedProgram {
    pub model: CausalModel,
    pub decision: DecisionProgram,
    pub intervention: Option<Intervention>,
    program: ValidatedProgram,
}

impl ComposedProgram {
    /// The generated program over the background variables.
    pub fn program(&self) -> &ValidatedProgram {
        &self.program
    }

    pub fn evaluate(&self, b: &Assignment) -> Result<i64> {
        self.program.evaluate(b)
    }

    /// Evaluates on background values listed in declaration order.
    pub fn eval_background(&self, b: &[i64]) -> i64 {
        self.program.eval_inputs(b)
    }
}

fn check_exposure(p: &DecisionProgram, c: &CausalModel) -> Result<()> {
    let missing: Vec<&str> = p
        .params
        .iter()
        .map(|q| q.name.as_str())
        .filter(|n| !c.is_defined(n))
        .collect();
    if !missing.is_empty() {
        return Err(Error::ExposureMismatch(format!(
            "program `{}` reads ({}) which the model does not define",
            p.name,
            missing.join(", ")
        )));
    }
    for q in &p.params {
        if let Some(declared) = &q.domain {
            let actual = c.reachable_values(&q.name)?;
            if !actual.is_subset_of(declared) {
                return Err(Error::DomainMismatch(format!(
                    "the model gives `{}` values {actual}, outside its declared domain {declared}",
                    q.name
                )));
            }
        }
    }
    Ok(())
}

fn compose_with(p: &DecisionProgram, c: &CausalModel, intervention: Option<Intervention>) -> Result<ComposedProgram> {
    check_exposure(p, c)?;
    let sep = separator(c, Some(p));
    let plan = Plan {
        fixed: intervention.as_ref(),
        ..Plan::factual(Tail::Decision(p))
    };
    let generated = generate(c, &sep, &plan);
    let program = typecheck_inputs(&generated, &background_inputs(c, None), DEFAULT_CAP)?;
    Ok(ComposedProgram {
        model: c.clone(),
        decision: p.clone(),
        intervention,
        program,
    })
}

/// `P̂_C(b) = P(G(b), U(b))`.
pub fn compose(p: &DecisionProgram, c: &CausalModel) -> Result<ComposedProgram> {
    compose_with(p, c, None)
}

/// `P̂_C(g, b)`: the protected variable's equation replaced by `g`.
pub fn compose_intervened(p: &DecisionProgram, c: &CausalModel, g: i64) -> Result<ComposedProgram> {
    let groups = c.groups()?;
    if !groups.contains(g) {
        return Err(Error::DomainMismatch(format!(
            "group {g} is not a value of `{}` (which ranges over {groups})",
            c.protected
        )));
    }
    let i = Intervention {
        target: c.protected.clone(),
        value: g,
    };
    if c.equations.iter().any(|(n, _)| *n == c.protected) {
        compose_with(p, c, Some(i))
    } else {
        // a background protected variable: intervene by clamping through the
        // counterfactual chain at a single group
        let cf = Counterfactuals::build(p, c, None)?;
        let sep = separator(c, Some(p));
        let generated = DecisionProgram {
            name: format!("{}_at_{g}", cf.program.name()),
            consts: cf.program.source().consts.clone(),
            params: cf.program.source().params[1..].to_vec(),
            body: std::iter::once(Stmt::Assign {
                name: group_param(&sep),
                value: Expr::Int(g),
            })
            .chain(cf.program.source().body.iter().cloned())
            .collect(),
        };
        let program = typecheck_inputs(&generated, &background_inputs(c, None), DEFAULT_CAP)?;
        Ok(ComposedProgram {
            model: c.clone(),
            decision: p.clone(),
            intervention: Some(i),
            program,
        })
    }
}

/// Every counterfactual decision `P̂(g, b)`, with clamping.
struct Counterfactuals {
    program: ValidatedProgram,
    groups: Vec<i64>,
}

impl Counterfactuals {
    fn build(p: &DecisionProgram, c: &CausalModel, paths: Option<&PathSpec>) -> Result<Self> {
        check_exposure(p, c)?;
        if let Some(paths) = paths {
            for v in &paths.clamped {
                if *v == c.protected {
                    return Err(Error::ProtectedVariableClamped(v.clone()));
                }
                if !c.is_defined(v) {
                    return Err(Error::UnknownVariable(v.clone()));
                }
            }
        }
        let groups = c.groups()?;
        let sep = separator(c, Some(p));
        let plan = Plan {
            counterfactual: true,
            clamped: paths.map(|s| &s.clamped),
            ..Plan::factual(Tail::Decision(p))
        };
        let generated = generate(c, &sep, &plan);
        let g = group_param(&sep);
        let program = typecheck_inputs(&generated, &background_inputs(c, Some((&g, &groups))), DEFAULT_CAP)?;
        Ok(Counterfactuals {
            program,
            groups: groups.values(),
        })
    }

    fn table(&self, c: &CausalModel) -> Result<(ConditionalOutcomeTable, Vec<(Vec<i64>, Rational)>)> {
        let background = c.background_points()?;
        let outcomes: Vec<i64> = self.program.output_domain().iter().copied().collect();
        let probs = background
            .par_iter()
            .map(|(b, _)| {
                let mut inputs = Vec::with_capacity(b.len() + 1);
                inputs.push(0);
                inputs.extend_from_slice(b);
                self.groups
                    .iter()
                    .map(|g| {
                        inputs[0] = *g;
                        let d = self.program.eval_inputs(&inputs);
                        outcomes
                            .iter()
                            .map(|o| if *o == d { rational::one() } else { rational::zero() })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let table = ConditionalOutcomeTable {
            groups: self.groups.clone(),
            u_names: c.background_names().iter().map(|s| s.to_string()).collect(),
            us: background.iter().map(|(b, _)| b.clone()).collect(),
            outcomes,
            probs,
        };
        Ok((table, background))
    }
}

/// `S(G, B, P̂_C)`: background tuples play the part of U and the intervened
/// group the part of G.
pub fn spread_over_background(p: &DecisionProgram, c: &CausalModel, favorable: i64) -> Result<Spread> {
    path_specific_spread(p, c, &PathSpec::default(), favorable)
}

/// Spread with the variables in `paths` held at their factual values in every
/// counterfactual run.
pub fn path_specific_spread(
    p: &DecisionProgram,
    c: &CausalModel,
    paths: &PathSpec,
    favorable: i64,
) -> Result<Spread> {
    let cf = Counterfactuals::build(p, c, Some(paths))?;
    ensure_binary(cf.program.output_domain(), favorable)?;
    let (table, background) = cf.table(c)?;
    fairness_spread_of_table(&table, &background, favorable, Backend::Enumeration)
}

/// A background point at which two interventions disagree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterfactualWitness {
    pub b: Assignment,
    pub g1: i64,
    pub g2: i64,
    pub d1: i64,
    pub d2: i64,
}

/// Counterfactual fairness for a deterministic model: every intervention on
/// the protected variable yields the same decision at every background point
/// of positive probability.
pub fn check_counterfactual_fairness(
    p: &DecisionProgram,
    c: &CausalModel,
    favorable: i64,
) -> Result<(Spread, Verdict<CounterfactualWitness>)> {
    let cf = Counterfactuals::build(p, c, None)?;
    ensure_binary(cf.program.output_domain(), favorable)?;
    let (table, background) = cf.table(c)?;
    let mut witness = None;
    'search: for (bi, (b, w)) in background.iter().enumerate() {
        if w.is_zero() {
            continue;
        }
        let decision = |gi: usize| {
            let row = &table.probs[bi][gi];
            table.outcomes[row.iter().position(|x| !x.is_zero()).expect("deterministic")]
        };
        for g2 in 1..table.groups.len() {
            if decision(0) != decision(g2) {
                witness = Some(CounterfactualWitness {
                    b: c.background_assignment(b),
                    g1: table.groups[0],
                    g2: table.groups[g2],
                    d1: decision(0),
                    d2: decision(g2),
                });
                break 'search;
            }
        }
    }
    let spread = fairness_spread_of_table(&table, &background, favorable, Backend::Enumeration)?;
    let verdict = match witness {
        Some(w) => Verdict::violated(w),
        None => Verdict::holding(),
    };
    Ok((spread, verdict))
}

/// `Diff_C(P, b)` for every background tuple: does some intervention change
/// the factual decision?
pub fn diff_per_background(p: &DecisionProgram, c: &CausalModel) -> Result<Vec<(Vec<i64>, bool)>> {
    let factual = compose(p, c)?;
    let cf = Counterfactuals::build(p, c, None)?;
    let background = c.background_points()?;
    Ok(background
        .into_par_iter()
        .map(|(b, _)| {
            let d = factual.eval_background(&b);
            let mut inputs = Vec::with_capacity(b.len() + 1);
            inputs.push(0);
            inputs.extend_from_slice(&b);
            let differs = cf.groups.iter().any(|g| {
                inputs[0] = *g;
                cf.program.eval_inputs(&inputs) != d
            });
            (b, differs)
        })
        .collect())
}

/// `Pr[Diff_C(P, B) = 1]`.
pub fn prob_deviating_counterfactual(p: &DecisionProgram, c: &CausalModel, favorable: i64) -> Result<MetricValue> {
    let factual = compose(p, c)?;
    ensure_binary(factual.program().output_domain(), favorable)?;
    let weights: BTreeMap<Vec<i64>, Rational> = c.background_points()?.into_iter().collect();
    let total: Rational = diff_per_background(p, c)?
        .into_iter()
        .filter(|(_, differs)| *differs)
        .map(|(b, _)| weights[&b].clone())
        .sum();
    Ok(MetricValue::new(total, Backend::Enumeration))
}

#[cfg(test)]
mod tests;
