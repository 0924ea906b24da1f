//! Conditional vulnerability and fairness spread.
//!
//! Three routes compute the same quantities and are tested against each
//! other: the definitional sums over a [`ConditionalOutcomeTable`], the
//! projected count of `{(u, d) : ∃g. d = P(g, u)}`, and the identity
//! `S = |𝒢|·V − 1` under uniform groups.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsl::{wrap_program, Assignment, DecisionProgram, ValidatedProgram};
use crate::error::{Error, Result};
use crate::grid::OutcomeGrid;
use crate::rational::{self, Rational};
use crate::spaces::{InputSpace, UniformWrapping};

pub const DECIMAL_PLACES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Enumeration,
    Counting,
    Cpt,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Enumeration => "enumeration",
            Backend::Counting => "counting",
            Backend::Cpt => "cpt",
        })
    }
}

/// An exact metric with its decimal rendering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricValue {
    #[serde(with = "rational::serde_fraction")]
    pub exact: Rational,
    pub decimal: String,
    pub backend: Backend,
}

impl MetricValue {
    pub fn new(exact: Rational, backend: Backend) -> Self {
        let decimal = rational::to_decimal(&exact, DECIMAL_PLACES);
        MetricValue {
            exact,
            decimal,
            backend,
        }
    }

    pub fn render(&self, places: usize) -> String {
        rational::to_decimal(&self.exact, places)
    }
}

/// `μ(g, u, d) = Pr[P(G,U) = d | G = g, U = u]` for every cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionalOutcomeTable {
    pub groups: Vec<i64>,
    pub u_names: Vec<String>,
    pub us: Vec<Vec<i64>>,
    pub outcomes: Vec<i64>,
    /// `probs[u][g][d]`, indices into `us`, `groups`, `outcomes`.
    pub probs: Vec<Vec<Vec<Rational>>>,
}

impl ConditionalOutcomeTable {
    /// Builds a table from explicit rows, checking shape and normalization.
    pub fn from_rows(
        groups: Vec<i64>,
        u_names: Vec<String>,
        us: Vec<Vec<i64>>,
        outcomes: Vec<i64>,
        probs: Vec<Vec<Vec<Rational>>>,
    ) -> Result<Self> {
        let incomplete = |m: String| Err(Error::IncompleteTable(m));
        if groups.is_empty() || us.is_empty() || outcomes.is_empty() {
            return incomplete("the table has no cells".into());
        }
        if outcomes.iter().collect::<BTreeSet<_>>().len() != outcomes.len() {
            return incomplete("repeated outcome".into());
        }
        if probs.len() != us.len() {
            return incomplete(format!("{} rows for {} values of u", probs.len(), us.len()));
        }
        for (u, row) in us.iter().zip(&probs) {
            if u.len() != u_names.len() {
                return incomplete(format!("u = {u:?} does not bind {:?}", u_names));
            }
            if row.len() != groups.len() {
                return incomplete(format!("u = {u:?} lists {} of {} groups", row.len(), groups.len()));
            }
            for (g, cell) in groups.iter().zip(row) {
                if cell.len() != outcomes.len() {
                    return incomplete(format!("cell (g={g}, u={u:?}) has the wrong number of outcomes"));
                }
                if cell.iter().any(Signed::is_negative) || !cell.iter().sum::<Rational>().is_one() {
                    return incomplete(format!("cell (g={g}, u={u:?}) is not a distribution"));
                }
            }
        }
        Ok(ConditionalOutcomeTable {
            groups,
            u_names,
            us,
            outcomes,
            probs,
        })
    }

    /// The deterministic table of a program: every entry is 0 or 1.
    pub fn from_program(p: &ValidatedProgram, space: &InputSpace) -> Result<Self> {
        let grid = OutcomeGrid::build(p, space)?;
        Ok(Self::from_grid(&grid, space, p.output_domain()))
    }

    fn from_grid(grid: &OutcomeGrid, space: &InputSpace, outcomes: &BTreeSet<i64>) -> Self {
        let outcomes: Vec<i64> = outcomes.iter().copied().collect();
        let probs = grid
            .outcomes
            .iter()
            .map(|row| {
                row.iter()
                    .map(|d| {
                        outcomes
                            .iter()
                            .map(|o| if o == d { rational::one() } else { rational::zero() })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        ConditionalOutcomeTable {
            groups: grid.groups.iter().map(|(g, _)| *g).collect(),
            u_names: space.unprotected.iter().map(|v| v.name.clone()).collect(),
            us: grid.us.iter().map(|(u, _)| u.clone()).collect(),
            outcomes,
            probs,
        }
    }

    /// `μ(g, u)` for the favorable outcome, by indices.
    fn favorable_rate(&self, ui: usize, gi: usize, favorable: Option<usize>) -> Rational {
        favorable.map_or_else(rational::zero, |d| self.probs[ui][gi][d].clone())
    }

    fn u_assignment(&self, ui: usize) -> Assignment {
        self.u_names
            .iter()
            .map(String::as_str)
            .zip(self.us[ui].iter().copied())
            .collect()
    }

    fn aligned<'a, K: PartialEq + std::fmt::Debug>(
        keys: &[K],
        dist: &'a [(K, Rational)],
        what: &str,
    ) -> Result<Vec<&'a Rational>> {
        if dist.len() != keys.len() || dist.iter().zip(keys).any(|((k, _), key)| k != key) {
            return Err(Error::IncompleteTable(format!(
                "the {what} distribution does not list the table's {what} values in order"
            )));
        }
        Ok(dist.iter().map(|(_, p)| p).collect())
    }
}

/// Checks that the outcome set is {favorable, other} or a single value.
pub fn ensure_binary(outcomes: &BTreeSet<i64>, favorable: i64) -> Result<()> {
    if outcomes.len() > 2 || (outcomes.len() == 2 && !outcomes.contains(&favorable)) {
        return Err(Error::NonBinaryOutcome {
            outcomes: outcomes.iter().copied().collect(),
            favorable,
        });
    }
    Ok(())
}

/// `V = Σ_u Pr[U=u] Σ_d max_g Pr[G=g]·Pr[P=d | G=g, U=u]`.
pub fn conditional_vulnerability(
    table: &ConditionalOutcomeTable,
    dist_g: &[(i64, Rational)],
    dist_u: &[(Vec<i64>, Rational)],
    backend: Backend,
) -> Result<MetricValue> {
    let pg = ConditionalOutcomeTable::aligned(&table.groups, dist_g, "group")?;
    let pu = ConditionalOutcomeTable::aligned(&table.us, dist_u, "u")?;
    let v: Rational = (0..table.us.len())
        .into_par_iter()
        .map(|ui| {
            let inner: Rational = (0..table.outcomes.len())
                .map(|di| {
                    (0..table.groups.len())
                        .map(|gi| pg[gi] * &table.probs[ui][gi][di])
                        .max()
                        .unwrap_or_else(rational::zero)
                })
                .sum();
            pu[ui] * inner
        })
        .reduce(rational::zero, |a, b| a + b);
    Ok(MetricValue::new(v, backend))
}

/// The same quantity through posteriors:
/// `Σ_u Σ_d Pr[P=d, U=u] · max_g Pr[G=g | P=d, U=u]`.
pub fn conditional_vulnerability_by_posterior(
    table: &ConditionalOutcomeTable,
    dist_g: &[(i64, Rational)],
    dist_u: &[(Vec<i64>, Rational)],
) -> Result<Rational> {
    let pg = ConditionalOutcomeTable::aligned(&table.groups, dist_g, "group")?;
    let pu = ConditionalOutcomeTable::aligned(&table.us, dist_u, "u")?;
    let mut v = rational::zero();
    for ui in 0..table.us.len() {
        for di in 0..table.outcomes.len() {
            let joint: Vec<Rational> = (0..table.groups.len())
                .map(|gi| pu[ui] * pg[gi] * &table.probs[ui][gi][di])
                .collect();
            let marginal: Rational = joint.iter().sum();
            if marginal.is_zero() {
                continue;
            }
            let best = joint.iter().map(|j| j / &marginal).max().expect("non-empty");
            v += marginal * best;
        }
    }
    Ok(v)
}

/// Conditional vulnerability of a program over its space, by enumeration.
pub fn vulnerability(p: &ValidatedProgram, space: &InputSpace) -> Result<MetricValue> {
    let grid = OutcomeGrid::build(p, space)?;
    let table = ConditionalOutcomeTable::from_grid(&grid, space, p.output_domain());
    conditional_vulnerability(&table, &grid.groups, &grid.us, Backend::Enumeration)
}

/// `V` read off a projected count, with the count kept for reporting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountedVulnerability {
    pub count: u64,
    pub value: MetricValue,
}

pub fn ensure_uniform(space: &InputSpace) -> Result<()> {
    for v in std::iter::once(&space.protected).chain(&space.unprotected) {
        if !v.is_uniform() {
            return Err(Error::NonUniformDistribution { name: v.name.clone() });
        }
    }
    Ok(())
}

/// `V = count / (|𝒰|·|𝒢|)`, valid for uniform G and U.
pub fn vulnerability_from_count(count: u64, space: &InputSpace, backend: Backend) -> Result<CountedVulnerability> {
    ensure_uniform(space)?;
    let denom = BigInt::from(space.u_size()) * BigInt::from(space.protected.domain.len());
    Ok(CountedVulnerability {
        count,
        value: MetricValue::new(Rational::new(BigInt::from(count), denom), backend),
    })
}

/// The count formula with the count taken from the SAT backend.
pub fn vulnerability_by_counting(p: &ValidatedProgram, space: &InputSpace) -> Result<CountedVulnerability> {
    ensure_uniform(space)?;
    let count = crate::engine::count_program(p, space)?;
    vulnerability_from_count(count, space, Backend::Counting)
}

/// The count formula with the count taken by enumeration.
pub fn vulnerability_by_enumerated_count(
    p: &ValidatedProgram,
    space: &InputSpace,
) -> Result<CountedVulnerability> {
    ensure_uniform(space)?;
    let count = OutcomeGrid::build(p, space)?.projected_count();
    vulnerability_from_count(count, space, Backend::Enumeration)
}

/// The contribution of one u to the spread.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerU {
    pub u: Assignment,
    #[serde(with = "rational::serde_fraction")]
    pub spread: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spread {
    pub value: MetricValue,
    /// `max_g μ(g,u) − min_g μ(g,u)` for every u, unweighted.
    pub per_u: Vec<PerU>,
}

/// `S = Σ_u Pr[U=u] · (max_g μ(g,u) − min_g μ(g,u))`. The group
/// distribution plays no part.
pub fn fairness_spread_of_table(
    table: &ConditionalOutcomeTable,
    dist_u: &[(Vec<i64>, Rational)],
    favorable: i64,
    backend: Backend,
) -> Result<Spread> {
    ensure_binary(&table.outcomes.iter().copied().collect(), favorable)?;
    let pu = ConditionalOutcomeTable::aligned(&table.us, dist_u, "u")?;
    let fav = table.outcomes.iter().position(|d| *d == favorable);
    let terms: Vec<Rational> = (0..table.us.len())
        .into_par_iter()
        .map(|ui| {
            let rates: Vec<Rational> = (0..table.groups.len())
                .map(|gi| table.favorable_rate(ui, gi, fav))
                .collect();
            let hi = rates.iter().max().expect("non-empty");
            let lo = rates.iter().min().expect("non-empty");
            hi - lo
        })
        .collect();
    let s: Rational = terms.iter().zip(&pu).map(|(t, p)| t * *p).sum();
    let per_u = terms
        .into_iter()
        .enumerate()
        .map(|(ui, spread)| PerU {
            u: table.u_assignment(ui),
            spread,
        })
        .collect();
    Ok(Spread {
        value: MetricValue::new(s, backend),
        per_u,
    })
}

/// Fairness spread of a program over its space, by enumeration.
pub fn fairness_spread(p: &ValidatedProgram, space: &InputSpace, favorable: i64) -> Result<Spread> {
    ensure_binary(p.output_domain(), favorable)?;
    let grid = OutcomeGrid::build(p, space)?;
    let table = ConditionalOutcomeTable::from_grid(&grid, space, p.output_domain());
    fairness_spread_of_table(&table, &grid.us, favorable, Backend::Enumeration)
}

/// `S = |𝒢|·V − 1` with V taken under uniform groups, whatever G's declared
/// distribution.
pub fn fairness_spread_via_vulnerability(
    p: &ValidatedProgram,
    space: &InputSpace,
    favorable: i64,
) -> Result<MetricValue> {
    ensure_binary(p.output_domain(), favorable)?;
    let v = vulnerability(p, &space.with_uniform_groups())?;
    Ok(MetricValue::new(
        spread_from_vulnerability(&v.exact, space),
        v.backend,
    ))
}

pub fn spread_from_vulnerability(v: &Rational, space: &InputSpace) -> Rational {
    let groups = Rational::from_integer(BigInt::from(space.protected.domain.len()));
    groups * v - rational::one()
}

/// A program and space in which every non-uniform unprotected input has been
/// replaced by a uniform raw input and a lookup table.
#[derive(Debug, Clone)]
pub struct Wrapped {
    pub program: DecisionProgram,
    pub space: InputSpace,
    pub wrappings: Vec<UniformWrapping>,
}

/// Wraps the non-uniform unprotected inputs of `space`, plus any input named
/// in `sizes`, which also fixes the number of raw levels.
pub fn wrap_nonuniform(
    p: &DecisionProgram,
    space: &InputSpace,
    sizes: &BTreeMap<String, u64>,
) -> Result<Wrapped> {
    for name in sizes.keys() {
        if !space.unprotected.iter().any(|v| &v.name == name) {
            return Err(Error::UnknownVariable(name.clone()));
        }
    }
    let mut program = p.clone();
    let mut unprotected = Vec::with_capacity(space.unprotected.len());
    let mut wrappings = Vec::new();
    for var in &space.unprotected {
        let size = sizes.get(&var.name).copied();
        if size.is_none() && var.is_uniform() {
            unprotected.push(var.clone());
            continue;
        }
        let w = var.uniformize(size)?;
        program = wrap_program(&program, &w)?;
        unprotected.push(w.raw_variable());
        wrappings.push(w);
    }
    if !wrappings.is_empty() {
        program.name = format!("{}_wrapped", p.name);
    }
    let space = InputSpace::new(space.protected.clone(), unprotected)?.with_cap(space.cap);
    Ok(Wrapped {
        program,
        space,
        wrappings,
    })
}
