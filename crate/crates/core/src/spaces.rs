//! Finite input domains and their exact distributions.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::dsl::Assignment;
use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// Default cap on the number of points an enumeration may visit.
pub const DEFAULT_CAP: u128 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Range { lo: i64, hi: i64 },
    Set(Vec<i64>),
}

impl Domain {
    pub fn range(lo: i64, hi: i64) -> Result<Self> {
        if hi < lo {
            return Err(Error::DomainMismatch(format!("empty range [{lo}, {hi}]")));
        }
        Ok(Domain::Range { lo, hi })
    }

    /// An explicit set; values must be distinct. They are stored sorted.
    pub fn set(values: impl IntoIterator<Item = i64>) -> Result<Self> {
        let mut values: Vec<i64> = values.into_iter().collect();
        if values.is_empty() {
            return Err(Error::DomainMismatch("empty value set".into()));
        }
        values.sort_unstable();
        if values.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::DomainMismatch(format!("duplicate values in {values:?}")));
        }
        Ok(Domain::Set(values))
    }

    pub fn len(&self) -> u64 {
        match self {
            Domain::Range { lo, hi } => (*hi as i128 - *lo as i128 + 1) as u64,
            Domain::Set(v) => v.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, value: i64) -> bool {
        match self {
            Domain::Range { lo, hi } => (*lo..=*hi).contains(&value),
            Domain::Set(v) => v.binary_search(&value).is_ok(),
        }
    }

    pub fn min(&self) -> i64 {
        match self {
            Domain::Range { lo, .. } => *lo,
            Domain::Set(v) => v[0],
        }
    }

    pub fn max(&self) -> i64 {
        match self {
            Domain::Range { hi, .. } => *hi,
            Domain::Set(v) => v[v.len() - 1],
        }
    }

    /// Values in increasing order.
    pub fn values(&self) -> Vec<i64> {
        match self {
            Domain::Range { lo, hi } => (*lo..=*hi).collect(),
            Domain::Set(v) => v.clone(),
        }
    }

    pub fn is_subset_of(&self, other: &Domain) -> bool {
        match (self, other) {
            (Domain::Range { lo, hi }, Domain::Range { lo: l2, hi: h2 }) => l2 <= lo && hi <= h2,
            _ => self.values().iter().all(|v| other.contains(*v)),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Range { lo, hi } => write!(f, "[{lo}, {hi}]"),
            Domain::Set(v) => {
                let items: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "{{{}}}", items.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Distribution {
    Uniform,
    /// Explicit probabilities; domain values without an entry have mass 0.
    Pmf(BTreeMap<i64, Rational>),
}

/// One named input with its domain and distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub domain: Domain,
    pub dist: Distribution,
}

impl Variable {
    pub fn new(name: impl Into<String>, domain: Domain, dist: Distribution) -> Result<Self> {
        let name = name.into();
        if let Distribution::Pmf(pmf) = &dist {
            let invalid = |reason: String| Error::InvalidDistribution {
                name: name.clone(),
                reason,
            };
            let mut total = rational::zero();
            for (value, p) in pmf {
                if !domain.contains(*value) {
                    return Err(invalid(format!("{value} lies outside {domain}")));
                }
                if p.is_negative() {
                    return Err(invalid(format!("negative mass at {value}")));
                }
                total += p;
            }
            if !total.is_one() {
                return Err(invalid(format!(
                    "masses sum to {}, not 1",
                    rational::to_fraction(&total)
                )));
            }
        }
        Ok(Variable { name, domain, dist })
    }

    pub fn uniform(name: impl Into<String>, domain: Domain) -> Self {
        Variable {
            name: name.into(),
            domain,
            dist: Distribution::Uniform,
        }
    }

    pub fn probability(&self, value: i64) -> Rational {
        if !self.domain.contains(value) {
            return rational::zero();
        }
        match &self.dist {
            Distribution::Uniform => Rational::new(BigInt::one(), BigInt::from(self.domain.len())),
            Distribution::Pmf(pmf) => pmf.get(&value).cloned().unwrap_or_else(rational::zero),
        }
    }

    /// `(value, probability)` for every domain value, in increasing order.
    pub fn weights(&self) -> Vec<(i64, Rational)> {
        self.domain
            .values()
            .into_iter()
            .map(|v| (v, self.probability(v)))
            .collect()
    }

    /// True when every domain value carries mass `1/|domain|`, however declared.
    pub fn is_uniform(&self) -> bool {
        match &self.dist {
            Distribution::Uniform => true,
            Distribution::Pmf(_) => {
                let p = Rational::new(BigInt::one(), BigInt::from(self.domain.len()));
                self.weights().iter().all(|(_, w)| *w == p)
            }
        }
    }

    /// Compiles the distribution into `size` equiprobable raw levels plus a
    /// lookup table from level to value. `size` defaults to the least common
    /// denominator of the masses.
    pub fn uniformize(&self, size: Option<u64>) -> Result<UniformWrapping> {
        let weights = self.weights();
        let lcd = rational::common_denominator(weights.iter().map(|(_, w)| w));
        let size = match size {
            Some(s) => s,
            None => lcd.to_u64().ok_or_else(|| Error::NonRepresentable {
                name: self.name.clone(),
                size: 0,
            })?,
        };
        let big = Rational::from_integer(BigInt::from(size));
        let mut table = Vec::with_capacity(size as usize);
        for (value, w) in &weights {
            let levels = w * &big;
            if !levels.is_integer() {
                return Err(Error::NonRepresentable {
                    name: self.name.clone(),
                    size,
                });
            }
            let n = levels.to_integer().to_u64().unwrap_or(0);
            table.extend(std::iter::repeat(*value).take(n as usize));
        }
        debug_assert_eq!(table.len() as u64, size);
        Ok(UniformWrapping {
            name: self.name.clone(),
            raw_name: format!("{}_raw", self.name),
            table,
        })
    }
}

/// Result of [`Variable::uniformize`]: raw level `k` stands for `table[k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniformWrapping {
    pub name: String,
    pub raw_name: String,
    pub table: Vec<i64>,
}

impl UniformWrapping {
    pub fn size(&self) -> u64 {
        self.table.len() as u64
    }

    /// The raw input variable, uniform over `0..size`.
    pub fn raw_variable(&self) -> Variable {
        Variable::uniform(
            self.raw_name.clone(),
            Domain::Range {
                lo: 0,
                hi: self.size() as i64 - 1,
            },
        )
    }

    /// Runs of equal values as `(value, first level past the run)`.
    pub fn runs(&self) -> Vec<(i64, u64)> {
        let mut out: Vec<(i64, u64)> = Vec::new();
        for (k, v) in self.table.iter().enumerate() {
            match out.last_mut() {
                Some((last, end)) if last == v => *end = k as u64 + 1,
                _ => out.push((*v, k as u64 + 1)),
            }
        }
        out
    }
}

/// A point of 𝒢 × 𝒰.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    pub group: i64,
    pub u: Vec<i64>,
}

/// The protected input G and the unprotected components of U, mutually
/// independent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputSpace {
    pub protected: Variable,
    pub unprotected: Vec<Variable>,
    pub cap: u128,
}

impl InputSpace {
    pub fn new(protected: Variable, unprotected: Vec<Variable>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for name in std::iter::once(&protected.name).chain(unprotected.iter().map(|v| &v.name)) {
            if !seen.insert(name.clone()) {
                return Err(Error::Config(format!("input `{name}` declared twice")));
            }
        }
        Ok(InputSpace {
            protected,
            unprotected,
            cap: DEFAULT_CAP,
        })
    }

    pub fn with_cap(mut self, cap: u128) -> Self {
        self.cap = cap;
        self
    }

    /// Same space with G replaced by the uniform distribution over its domain.
    pub fn with_uniform_groups(&self) -> Self {
        let mut out = self.clone();
        out.protected.dist = Distribution::Uniform;
        out
    }

    pub fn with_group_distribution(&self, dist: Distribution) -> Result<Self> {
        let mut out = self.clone();
        out.protected = Variable::new(out.protected.name.clone(), out.protected.domain.clone(), dist)?;
        Ok(out)
    }

    /// Input names, protected first.
    pub fn names(&self) -> Vec<&str> {
        std::iter::once(self.protected.name.as_str())
            .chain(self.unprotected.iter().map(|v| v.name.as_str()))
            .collect()
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        std::iter::once(&self.protected)
            .chain(self.unprotected.iter())
            .find(|v| v.name == name)
    }

    pub fn u_size(&self) -> u128 {
        self.unprotected.iter().map(|v| v.domain.len() as u128).product()
    }

    pub fn size(&self) -> u128 {
        self.protected.domain.len() as u128 * self.u_size()
    }

    pub fn check_cap(&self) -> Result<()> {
        let points = self.size();
        if points > self.cap {
            return Err(Error::SpaceTooLarge {
                points,
                cap: self.cap,
            });
        }
        Ok(())
    }

    pub fn groups(&self) -> Vec<(i64, Rational)> {
        self.protected.weights()
    }

    pub fn assignment(&self, group: i64, u: &[i64]) -> Assignment {
        let mut a = Assignment::default();
        a.set(&self.protected.name, group);
        for (var, value) in self.unprotected.iter().zip(u) {
            a.set(&var.name, *value);
        }
        a
    }

    pub fn u_assignment(&self, u: &[i64]) -> Assignment {
        let mut a = Assignment::default();
        for (var, value) in self.unprotected.iter().zip(u) {
            a.set(&var.name, *value);
        }
        a
    }

    /// Every u ∈ 𝒰 with Pr[U=u], in lexicographic order of the components.
    pub fn marginal_u(&self) -> Result<UPoints> {
        self.check_cap()?;
        Ok(UPoints::new(
            self.unprotected.iter().map(Variable::weights).collect(),
        ))
    }

    /// Every point of 𝒢 × 𝒰 with its product probability, group-major.
    pub fn enumerate(&self) -> Result<impl Iterator<Item = (Point, Rational)> + '_> {
        self.check_cap()?;
        let groups = self.groups();
        Ok(groups.into_iter().flat_map(move |(g, pg)| {
            UPoints::new(self.unprotected.iter().map(Variable::weights).collect()).map(
                move |(u, pu)| {
                    (
                        Point {
                            group: g,
                            u,
                        },
                        &pg * pu,
                    )
                },
            )
        }))
    }

    /// The whole u-space materialized, used by the analyses.
    pub fn u_points(&self) -> Result<Vec<(Vec<i64>, Rational)>> {
        Ok(self.marginal_u()?.collect())
    }
}

/// Odometer over a product of weighted component domains.
pub struct UPoints {
    components: Vec<Vec<(i64, Rational)>>,
    index: Vec<usize>,
    done: bool,
}

impl UPoints {
    pub fn new(components: Vec<Vec<(i64, Rational)>>) -> Self {
        let done = components.iter().any(|c| c.is_empty());
        UPoints {
            index: vec![0; components.len()],
            components,
            done,
        }
    }
}

impl Iterator for UPoints {
    type Item = (Vec<i64>, Rational);

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut values = Vec::with_capacity(self.index.len());
        let mut weight = rational::one();
        for (c, &i) in self.components.iter().zip(&self.index) {
            values.push(c[i].0);
            if !weight.is_zero() {
                weight *= &c[i].1;
            }
        }
        // advance, last component fastest
        let mut k = self.index.len();
        loop {
            if k == 0 {
                self.done = true;
                break;
            }
            k -= 1;
            self.index[k] += 1;
            if self.index[k] < self.components[k].len() {
                break;
            }
            self.index[k] = 0;
        }
        Some((values, weight))
    }
}
