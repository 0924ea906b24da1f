use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::dsl::ValidatedProgram;
use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::spaces::InputSpace;

/// Every decision `P(g, u)` of a program over its space, u-major.
///
/// All enumeration-backed analyses read from this table; it is filled in
/// parallel over u.
#[derive(Debug, Clone)]
pub struct OutcomeGrid {
    pub groups: Vec<(i64, Rational)>,
    pub us: Vec<(Vec<i64>, Rational)>,
    /// `outcomes[u][g]`, indices into `us` and `groups`.
    pub outcomes: Vec<Vec<i64>>,
}

impl OutcomeGrid {
    pub fn build(p: &ValidatedProgram, space: &InputSpace) -> Result<Self> {
        ensure_matches(p, space)?;
        space.check_cap()?;
        let groups = space.groups();
        let us = space.u_points()?;
        let outcomes = us
            .par_iter()
            .map(|(u, _)| groups.iter().map(|(g, _)| p.eval_point(*g, u)).collect())
            .collect();
        Ok(OutcomeGrid {
            groups,
            us,
            outcomes,
        })
    }

    /// Distinct decisions reachable at u-index `i` by varying the group.
    pub fn distinct_at(&self, i: usize) -> BTreeSet<i64> {
        self.outcomes[i].iter().copied().collect()
    }

    /// |{(u, d) : ∃g. P(g, u) = d}|
    pub fn projected_count(&self) -> u64 {
        (0..self.us.len()).map(|i| self.distinct_at(i).len() as u64).sum()
    }

    pub fn outcome_set(&self) -> BTreeSet<i64> {
        self.outcomes.iter().flatten().copied().collect()
    }
}

/// The program's input order must be the space's (protected first).
pub(crate) fn ensure_matches(p: &ValidatedProgram, space: &InputSpace) -> Result<()> {
    let names = space.names();
    let ok = p.input_names() == names
        && p
            .inputs()
            .iter()
            .zip(std::iter::once(&space.protected).chain(&space.unprotected))
            .all(|((_, d), v)| *d == v.domain);
    if ok {
        Ok(())
    } else {
        Err(Error::DomainMismatch(format!(
            "program `{}` was checked against inputs ({}) but the space declares ({})",
            p.name(),
            p.input_names().join(", "),
            names.join(", ")
        )))
    }
}
