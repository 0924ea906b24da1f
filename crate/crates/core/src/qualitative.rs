//! Noninterference flavors and (conditional) demographic parity.
//!
//! Restricted and conditional information flow are decided here, but no
//! parity guarantee is derived from them; see [`crate::FLOW_PARITY_CAVEAT`].

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::dsl::{Assignment, ValidatedProgram};
use crate::error::{Error, Result};
use crate::grid::OutcomeGrid;
use crate::rational::{self, Rational};
use crate::spaces::InputSpace;

/// Two runs that agree on u but not on the decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub g1: i64,
    pub g2: i64,
    pub u: Assignment,
    pub d1: i64,
    pub d2: i64,
}

impl Counterexample {
    /// Re-runs both executions through the evaluator.
    pub fn revalidate(&self, p: &ValidatedProgram, space: &InputSpace) -> bool {
        let run = |g: i64| {
            let mut a = self.u.clone();
            a.set(&space.protected.name, g);
            p.evaluate(&a).ok()
        };
        self.d1 != self.d2 && run(self.g1) == Some(self.d1) && run(self.g2) == Some(self.d2)
    }
}

/// Outcome of a check; `witness` is present exactly when the property fails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict<W = Counterexample> {
    pub holds: bool,
    pub witness: Option<W>,
}

impl<W> Verdict<W> {
    pub fn holding() -> Self {
        Verdict {
            holds: true,
            witness: None,
        }
    }

    pub fn violated(witness: W) -> Self {
        Verdict {
            holds: false,
            witness: Some(witness),
        }
    }

    fn from_witness(witness: Option<W>) -> Self {
        match witness {
            Some(w) => Self::violated(w),
            None => Self::holding(),
        }
    }
}

/// Exact group-conditional outcome distributions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParityTable {
    pub groups: Vec<i64>,
    pub outcomes: Vec<i64>,
    /// `rows[g][d]` = Pr[P(G,U) = d | G = g (, condition)]
    #[serde(with = "rows_serde")]
    pub rows: Vec<Vec<Rational>>,
    #[serde(with = "rational::serde_fraction")]
    pub max_gap: Rational,
}

mod rows_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(rows: &[Vec<Rational>], s: S) -> std::result::Result<S::Ok, S::Error> {
        let text: Vec<Vec<String>> = rows
            .iter()
            .map(|r| r.iter().map(rational::to_fraction).collect())
            .collect();
        text.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<Rational>>, D::Error> {
        let text: Vec<Vec<String>> = Vec::deserialize(d)?;
        text.iter()
            .map(|r| {
                r.iter()
                    .map(|x| rational::parse(x).map_err(serde::de::Error::custom))
                    .collect()
            })
            .collect()
    }
}

impl ParityTable {
    pub fn probability(&self, group: i64, outcome: i64) -> Option<&Rational> {
        let g = self.groups.iter().position(|x| *x == group)?;
        let d = self.outcomes.iter().position(|x| *x == outcome)?;
        Some(&self.rows[g][d])
    }
}

/// The pair of groups and the outcome realizing a parity table's largest gap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParityGap {
    pub outcome: i64,
    pub favored: i64,
    pub disfavored: i64,
    #[serde(with = "rational::serde_fraction")]
    pub favored_rate: Rational,
    #[serde(with = "rational::serde_fraction")]
    pub disfavored_rate: Rational,
}

fn same_inputs(p: &ValidatedProgram, other: &ValidatedProgram, role: &str) -> Result<()> {
    if p.inputs() != other.inputs() {
        return Err(Error::DomainMismatch(format!(
            "{role} `{}` must take the same inputs as `{}`",
            other.name(),
            p.name()
        )));
    }
    Ok(())
}

fn boolean_valued(p: &ValidatedProgram) -> Result<()> {
    if p.output_domain().iter().all(|v| *v == 0 || *v == 1) {
        Ok(())
    } else {
        Err(Error::DomainMismatch(format!(
            "condition `{}` returns {:?}, not booleans",
            p.name(),
            p.output_domain()
        )))
    }
}

/// First violation in (u, g1, g2) order among pairs allowed by `comparable`.
fn first_violation(
    grid: &OutcomeGrid,
    space: &InputSpace,
    comparable: impl Fn(usize, usize, usize) -> bool,
) -> Option<Counterexample> {
    for (ui, (u, _)) in grid.us.iter().enumerate() {
        let row = &grid.outcomes[ui];
        for g1 in 0..row.len() {
            for g2 in g1 + 1..row.len() {
                if row[g1] != row[g2] && comparable(ui, g1, g2) {
                    return Some(Counterexample {
                        g1: grid.groups[g1].0,
                        g2: grid.groups[g2].0,
                        u: space.u_assignment(u),
                        d1: row[g1],
                        d2: row[g2],
                    });
                }
            }
        }
    }
    None
}

/// ∀ g1, g2, u: P(g1, u) = P(g2, u).
pub fn check_unconditional_ni(p: &ValidatedProgram, space: &InputSpace) -> Result<Verdict> {
    let grid = OutcomeGrid::build(p, space)?;
    Ok(Verdict::from_witness(first_violation(&grid, space, |_, _, _| true)))
}

/// ∀ g1, g2, u: R(g1, u) = R(g2, u) ⟹ P(g1, u) = P(g2, u).
pub fn check_restricted_if(
    p: &ValidatedProgram,
    r: &ValidatedProgram,
    space: &InputSpace,
) -> Result<Verdict> {
    same_inputs(p, r, "restriction")?;
    let grid = OutcomeGrid::build(p, space)?;
    let classes = OutcomeGrid::build(r, space)?;
    Ok(Verdict::from_witness(first_violation(&grid, space, |u, g1, g2| {
        classes.outcomes[u][g1] == classes.outcomes[u][g2]
    })))
}

/// ∀ g1, g2, u: ¬ψ(g1, u) ∧ ¬ψ(g2, u) ⟹ P(g1, u) = P(g2, u).
pub fn check_conditional_if(
    p: &ValidatedProgram,
    psi: &ValidatedProgram,
    space: &InputSpace,
) -> Result<Verdict> {
    same_inputs(p, psi, "condition")?;
    boolean_valued(psi)?;
    let grid = OutcomeGrid::build(p, space)?;
    let declass = OutcomeGrid::build(psi, space)?;
    Ok(Verdict::from_witness(first_violation(&grid, space, |u, g1, g2| {
        declass.outcomes[u][g1] == 0 && declass.outcomes[u][g2] == 0
    })))
}

fn parity_from_masses(
    groups: Vec<i64>,
    outcomes: Vec<i64>,
    masses: Vec<Vec<Rational>>,
    tol: &Rational,
) -> (ParityTable, Verdict<ParityGap>) {
    let rows: Vec<Vec<Rational>> = masses
        .into_iter()
        .map(|m| {
            let total: Rational = m.iter().sum();
            m.into_iter().map(|x| x / &total).collect()
        })
        .collect();
    let mut best: Option<ParityGap> = None;
    let mut max_gap = rational::zero();
    // ties go to the larger outcome, so binary programs report the rate of 1
    for (di, d) in outcomes.iter().enumerate() {
        let (mut hi, mut lo) = (0usize, 0usize);
        for gi in 0..groups.len() {
            if rows[gi][di] > rows[hi][di] {
                hi = gi;
            }
            if rows[gi][di] < rows[lo][di] {
                lo = gi;
            }
        }
        let gap = &rows[hi][di] - &rows[lo][di];
        if gap >= max_gap {
            max_gap = gap;
            best = Some(ParityGap {
                outcome: *d,
                favored: groups[hi],
                disfavored: groups[lo],
                favored_rate: rows[hi][di].clone(),
                disfavored_rate: rows[lo][di].clone(),
            });
        }
    }
    let verdict = if max_gap <= *tol {
        Verdict::holding()
    } else {
        Verdict::violated(best.expect("positive gap has a witness"))
    };
    (
        ParityTable {
            groups,
            outcomes,
            rows,
            max_gap,
        },
        verdict,
    )
}

fn check_tolerance(tol: &Rational) -> Result<()> {
    if tol.is_negative() {
        return Err(Error::Config("tolerance must be non-negative".into()));
    }
    Ok(())
}

/// Pr[P(G,U)=d | G=g] for every g and d; holds when the largest gap is at
/// most `tol` (compared exactly).
pub fn demographic_parity(
    p: &ValidatedProgram,
    space: &InputSpace,
    tol: &Rational,
) -> Result<(ParityTable, Verdict<ParityGap>)> {
    check_tolerance(tol)?;
    let grid = OutcomeGrid::build(p, space)?;
    if let Some((g, _)) = grid.groups.iter().find(|(_, w)| w.is_zero()) {
        return Err(Error::ZeroMassGroup { group: *g });
    }
    let outcomes: Vec<i64> = p.output_domain().iter().copied().collect();
    let mut masses = vec![vec![rational::zero(); outcomes.len()]; grid.groups.len()];
    for (ui, (_, pu)) in grid.us.iter().enumerate() {
        for (gi, d) in grid.outcomes[ui].iter().enumerate() {
            let di = outcomes.binary_search(d).expect("outputs lie in the output domain");
            masses[gi][di] += pu;
        }
    }
    if let Some(gi) = masses.iter().position(|m| m.iter().all(Zero::is_zero)) {
        return Err(Error::ZeroMassGroup {
            group: grid.groups[gi].0,
        });
    }
    let groups = grid.groups.iter().map(|(g, _)| *g).collect();
    Ok(parity_from_masses(groups, outcomes, masses, tol))
}

/// Pr[P(G,U)=d | G=g, cond(G,U)] under the joint distribution restricted to
/// `cond`.
pub fn conditional_demographic_parity(
    p: &ValidatedProgram,
    cond: &ValidatedProgram,
    space: &InputSpace,
    tol: &Rational,
) -> Result<(ParityTable, Verdict<ParityGap>)> {
    check_tolerance(tol)?;
    same_inputs(p, cond, "condition")?;
    boolean_valued(cond)?;
    let grid = OutcomeGrid::build(p, space)?;
    let holds = OutcomeGrid::build(cond, space)?;
    let outcomes: Vec<i64> = p.output_domain().iter().copied().collect();
    let mut masses = vec![vec![rational::zero(); outcomes.len()]; grid.groups.len()];
    for (ui, (_, pu)) in grid.us.iter().enumerate() {
        for (gi, (_, pg)) in grid.groups.iter().enumerate() {
            if holds.outcomes[ui][gi] != 0 {
                let d = grid.outcomes[ui][gi];
                let di = outcomes.binary_search(&d).expect("outputs lie in the output domain");
                masses[gi][di] += pu * pg;
            }
        }
    }
    let totals: Vec<Rational> = masses.iter().map(|m| m.iter().sum()).collect();
    if totals.iter().all(Zero::is_zero) {
        return Err(Error::ZeroMassCondition);
    }
    if let Some(gi) = totals.iter().position(Zero::is_zero) {
        return Err(Error::ZeroMassGroup {
            group: grid.groups[gi].0,
        });
    }
    let groups = grid.groups.iter().map(|(g, _)| *g).collect();
    Ok(parity_from_masses(groups, outcomes, masses, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{self, *};
    use crate::dsl::{parse_program, typecheck, SourceProgram};
    use crate::rational::ratio;

    fn checked(file: (&str, &str), space: &InputSpace) -> ValidatedProgram {
        typecheck(&corpus::program(file), space).unwrap()
    }

    fn inline(src: &str, space: &InputSpace) -> ValidatedProgram {
        typecheck(&parse_program(&SourceProgram::inline(src)).unwrap(), space).unwrap()
    }

    #[test]
    fn unconditional_ni_on_the_three_classifiers() {
        let space = scores_space();
        let v = check_unconditional_ni(&checked(C1, &space), &space).unwrap();
        assert_eq!(
            v.witness,
            Some(Counterexample {
                g1: 0,
                g2: 1,
                u: Assignment::new().with("score", 1),
                d1: 0,
                d2: 1
            })
        );
        assert!(check_unconditional_ni(&checked(C2, &space), &space).unwrap().holds);
        let c3 = checked(C3, &space);
        let v = check_unconditional_ni(&c3, &space).unwrap();
        let w = v.witness.unwrap();
        assert_eq!((w.g1, w.g2, w.u.get("score"), w.d1, w.d2), (0, 6, Some(6), 1, 0));
        assert!(w.revalidate(&c3, &space));
    }

    #[test]
    fn constant_program_is_noninterferent() {
        let space = scores_space();
        let p = inline("program k(group, score) { return 1; }", &space);
        assert!(check_unconditional_ni(&p, &space).unwrap().holds);
    }

    #[test]
    fn restricted_flow_on_c3_and_its_variant() {
        let space = scores_space();
        let r = checked(C3_RESTRICTION, &space);
        assert!(check_restricted_if(&checked(C3, &space), &r, &space).unwrap().holds);
        let v = check_restricted_if(&checked(C3_GROUP8, &space), &r, &space).unwrap();
        assert!(!v.holds);
        let w = v.witness.unwrap();
        // groups 6/7 and 8/9 share a class at score 6 but are treated differently
        assert_eq!((w.g1, w.g2, w.u.get("score")), (6, 8, Some(6)));
        assert!(w.revalidate(&checked(C3_GROUP8, &space), &space));
    }

    #[test]
    fn conditional_flow_on_c3_and_its_variant() {
        let space = scores_space();
        let psi = checked(C3_DECLASS, &space);
        assert!(check_conditional_if(&checked(C3, &space), &psi, &space).unwrap().holds);
        assert!(check_conditional_if(&checked(C3_GROUP8, &space), &psi, &space).unwrap().holds);
        let always = inline("program t(group, score) { return true; }", &space);
        assert!(check_conditional_if(&checked(C1, &space), &always, &space).unwrap().holds);
    }

    #[test]
    fn restriction_must_share_the_signature() {
        let space = scores_space();
        let other = corpus::two_by_two_space("group", "other", 0, 9);
        let r = inline("program r(group, other) { return 0; }", &other);
        assert!(matches!(
            check_restricted_if(&checked(C3, &space), &r, &space),
            Err(Error::DomainMismatch(_))
        ));
    }

    #[test]
    fn mirror_program() {
        let space = mirror_space();
        let p = checked(MIRROR, &space);
        let r = checked(MIRROR_R, &space);
        assert!(check_restricted_if(&p, &r, &space).unwrap().holds);
        let cond = checked(MIRROR_R0, &space);
        let (table, verdict) = conditional_demographic_parity(&p, &cond, &space, &rational::zero()).unwrap();
        assert!(!verdict.holds);
        assert_eq!(table.probability(0, 1), Some(&rational::one()));
        assert_eq!(table.probability(1, 1), Some(&rational::zero()));
        assert_eq!(table.max_gap, rational::one());
    }

    #[test]
    fn parity_examples() {
        let space = scores_space();
        let (table, v) = demographic_parity(&checked(C2, &space), &space, &rational::zero()).unwrap();
        assert!(v.holds);
        for g in 0..10 {
            assert_eq!(table.probability(g, 1), Some(&ratio(3, 10)));
        }

        let space = parity_without_ni_space();
        let p = checked(PARITY_WITHOUT_NI, &space);
        let (table, v) = demographic_parity(&p, &space, &rational::zero()).unwrap();
        assert!(v.holds);
        assert_eq!(table.probability(1, 1), Some(&ratio(1, 2)));
        assert_eq!(table.probability(2, 1), Some(&ratio(1, 2)));
        assert!(!check_unconditional_ni(&p, &space).unwrap().holds);

        let space = credit_space();
        let credit = typecheck(&corpus::credit(5), &space).unwrap();
        let (table, v) = demographic_parity(&credit, &space, &rational::zero()).unwrap();
        assert!(v.holds);
        assert_eq!(table.probability(0, 1), Some(&ratio(1, 2)));
    }

    #[test]
    fn parity_tolerance_is_exact() {
        let space = scores_space();
        let c3 = checked(C3, &space);
        let (table, v) = demographic_parity(&c3, &space, &rational::zero()).unwrap();
        assert_eq!(table.max_gap, ratio(1, 5));
        let gap = v.witness.unwrap();
        assert_eq!((gap.favored, gap.disfavored), (0, 6));
        assert!(demographic_parity(&c3, &space, &ratio(1, 5)).unwrap().1.holds);
        assert!(!demographic_parity(&c3, &space, &ratio(19, 100)).unwrap().1.holds);
    }

    #[test]
    fn conditional_parity_of_c3_off_the_declassified_region() {
        // Conditioning on ¬ψ changes the score distribution seen by the
        // older groups, so parity fails even though conditional flow holds.
        let space = scores_space();
        let c3 = checked(C3, &space);
        let cond = checked(C3_NOT_DECLASS, &space);
        let (table, v) = conditional_demographic_parity(&c3, &cond, &space, &rational::zero()).unwrap();
        assert_eq!(table.probability(0, 1), Some(&ratio(1, 2)));
        assert_eq!(table.probability(6, 1), Some(&ratio(3, 8)));
        assert_eq!(table.max_gap, ratio(1, 8));
        assert!(!v.holds);
    }

    #[test]
    fn constant_program_has_conditional_parity() {
        let space = scores_space();
        let k = inline("program k(group, score) { return 0; }", &space);
        let cond = checked(C3_NOT_DECLASS, &space);
        assert!(conditional_demographic_parity(&k, &cond, &space, &rational::zero()).unwrap().1.holds);
    }

    #[test]
    fn zero_mass_errors() {
        let space = scores_space();
        let never = inline("program n(group, score) { return false; }", &space);
        assert_eq!(
            conditional_demographic_parity(&checked(C3, &space), &never, &space, &rational::zero()).unwrap_err(),
            Error::ZeroMassCondition
        );
        let young = inline("program y(group, score) { return group < 5; }", &space);
        assert!(matches!(
            conditional_demographic_parity(&checked(C3, &space), &young, &space, &rational::zero()),
            Err(Error::ZeroMassGroup { group: 5 })
        ));
        let skewed = space
            .with_group_distribution(crate::spaces::Distribution::Pmf(
                (0..10).map(|g| (g, if g == 0 { rational::one() } else { rational::zero() })).collect(),
            ))
            .unwrap();
        assert!(matches!(
            demographic_parity(&checked(C2, &skewed), &skewed, &rational::zero()),
            Err(Error::ZeroMassGroup { group: 1 })
        ));
    }
}
