//! The bit-blasting backend: programs become 32-bit circuits, circuits become
//! CNF, and an in-repo CDCL solver counts the `(u, d)` pairs reachable for
//! some group. Enumeration is the reference; [`cross_check`] compares the two.

pub mod bitblast;
pub mod circuit;
pub mod cnf;
pub mod count;
pub mod sat;

use std::collections::BTreeSet;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use bitblast::bitblast;
pub use circuit::Circuit;
pub use cnf::{to_cnf, CnfFormula};
pub use count::{projected_count, ProjectedCount};

use crate::dsl::{Assignment, ValidatedProgram};
use crate::error::{Error, Result};
use crate::grid::OutcomeGrid;
use crate::spaces::InputSpace;

/// Conflict budget per solver call used when none is given.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// Projected count of a program over its space through the SAT backend.
pub fn count_program(p: &ValidatedProgram, space: &InputSpace) -> Result<u64> {
    let circuit = bitblast(p, space)?;
    Ok(projected_count(&to_cnf(&circuit), Some(DEFAULT_BUDGET))?.count())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub enumeration_ms: f64,
    pub counting_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub program: String,
    pub enumeration: u64,
    pub counting: u64,
    pub gates: usize,
    pub clauses: usize,
    pub timings: Timings,
}

fn enumerated_pairs(grid: &OutcomeGrid) -> BTreeSet<(Vec<i64>, i64)> {
    grid.us
        .iter()
        .zip(&grid.outcomes)
        .flat_map(|((u, _), row)| row.iter().map(move |d| (u.clone(), *d)))
        .collect()
}

/// Compares the SAT count of `circuit` with the enumerated count of `p`.
pub fn cross_check_circuit(
    p: &ValidatedProgram,
    space: &InputSpace,
    circuit: &Circuit,
    budget: Option<u64>,
) -> Result<CrossCheck> {
    let t = Instant::now();
    let grid = OutcomeGrid::build(p, space)?;
    let expected = enumerated_pairs(&grid);
    let enumeration_ms = t.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let f = to_cnf(circuit);
    let counted = projected_count(&f, budget)?;
    let counting_ms = t.elapsed().as_secs_f64() * 1e3;

    if counted.pairs != expected {
        let describe = |(u, d): &(Vec<i64>, i64), only: &str| {
            format!("(u = ({}), d = {d}) found only by {only}", space.u_assignment(u))
        };
        let witness = match expected.difference(&counted.pairs).next() {
            Some(x) => describe(x, "enumeration"),
            None => describe(
                counted.pairs.difference(&expected).next().expect("sets differ"),
                "counting",
            ),
        };
        return Err(Error::BackendMismatch {
            enumeration: expected.len() as u64,
            counting: counted.count(),
            witness,
        });
    }
    Ok(CrossCheck {
        program: p.name().to_string(),
        enumeration: expected.len() as u64,
        counting: counted.count(),
        gates: circuit.len(),
        clauses: f.clauses.len(),
        timings: Timings {
            enumeration_ms,
            counting_ms,
        },
    })
}

/// Both backends on the same program; a disagreement is a
/// [`Error::BackendMismatch`].
pub fn cross_check(p: &ValidatedProgram, space: &InputSpace) -> Result<CrossCheck> {
    let circuit = bitblast(p, space)?;
    cross_check_circuit(p, space, &circuit, Some(DEFAULT_BUDGET))
}

/// An input on which circuit and evaluator disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitMismatch {
    pub input: Assignment,
    pub evaluator: i64,
    pub circuit: i64,
}

/// Runs `samples` random in-domain inputs through both the circuit and the
/// evaluator, 64 at a time. Side conditions must also hold on every sample.
pub fn differential_test(
    p: &ValidatedProgram,
    circuit: &Circuit,
    samples: usize,
    rng: &mut impl Rng,
) -> Option<CircuitMismatch> {
    let domains: Vec<Vec<i64>> = p.inputs().iter().map(|(_, d)| d.values()).collect();
    let mut done = 0;
    while done < samples {
        let mut lanes = vec![[0i64; 64]; domains.len()];
        for lane in 0..64 {
            for (k, d) in domains.iter().enumerate() {
                lanes[k][lane] = d[rng.gen_range(0..d.len())];
            }
        }
        let values = circuit.simulate64(&lanes);
        for lane in 0..64 {
            let inputs: Vec<i64> = lanes.iter().map(|l| l[lane]).collect();
            let expected = p.eval_inputs(&inputs);
            let got = Circuit::word_value(&values, &circuit.outputs, lane);
            let in_domain = circuit
                .side_conditions
                .iter()
                .all(|b| (values[b.0 as usize] >> lane) & 1 == 1);
            if got != expected || !in_domain {
                return Some(CircuitMismatch {
                    input: p.input_names().into_iter().zip(inputs.iter().copied()).collect(),
                    evaluator: expected,
                    circuit: got,
                });
            }
        }
        done += 64;
    }
    None
}
