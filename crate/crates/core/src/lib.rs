//! Fairness analysis of small decision programs through information flow.
//!
//! A decision program `P(g, u)` takes one protected input `g` and a tuple of
//! unprotected inputs `u`. The crate decides noninterference-style
//! properties of `P`, computes conditional vulnerability and fairness spread
//! exactly over rationals, and lifts both to structural causal models.
//!
//! * [`dsl`]: parser, typechecker and evaluator for `.dp` programs
//! * [`spaces`]: input domains and exact distributions
//! * [`qualitative`]: noninterference checks and parity tables
//! * [`quantitative`]: conditional vulnerability and fairness spread
//! * [`causal`]: causal models, interventions, counterfactual analyses
//! * [`engine`]: bit-blasting, CNF, the CDCL core and projected counting

pub mod causal;
pub mod corpus;
pub mod dsl;
pub mod engine;
mod error;
pub mod generate;
mod grid;
pub mod qualitative;
pub mod quantitative;
pub mod rational;
pub mod spaces;

pub use error::{Error, Result};
pub use grid::OutcomeGrid;
pub use rational::Rational;

/// Caveat attached to every restricted or conditional information-flow verdict.
pub const FLOW_PARITY_CAVEAT: &str = "Restricted and conditional information flow do not imply \
(conditional) demographic parity: conditioning on the restriction class or on the declassification \
condition changes the input distribution, so this verdict carries no parity guarantee.";
