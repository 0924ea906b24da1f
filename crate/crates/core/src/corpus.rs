//! The shipped example programs, causal models and analysis spaces.

use crate::causal::{parse_model, CausalModel};
use crate::dsl::{parse_program, DecisionProgram, SourceProgram};
use crate::spaces::{Distribution, Domain, InputSpace, Variable};
use crate::rational::ratio;

macro_rules! corpus_file {
    ($name:ident, $file:literal) => {
        pub const $name: (&str, &str) = ($file, include_str!(concat!("../../../corpus/", $file)));
    };
}

corpus_file!(C1, "c1.dp");
corpus_file!(C2, "c2.dp");
corpus_file!(C3, "c3.dp");
corpus_file!(C3_GROUP8, "c3_group8.dp");
corpus_file!(C3_RESTRICTION, "c3_restriction.dp");
corpus_file!(C3_DECLASS, "c3_declass.dp");
corpus_file!(C3_NOT_DECLASS, "c3_not_declass.dp");
corpus_file!(PARITY_WITHOUT_NI, "parity_without_ni.dp");
corpus_file!(CREDIT, "credit.dp");
corpus_file!(MIRROR, "mirror.dp");
corpus_file!(MIRROR_R, "mirror_r.dp");
corpus_file!(MIRROR_R0, "mirror_r0.dp");
corpus_file!(PASSWORD, "password.dp");
corpus_file!(INSURANCE_ENGINE, "insurance_engine.dp");
corpus_file!(INSURANCE_FAIR, "insurance_fair.dp");
corpus_file!(REGIONS_MODEL, "regions.scm");
corpus_file!(INSURANCE_MODEL, "insurance.scm");

/// Programs analyzed over [`scores_space`].
pub const GROUP_SCORE_PROGRAMS: [(&str, &str); 7] =
    [C1, C2, C3, C3_GROUP8, C3_RESTRICTION, C3_DECLASS, C3_NOT_DECLASS];

pub fn program(file: (&str, &str)) -> DecisionProgram {
    let src = SourceProgram {
        text: file.1.to_string(),
        origin: file.0.to_string(),
    };
    parse_program(&src).unwrap_or_else(|e| panic!("corpus program {} is invalid: {e}", file.0))
}

pub fn model(file: (&str, &str)) -> CausalModel {
    parse_model(file.1, file.0).unwrap_or_else(|e| panic!("corpus model {} is invalid: {e}", file.0))
}

fn range(lo: i64, hi: i64) -> Domain {
    Domain::range(lo, hi).expect("non-empty")
}

/// Ten uniform groups, score uniform on [1, 10].
pub fn scores_space() -> InputSpace {
    InputSpace::new(
        Variable::uniform("group", range(0, 9)),
        vec![Variable::uniform("score", range(1, 10))],
    )
    .expect("distinct names")
}

/// Scores 6 and 7 carry 30% of the mass, split evenly; the remaining 70%
/// is spread over the other eight scores as evenly as a 100-level grid allows.
pub fn scores_nonuniform_pmf() -> Distribution {
    let pmf = (1..=10)
        .map(|s| {
            let p = match s {
                6 | 7 => ratio(15, 100),
                4 | 5 => ratio(8, 100),
                _ => ratio(9, 100),
            };
            (s, p)
        })
        .collect();
    Distribution::Pmf(pmf)
}

/// The same 30% mass on scores 6 and 7, the rest exactly uniform (7/80 each).
pub fn scores_even_remainder_pmf() -> Distribution {
    let pmf = (1..=10)
        .map(|s| (s, if s == 6 || s == 7 { ratio(3, 20) } else { ratio(7, 80) }))
        .collect();
    Distribution::Pmf(pmf)
}

pub fn scores_nonuniform_space() -> InputSpace {
    InputSpace::new(
        Variable::uniform("group", range(0, 9)),
        vec![Variable::new("score", range(1, 10), scores_nonuniform_pmf()).expect("valid pmf")],
    )
    .expect("distinct names")
}

pub fn two_by_two_space(g: &str, u: &str, lo: i64, hi: i64) -> InputSpace {
    InputSpace::new(
        Variable::uniform(g, range(lo, hi)),
        vec![Variable::uniform(u, range(lo, hi))],
    )
    .expect("distinct names")
}

/// 𝒢 = 𝒰 = {1, 2}, uniform.
pub fn parity_without_ni_space() -> InputSpace {
    two_by_two_space("group", "u", 1, 2)
}

/// Groups A = 0, B = 1; u false = 0, true = 1.
pub fn mirror_space() -> InputSpace {
    two_by_two_space("g", "u", 0, 1)
}

/// Secret and guess uniform on {1, 2, 3}.
pub fn password_space() -> InputSpace {
    two_by_two_space("secret", "guess", 1, 3)
}

/// gender ∈ {0, 1}, amount uniform on [1, 10].
pub fn credit_space() -> InputSpace {
    InputSpace::new(
        Variable::uniform("gender", range(0, 1)),
        vec![Variable::uniform("amount", range(1, 10))],
    )
    .expect("distinct names")
}

/// The credit program with threshold `t`.
pub fn credit(t: i64) -> DecisionProgram {
    program(CREDIT)
        .with_constants([("T", t)])
        .expect("credit declares T")
}

/// Every shipped program paired with the space it is analyzed over.
pub fn programs_with_spaces() -> Vec<(DecisionProgram, InputSpace)> {
    let mut out: Vec<(DecisionProgram, InputSpace)> = GROUP_SCORE_PROGRAMS
        .iter()
        .map(|f| (program(*f), scores_space()))
        .collect();
    out.push((program(C3), scores_nonuniform_space()));
    out.push((program(PARITY_WITHOUT_NI), parity_without_ni_space()));
    out.push((program(MIRROR), mirror_space()));
    out.push((program(MIRROR_R0), mirror_space()));
    out.push((program(PASSWORD), password_space()));
    for t in [0, 3, 5, 7, 10] {
        out.push((credit(t), credit_space()));
    }
    out
}
