//! The built-in golden suite behind `fairflow reproduce`.

use std::collections::BTreeMap;

use fairflow::causal::{self, PathSpec};
use fairflow::corpus::{self, *};
use fairflow::dsl::{typecheck, DecisionProgram, ValidatedProgram};
use fairflow::engine;
use fairflow::qualitative;
use fairflow::quantitative::{self, Backend, ConditionalOutcomeTable};
use fairflow::rational::{self, ratio, Rational};
use fairflow::spaces::InputSpace;
use fairflow::Result;

use crate::report::{GoldenRow, Report};
use crate::{EXIT_HOLDS, EXIT_VIOLATED};

struct Matrix(Vec<GoldenRow>);

impl Matrix {
    fn check(&mut self, name: &str, expected: impl Into<String>, actual: Result<String>) {
        let expected = expected.into();
        let actual = actual.unwrap_or_else(|e| format!("error: {e}"));
        self.0.push(GoldenRow {
            name: name.into(),
            pass: actual == expected,
            expected,
            actual,
        });
    }
}

fn frac(r: &Rational) -> String {
    rational::to_fraction(r)
}

fn checked(p: &DecisionProgram, space: &InputSpace) -> Result<ValidatedProgram> {
    typecheck(p, space)
}

/// `count, V, S` by enumeration, with the SAT count required to agree.
fn score_row(p: &DecisionProgram, space: &InputSpace, sizes: &BTreeMap<String, u64>) -> Result<String> {
    let native = checked(p, space)?;
    let v = quantitative::vulnerability(&native, space)?;
    let s = quantitative::fairness_spread(&native, space, 1)?;
    let w = quantitative::wrap_nonuniform(p, space, sizes)?;
    let wrapped = checked(&w.program, &w.space)?;
    let x = engine::cross_check(&wrapped, &w.space)?;
    let counted = quantitative::vulnerability_from_count(x.counting, &w.space, Backend::Counting)?;
    if counted.value.exact != v.exact {
        return Ok(format!("V by counting {} differs", frac(&counted.value.exact)));
    }
    Ok(format!(
        "count {}, V {}, S {}",
        x.counting,
        frac(&v.exact),
        frac(&s.value.exact)
    ))
}

fn spread_of(p: &DecisionProgram, space: &InputSpace) -> Result<Rational> {
    Ok(quantitative::fairness_spread(&checked(p, space)?, space, 1)?.value.exact)
}

fn two_dp(r: &Rational) -> String {
    format!("{} ({})", frac(r), rational::to_decimal(r, 2))
}

fn cpt(p00: Rational) -> Result<ConditionalOutcomeTable> {
    let cell = |p1: Rational| vec![rational::one() - &p1, p1];
    ConditionalOutcomeTable::from_rows(
        vec![0, 1],
        vec!["u".into()],
        vec![vec![0]],
        vec![0, 1],
        vec![vec![cell(p00), cell(ratio(1, 2))]],
    )
}

fn verdict(holds: bool) -> String {
    if holds { "holds" } else { "violated" }.into()
}

pub(crate) fn run() -> (Report, i32) {
    let mut m = Matrix(Vec::new());
    let scores = scores_space();
    let none = BTreeMap::new();

    for (name, file, expected) in [
        ("c1: count, V, S", C1, "count 20, V 1/5, S 1"),
        ("c2: count, V, S", C2, "count 10, V 1/10, S 0"),
        ("c3: count, V, S", C3, "count 12, V 3/25, S 1/5"),
    ] {
        m.check(name, expected, score_row(&corpus::program(file), &scores, &none));
    }
    let sizes = BTreeMap::from([("score".to_string(), 100)]);
    m.check(
        "c3, 30% mass on scores 6-7, 100 levels",
        "count 130, V 13/100, S 3/10",
        score_row(&corpus::program(C3), &scores_nonuniform_space(), &sizes),
    );

    m.check(
        "S = |G|V - 1 on the corpus",
        "holds",
        corpus::programs_with_spaces()
            .iter()
            .try_fold(true, |ok, (p, space)| {
                let v = checked(p, space)?;
                let s = quantitative::fairness_spread(&v, space, 1)?;
                let t = quantitative::fairness_spread_via_vulnerability(&v, space, 1)?;
                Ok(ok && s.value.exact == t.exact)
            })
            .map(verdict),
    );

    let regions = corpus::model(REGIONS_MODEL);
    for (name, file, expected) in [
        ("regions model: c3 spread", C3, "8/35 (0.23)"),
        ("regions model: c2 spread", C2, "131/490 (0.27)"),
    ] {
        m.check(
            name,
            expected,
            causal::spread_over_background(&corpus::program(file), &regions, 1).map(|s| two_dp(&s.value.exact)),
        );
    }
    let zip = PathSpec::new(["zipCode"]);
    for (name, file, expected) in [
        ("zipCode held factual: c3 spread", C3, "67/350 (0.19)"),
        ("zipCode held factual: c2 spread", C2, "0 (0.00)"),
    ] {
        m.check(
            name,
            expected,
            causal::path_specific_spread(&corpus::program(file), &regions, &zip, 1).map(|s| two_dp(&s.value.exact)),
        );
    }

    let insurance = corpus::model(INSURANCE_MODEL);
    m.check(
        "insurance: gender-corrected classifier",
        "0, counterfactually fair",
        causal::check_counterfactual_fairness(&corpus::program(INSURANCE_FAIR), &insurance, 1).map(|(s, v)| {
            format!(
                "{}, {}",
                frac(&s.value.exact),
                if v.holds { "counterfactually fair" } else { "unfair" }
            )
        }),
    );
    m.check(
        "insurance: engine-only classifier",
        "37/101 (0.37), within 0.02 of 0.36",
        causal::spread_over_background(&corpus::program(INSURANCE_ENGINE), &insurance, 1).map(|s| {
            let close = (rational::to_f64(&s.value.exact) - 0.36).abs() <= 0.02;
            format!(
                "{}, {} 0.02 of 0.36",
                two_dp(&s.value.exact),
                if close { "within" } else { "beyond" }
            )
        }),
    );
    m.check(
        "insurance: Pr[Diff = 1] equals the spread",
        "holds",
        [INSURANCE_ENGINE, INSURANCE_FAIR]
            .iter()
            .try_fold(true, |ok, f| {
                let p = corpus::program(*f);
                let d = causal::prob_deviating_counterfactual(&p, &insurance, 1)?;
                let s = causal::spread_over_background(&p, &insurance, 1)?;
                Ok(ok && d.exact == s.value.exact)
            })
            .map(verdict),
    );

    let pw = password_space();
    m.check(
        "password checker: V",
        "2/3",
        (|| {
            let p = checked(&corpus::program(PASSWORD), &pw)?;
            let t = ConditionalOutcomeTable::from_program(&p, &pw)?;
            let v = quantitative::conditional_vulnerability(&t, &pw.groups(), &pw.u_points()?, Backend::Cpt)?;
            Ok(frac(&v.exact))
        })(),
    );

    m.check(
        "two CPTs with Pr[G=1] = 49/50: V and S",
        "V 49/50 and 49/50, S 1/2 and 0",
        (|| {
            let dist_g = vec![(0, ratio(1, 50)), (1, ratio(49, 50))];
            let dist_u = vec![(vec![0], rational::one())];
            let mut vs = Vec::new();
            let mut ss = Vec::new();
            for t in [cpt(rational::zero())?, cpt(ratio(1, 2))?] {
                vs.push(frac(&quantitative::conditional_vulnerability(&t, &dist_g, &dist_u, Backend::Cpt)?.exact));
                ss.push(frac(&quantitative::fairness_spread_of_table(&t, &dist_u, 1, Backend::Cpt)?.value.exact));
            }
            Ok(format!("V {} and {}, S {} and {}", vs[0], vs[1], ss[0], ss[1]))
        })(),
    );

    let mirror = mirror_space();
    m.check(
        "mirror program: restricted flow, conditional parity",
        "restricted holds; parity violated (A 1, B 0)",
        (|| {
            let p = checked(&corpus::program(MIRROR), &mirror)?;
            let r = checked(&corpus::program(MIRROR_R), &mirror)?;
            let c = checked(&corpus::program(MIRROR_R0), &mirror)?;
            let restricted = qualitative::check_restricted_if(&p, &r, &mirror)?;
            let (t, v) = qualitative::conditional_demographic_parity(&p, &c, &mirror, &rational::zero())?;
            let rate = |g| t.probability(g, 1).map(frac).unwrap_or_default();
            Ok(format!(
                "restricted {}; parity {} (A {}, B {})",
                verdict(restricted.holds),
                verdict(v.holds),
                rate(0),
                rate(1)
            ))
        })(),
    );

    let credit = credit_space();
    m.check(
        "credit: S(T) = min(2T, 20 - 2T)/10 for T in 0..=10",
        "holds",
        (0..=10)
            .try_fold(true, |ok, t| {
                let s = spread_of(&corpus::credit(t), &credit)?;
                Ok(ok && s == ratio(std::cmp::min(2 * t, 20 - 2 * t), 10))
            })
            .map(verdict),
    );

    m.check(
        "noninterference: c1, c2, c3",
        "violated, holds, violated",
        [C1, C2, C3]
            .iter()
            .map(|f| {
                let p = checked(&corpus::program(*f), &scores)?;
                let v = qualitative::check_unconditional_ni(&p, &scores)?;
                let revalidates = v.witness.as_ref().map_or(true, |w| w.revalidate(&p, &scores));
                Ok(if revalidates { verdict(v.holds) } else { "bad witness".into() })
            })
            .collect::<Result<Vec<_>>>()
            .map(|v| v.join(", ")),
    );
    m.check(
        "c3 and its group >= 8 variant: restricted, conditional",
        "c3 holds, holds; variant violated, holds",
        (|| {
            let r = checked(&corpus::program(C3_RESTRICTION), &scores)?;
            let psi = checked(&corpus::program(C3_DECLASS), &scores)?;
            let mut parts = Vec::new();
            for f in [C3, C3_GROUP8] {
                let p = checked(&corpus::program(f), &scores)?;
                parts.push(format!(
                    "{}, {}",
                    verdict(qualitative::check_restricted_if(&p, &r, &scores)?.holds),
                    verdict(qualitative::check_conditional_if(&p, &psi, &scores)?.holds)
                ));
            }
            Ok(format!("c3 {}; variant {}", parts[0], parts[1]))
        })(),
    );
    let pw_space = parity_without_ni_space();
    m.check(
        "parity without noninterference",
        "parity holds, noninterference violated",
        (|| {
            let p = checked(&corpus::program(PARITY_WITHOUT_NI), &pw_space)?;
            let (_, dp) = qualitative::demographic_parity(&p, &pw_space, &rational::zero())?;
            let ni = qualitative::check_unconditional_ni(&p, &pw_space)?;
            Ok(format!("parity {}, noninterference {}", verdict(dp.holds), verdict(ni.holds)))
        })(),
    );

    m.check(
        "SAT count equals enumeration on the corpus",
        "holds",
        corpus::programs_with_spaces()
            .iter()
            .try_fold(true, |ok, (p, space)| {
                let w = quantitative::wrap_nonuniform(p, space, &BTreeMap::new())?;
                let v = checked(&w.program, &w.space)?;
                let x = engine::cross_check(&v, &w.space)?;
                Ok(ok && x.enumeration == x.counting)
            })
            .map(verdict),
    );

    let all = m.0.iter().all(|r| r.pass);
    let mut report = Report::new("reproduce", "both");
    report.matrix = Some(m.0);
    (report, if all { EXIT_HOLDS } else { EXIT_VIOLATED })
}
