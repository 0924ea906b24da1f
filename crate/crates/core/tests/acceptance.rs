//! Acceptance suite. Each criterion prints one PASS or FAIL line; the process
//! exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use fairflow::causal::{self, PathSpec};
use fairflow::corpus::{self, *};
use fairflow::dsl::{typecheck, Assignment, DecisionProgram, ValidatedProgram};
use fairflow::engine;
use fairflow::generate::{self, Case, Options};
use fairflow::qualitative::{self, Counterexample};
use fairflow::quantitative::{self, Backend, ConditionalOutcomeTable};
use fairflow::rational::{self, ratio, Rational};
use fairflow::spaces::{Distribution, InputSpace};

type Check = Result<(), String>;

const RANDOM_PROGRAMS: usize = 200;
const DIFFERENTIAL_SAMPLES: usize = 10_000;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn checked(p: &DecisionProgram, space: &InputSpace) -> Result<ValidatedProgram, String> {
    typecheck(p, space).map_err(|e| format!("{}: {e}", p.name))
}

fn frac(r: &Rational) -> String {
    rational::to_fraction(r)
}

fn err(e: fairflow::Error) -> String {
    e.to_string()
}

fn random_cases() -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_2026);
    (0..RANDOM_PROGRAMS)
        .map(|_| generate::random_case(&mut rng, Options::default()))
        .collect()
}

/// count, V and S by enumeration and by counting on the wrapped program.
fn score_row(p: &DecisionProgram, space: &InputSpace, sizes: &BTreeMap<String, u64>) -> Result<(u64, Rational, Rational), String> {
    let native = checked(p, space)?;
    let v = quantitative::vulnerability(&native, space).map_err(err)?.exact;
    let s = quantitative::fairness_spread(&native, space, 1).map_err(err)?.value.exact;
    let w = quantitative::wrap_nonuniform(p, space, sizes).map_err(err)?;
    let wrapped = checked(&w.program, &w.space)?;
    let x = engine::cross_check(&wrapped, &w.space).map_err(err)?;
    ensure(x.enumeration == x.counting, || {
        format!("{}: enumeration {} vs counting {}", p.name, x.enumeration, x.counting)
    })?;
    let counted = quantitative::vulnerability_from_count(x.counting, &w.space, Backend::Counting).map_err(err)?;
    ensure(counted.value.exact == v, || {
        format!("{}: V {} by enumeration, {} by counting", p.name, frac(&v), frac(&counted.value.exact))
    })?;
    let s_counted = quantitative::spread_from_vulnerability(&counted.value.exact, &w.space);
    ensure(s_counted == s, || {
        format!("{}: S {} by enumeration, {} by counting", p.name, frac(&s), frac(&s_counted))
    })?;
    Ok((x.counting, v, s))
}

fn scores_table() -> Check {
    let scores = scores_space();
    let none = BTreeMap::new();
    let wrap = BTreeMap::from([("score".to_string(), 100)]);
    for (file, space, sizes, expected) in [
        (C1, &scores, &none, (20, ratio(1, 5), ratio(1, 1))),
        (C2, &scores, &none, (10, ratio(1, 10), ratio(0, 1))),
        (C3, &scores, &none, (12, ratio(3, 25), ratio(1, 5))),
        (C3, &scores_nonuniform_space(), &wrap, (130, ratio(13, 100), ratio(3, 10))),
    ] {
        let got = score_row(&corpus::program(file), space, sizes)?;
        ensure(got == expected, || {
            format!(
                "{}: got count {}, V {}, S {}",
                file.0,
                got.0,
                frac(&got.1),
                frac(&got.2)
            )
        })?;
    }
    Ok(())
}

fn spread_identity(p: &ValidatedProgram, space: &InputSpace) -> Check {
    let s = quantitative::fairness_spread(p, space, 1).map_err(err)?.value.exact;
    let t = quantitative::fairness_spread_via_vulnerability(p, space, 1).map_err(err)?.exact;
    ensure(s == t, || format!("{}: S {} but |G|V - 1 = {}", p.name(), frac(&s), frac(&t)))
}

fn spread_from_vulnerability_identity(cases: &[Case]) -> Check {
    for (p, space) in corpus::programs_with_spaces() {
        spread_identity(&checked(&p, &space)?, &space)?;
    }
    cases
        .par_iter()
        .try_for_each(|c| spread_identity(&c.validated, &c.space).map_err(|e| format!("{e}\n{}", c.program)))
}

fn group_distributions(space: &InputSpace) -> Vec<Distribution> {
    let values = space.protected.domain.values();
    let n = values.len() as i64;
    let increasing: i64 = (1..=n).sum();
    let heavy_first = values
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let p = if n == 1 {
                ratio(1, 1)
            } else if i == 0 {
                ratio(1, 2)
            } else {
                ratio(1, 2 * (n - 1))
            };
            (g, p)
        })
        .collect();
    let ramp = values
        .iter()
        .enumerate()
        .map(|(i, &g)| (g, ratio(i as i64 + 1, increasing)))
        .collect();
    vec![Distribution::Uniform, Distribution::Pmf(heavy_first), Distribution::Pmf(ramp)]
}

fn spread_ignores_group_distribution() -> Check {
    for (p, space) in corpus::programs_with_spaces() {
        let v = checked(&p, &space)?;
        let mut spreads = Vec::new();
        for dist in group_distributions(&space) {
            let s = space.with_group_distribution(dist).map_err(err)?;
            spreads.push(quantitative::fairness_spread(&v, &s, 1).map_err(err)?.value.exact);
        }
        ensure(spreads.windows(2).all(|w| w[0] == w[1]), || {
            let all: Vec<String> = spreads.iter().map(frac).collect();
            format!("{}: spreads {}", p.name, all.join(", "))
        })?;
    }
    Ok(())
}

fn golden(label: &str, got: &Rational, exact: Rational, two_dp: &str) -> Check {
    let rendered = rational::to_decimal(got, 2);
    ensure(*got == exact && rendered == two_dp, || {
        format!("{label}: got {} ({rendered}), want {} ({two_dp})", frac(got), frac(&exact))
    })
}

fn regions_goldens() -> Check {
    let regions = corpus::model(REGIONS_MODEL);
    for (file, exact, two_dp) in [(C3, ratio(112, 490), "0.23"), (C2, ratio(131, 490), "0.27")] {
        let s = causal::spread_over_background(&corpus::program(file), &regions, 1).map_err(err)?;
        golden(file.0, &s.value.exact, exact, two_dp)?;
    }
    Ok(())
}

fn path_specific_goldens() -> Check {
    let regions = corpus::model(REGIONS_MODEL);
    let zip = PathSpec::new(["zipCode"]);
    for (file, exact, two_dp) in [(C2, ratio(0, 1), "0.00"), (C3, ratio(67, 350), "0.19")] {
        let s = causal::path_specific_spread(&corpus::program(file), &regions, &zip, 1).map_err(err)?;
        golden(file.0, &s.value.exact, exact, two_dp)?;
    }
    Ok(())
}

fn insurance_goldens() -> Check {
    let insurance = corpus::model(INSURANCE_MODEL);
    let (s, v) = causal::check_counterfactual_fairness(&corpus::program(INSURANCE_FAIR), &insurance, 1).map_err(err)?;
    ensure(v.holds && s.value.exact == rational::zero(), || {
        format!("gender-corrected classifier: spread {}", frac(&s.value.exact))
    })?;
    let s = causal::spread_over_background(&corpus::program(INSURANCE_ENGINE), &insurance, 1).map_err(err)?;
    let x = rational::to_f64(&s.value.exact);
    ensure((x - 0.36).abs() <= 0.02 && s.value.exact == ratio(37, 101), || {
        format!("engine-only classifier: spread {} ({x:.4})", frac(&s.value.exact))
    })
}

fn diff_bounded_by_spread() -> Check {
    let regions = corpus::model(REGIONS_MODEL);
    let insurance = corpus::model(INSURANCE_MODEL);
    let instances = [
        (C1, &regions, false),
        (C2, &regions, false),
        (C3, &regions, false),
        (C3_GROUP8, &regions, false),
        (INSURANCE_ENGINE, &insurance, true),
        (INSURANCE_FAIR, &insurance, true),
    ];
    for (file, model, equal) in instances {
        let p = corpus::program(file);
        let d = causal::prob_deviating_counterfactual(&p, model, 1).map_err(err)?.exact;
        let s = causal::spread_over_background(&p, model, 1).map_err(err)?.value.exact;
        ensure(d <= s && (!equal || d == s), || {
            format!("{}: Pr[Diff = 1] = {}, S = {}", file.0, frac(&d), frac(&s))
        })?;
    }
    Ok(())
}

fn password_vulnerability() -> Check {
    let space = password_space();
    let p = checked(&corpus::program(PASSWORD), &space)?;
    let t = ConditionalOutcomeTable::from_program(&p, &space).map_err(err)?;
    let v = quantitative::conditional_vulnerability(&t, &space.groups(), &space.u_points().map_err(err)?, Backend::Cpt)
        .map_err(err)?;
    ensure(v.exact == ratio(2, 3), || format!("V = {}", frac(&v.exact)))
}

fn cpt(p00: Rational) -> Result<ConditionalOutcomeTable, String> {
    let cell = |p1: Rational| vec![rational::one() - &p1, p1];
    ConditionalOutcomeTable::from_rows(
        vec![0, 1],
        vec!["u".into()],
        vec![vec![0]],
        vec![0, 1],
        vec![vec![cell(p00), cell(ratio(1, 2))]],
    )
    .map_err(err)
}

fn same_vulnerability_different_spread() -> Check {
    let dist_g = vec![(0, ratio(1, 50)), (1, ratio(49, 50))];
    let dist_u = vec![(vec![0], rational::one())];
    let mut vs = Vec::new();
    let mut ss = Vec::new();
    for t in [cpt(rational::zero())?, cpt(ratio(1, 2))?] {
        vs.push(quantitative::conditional_vulnerability(&t, &dist_g, &dist_u, Backend::Cpt).map_err(err)?.exact);
        ss.push(quantitative::fairness_spread_of_table(&t, &dist_u, 1, Backend::Cpt).map_err(err)?.value.exact);
    }
    ensure(
        vs[0] == ratio(49, 50) && vs[1] == ratio(49, 50) && ss[0] != ss[1],
        || format!("V {} and {}, S {} and {}", frac(&vs[0]), frac(&vs[1]), frac(&ss[0]), frac(&ss[1])),
    )
}

fn mirror_restricted_but_not_parity() -> Check {
    let space = mirror_space();
    let p = checked(&corpus::program(MIRROR), &space)?;
    let r = checked(&corpus::program(MIRROR_R), &space)?;
    let c = checked(&corpus::program(MIRROR_R0), &space)?;
    let restricted = qualitative::check_restricted_if(&p, &r, &space).map_err(err)?;
    ensure(restricted.holds, || "restricted flow violated".into())?;
    let (t, v) = qualitative::conditional_demographic_parity(&p, &c, &space, &rational::zero()).map_err(err)?;
    let rate = |g| t.probability(g, 1).cloned().unwrap_or_else(rational::zero);
    ensure(!v.holds && rate(0) == rational::one() && rate(1) == rational::zero(), || {
        format!("parity holds: {}, rates A {} B {}", v.holds, frac(&rate(0)), frac(&rate(1)))
    })
}

fn credit_sweep() -> Check {
    let space = credit_space();
    for t in 0..=10 {
        let p = checked(&corpus::credit(t), &space)?;
        let s = quantitative::fairness_spread(&p, &space, 1).map_err(err)?.value.exact;
        let want = ratio(std::cmp::min(2 * t, 20 - 2 * t), 10);
        ensure(s == want, || format!("T = {t}: S = {}, want {}", frac(&s), frac(&want)))?;
    }
    Ok(())
}

fn restricted_witness_valid(w: &Counterexample, p: &ValidatedProgram, r: &ValidatedProgram, space: &InputSpace) -> bool {
    let class = |g: i64| {
        let mut a: Assignment = w.u.clone();
        a.set(&space.protected.name, g);
        r.evaluate(&a).ok()
    };
    w.revalidate(p, space) && class(w.g1).is_some() && class(w.g1) == class(w.g2)
}

fn qualitative_suite() -> Check {
    let space = scores_space();
    for (file, holds) in [(C1, false), (C2, true), (C3, false)] {
        let p = checked(&corpus::program(file), &space)?;
        let v = qualitative::check_unconditional_ni(&p, &space).map_err(err)?;
        ensure(v.holds == holds, || format!("{}: noninterference holds = {}", file.0, v.holds))?;
        if let Some(w) = &v.witness {
            ensure(w.revalidate(&p, &space), || format!("{}: witness does not revalidate: {w:?}", file.0))?;
        }
    }
    let r = checked(&corpus::program(C3_RESTRICTION), &space)?;
    let psi = checked(&corpus::program(C3_DECLASS), &space)?;
    for (file, restricted, conditional) in [(C3, true, true), (C3_GROUP8, false, true)] {
        let p = checked(&corpus::program(file), &space)?;
        let rv = qualitative::check_restricted_if(&p, &r, &space).map_err(err)?;
        let cv = qualitative::check_conditional_if(&p, &psi, &space).map_err(err)?;
        ensure(rv.holds == restricted && cv.holds == conditional, || {
            format!("{}: restricted {}, conditional {}", file.0, rv.holds, cv.holds)
        })?;
        if let Some(w) = &rv.witness {
            ensure(restricted_witness_valid(w, &p, &r, &space), || {
                format!("{}: restricted witness does not revalidate: {w:?}", file.0)
            })?;
        }
    }
    let pw = parity_without_ni_space();
    let p = checked(&corpus::program(PARITY_WITHOUT_NI), &pw)?;
    let (_, dp) = qualitative::demographic_parity(&p, &pw, &rational::zero()).map_err(err)?;
    let ni = qualitative::check_unconditional_ni(&p, &pw).map_err(err)?;
    ensure(dp.holds && !ni.holds, || {
        format!("parity without noninterference: parity {}, noninterference {}", dp.holds, ni.holds)
    })
}

fn backends_agree(p: &ValidatedProgram, space: &InputSpace, seed: u64) -> Check {
    let circuit = engine::bitblast(p, space).map_err(err)?;
    engine::cross_check_circuit(p, space, &circuit, Some(engine::DEFAULT_BUDGET)).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match engine::differential_test(p, &circuit, DIFFERENTIAL_SAMPLES, &mut rng) {
        None => Ok(()),
        Some(m) => Err(format!(
            "{}: circuit {} vs evaluator {} at {}",
            p.name(),
            m.circuit,
            m.evaluator,
            m.input
        )),
    }
}

fn backend_equivalence(cases: &[Case]) -> Check {
    for (i, (p, space)) in corpus::programs_with_spaces().into_iter().enumerate() {
        let w = quantitative::wrap_nonuniform(&p, &space, &BTreeMap::new()).map_err(err)?;
        backends_agree(&checked(&p, &space)?, &space, i as u64)?;
        backends_agree(&checked(&w.program, &w.space)?, &w.space, i as u64)?;
    }
    cases
        .par_iter()
        .enumerate()
        .try_for_each(|(i, c)| backends_agree(&c.validated, &c.space, 1000 + i as u64).map_err(|e| format!("{e}\n{}", c.program)))
}

fn main() -> ExitCode {
    let cases = random_cases();
    let criteria: Vec<(&str, Box<dyn Fn() -> Check + '_>)> = vec![
        ("scores table: counts, V and S on both backends", Box::new(scores_table)),
        (
            "S = |G|V - 1 on the corpus and 200 random programs",
            Box::new(|| spread_from_vulnerability_identity(&cases)),
        ),
        ("S unchanged under three group distributions", Box::new(spread_ignores_group_distribution)),
        ("regions model spreads: c3 0.23, c2 0.27", Box::new(regions_goldens)),
        ("zipCode path-specific spreads: c2 0, c3 0.19", Box::new(path_specific_goldens)),
        ("insurance classifiers: fair 0, engine-only 0.36", Box::new(insurance_goldens)),
        ("Pr[Diff = 1] <= S, equal on insurance", Box::new(diff_bounded_by_spread)),
        ("password checker V = 2/3", Box::new(password_vulnerability)),
        ("two tables with equal V and different S", Box::new(same_vulnerability_different_spread)),
        ("mirror program: restricted holds, parity fails", Box::new(mirror_restricted_but_not_parity)),
        ("credit threshold sweep", Box::new(credit_sweep)),
        ("qualitative verdicts and witnesses", Box::new(qualitative_suite)),
        (
            "SAT counting matches enumeration and the evaluator",
            Box::new(|| backend_equivalence(&cases)),
        ),
    ];

    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = check();
        let ms = t.elapsed().as_millis();
        match result {
            Ok(()) => println!("criterion {:2}: PASS  {name} ({ms} ms)", i + 1),
            Err(e) => {
                failed += 1;
                println!("criterion {:2}: FAIL  {name} ({ms} ms)\n    {}", i + 1, e.replace('\n', "\n    "));
            }
        }
    }
    println!(
        "acceptance: {}/{} criteria pass in {:.1} s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
