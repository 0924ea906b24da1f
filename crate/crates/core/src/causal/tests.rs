use super::*;
use crate::corpus::{self, *};
use crate::dsl::{parse_program, SourceProgram};
use crate::rational::ratio;

fn regions() -> CausalModel {
    corpus::model(REGIONS_MODEL)
}

fn insurance() -> CausalModel {
    corpus::model(INSURANCE_MODEL)
}

fn b(pairs: &[(&str, i64)]) -> Assignment {
    pairs.iter().copied().collect()
}

fn inline(src: &str) -> DecisionProgram {
    parse_program(&SourceProgram::inline(src)).unwrap()
}

#[test]
fn parses_the_shipped_models() {
    let m = regions();
    assert_eq!(m.background_names(), vec!["B1", "B2", "B3", "B4"]);
    assert_eq!(m.background_size(), 4900);
    assert_eq!(m.protected, "group");
    assert_eq!(m.groups().unwrap(), Domain::set(0..=9).unwrap());
    assert_eq!(insurance().groups().unwrap(), Domain::set([0, 1]).unwrap());
}

#[test]
fn parses_pmf_backgrounds_and_semicolons() {
    let m = parse_model(
        "bg A : {0, 1, 2} ~ pmf {0: 1/2, 1: 0.25, 2: 1/4};\nlet x = A * 2;\nlet y = x + 1\nprotected x;",
        "<inline>",
    )
    .unwrap();
    assert_eq!(m.background[0].probability(1), ratio(1, 4));
    assert_eq!(m.reachable_values("y").unwrap(), Domain::set([1, 3, 5]).unwrap());
}

#[test]
fn rejects_malformed_models() {
    let cases = [
        ("bg A : [0, 1] ~ uniform\nlet x = y\nlet y = A\nprotected x", "before"),
        ("bg A : [0, 1] ~ uniform\nlet A = 1\nprotected A", "twice"),
        ("bg A : [0, 1] ~ uniform\nprotected z", "not defined"),
    ];
    for (src, needle) in cases {
        match parse_model(src, "<inline>") {
            Err(Error::Model(m)) => assert!(m.contains(needle), "{m}"),
            other => panic!("{src}: {other:?}"),
        }
    }
    assert!(matches!(
        parse_model("bg A : [0, 1] ~ normal\nprotected A", "<inline>"),
        Err(Error::Syntax { .. })
    ));
    assert!(matches!(
        parse_model("bg A : [0, 1] ~ pmf {0: 1/2}\nprotected A", "<inline>"),
        Err(Error::InvalidDistribution { .. })
    ));
    assert!(matches!(parse_model("", "<inline>"), Err(Error::Syntax { .. })));
}

#[test]
fn composed_c2_at_a_background_point() {
    let m = regions();
    let point = b(&[("B1", 7), ("B2", 5), ("B3", 3), ("B4", 0)]);
    let values = m.evaluate(&point).unwrap();
    assert_eq!(values.get("group"), Some(7));
    assert_eq!(values.get("zipCode"), Some(3));
    assert_eq!(values.get("score"), Some(8));
    let composed = compose(&corpus::program(C2), &m).unwrap();
    assert_eq!(composed.evaluate(&point).unwrap(), 1);
}

#[test]
fn identity_model_leaves_the_program_unchanged() {
    let m = parse_model(
        "bg group : [0, 9] ~ uniform\nbg score : [1, 10] ~ uniform\nprotected group",
        "<inline>",
    )
    .unwrap();
    let space = scores_space();
    for file in [C1, C2, C3] {
        let p = corpus::program(file);
        let direct = crate::dsl::typecheck(&p, &space).unwrap();
        let composed = compose(&p, &m).unwrap();
        for g in 0..10 {
            for s in 1..=10 {
                assert_eq!(composed.eval_background(&[g, s]), direct.eval_point(g, &[s]));
            }
        }
        // with no equations, S over B is the ordinary spread
        let s = spread_over_background(&p, &m, 1).unwrap();
        let plain = crate::quantitative::fairness_spread(&direct, &space, 1).unwrap();
        assert_eq!(s.value.exact, plain.value.exact);
        for g in [0, 6] {
            let at = compose_intervened(&p, &m, g).unwrap();
            for s in 1..=10 {
                assert_eq!(at.eval_background(&[3, s]), direct.eval_point(g, &[s]));
            }
        }
    }
}

#[test]
fn insurance_equations_in_fixed_point() {
    let m = insurance();
    let values = m.evaluate(&b(&[("B1", 1), ("B2", 70)])).unwrap();
    assert_eq!(values.get("engine"), Some(860));
    assert_eq!(values.get("accident"), Some(1400));
    assert!(values.get("accident").unwrap() > 1200);
    let i0 = m.intervene(&Intervention { target: "gender".into(), value: 0 }).unwrap();
    let i1 = m.intervene(&Intervention { target: "gender".into(), value: 1 }).unwrap();
    let mid = b(&[("B1", 0), ("B2", 50)]);
    let e0 = i0.evaluate(&mid).unwrap().get("engine").unwrap();
    let e1 = i1.evaluate(&mid).unwrap().get("engine").unwrap();
    assert_eq!(e1 - e0, 300);
}

#[test]
fn intervention_recomputes_downstream_equations() {
    let m = regions();
    let i = m.intervene(&Intervention { target: "group".into(), value: 6 }).unwrap();
    let point = b(&[("B1", 3), ("B2", 0), ("B3", 5), ("B4", -3)]);
    assert_eq!(m.evaluate(&point).unwrap().get("zipCode"), Some(-3));
    assert_eq!(i.evaluate(&point).unwrap().get("zipCode"), Some(5));
    assert!(matches!(
        m.intervene(&Intervention { target: "B1".into(), value: 0 }),
        Err(Error::Model(_))
    ));
    assert!(matches!(
        m.intervene(&Intervention { target: "nope".into(), value: 0 }),
        Err(Error::UnknownVariable(_))
    ));
}

#[test]
fn null_intervention_matches_the_factual_composition() {
    let m = regions();
    let p = corpus::program(C3);
    let factual = compose(&p, &m).unwrap();
    let per_group: Vec<ComposedProgram> = (0..10).map(|g| compose_intervened(&p, &m, g).unwrap()).collect();
    for (point, _) in m.background_points().unwrap() {
        let g = point[0];
        assert_eq!(per_group[g as usize].eval_background(&point), factual.eval_background(&point));
    }
    assert!(matches!(compose_intervened(&p, &m, 10), Err(Error::DomainMismatch(_))));
}

#[test]
fn regions_spreads() {
    let m = regions();
    let c3 = spread_over_background(&corpus::program(C3), &m, 1).unwrap();
    assert_eq!(c3.value.exact, ratio(112, 490));
    assert_eq!(c3.value.render(2), "0.23");
    let c2 = spread_over_background(&corpus::program(C2), &m, 1).unwrap();
    assert_eq!(c2.value.exact, ratio(131, 490));
    assert_eq!(c2.value.render(2), "0.27");
}

#[test]
fn regions_path_specific_spreads() {
    let m = regions();
    let zip = PathSpec::new(["zipCode"]);
    let c2 = path_specific_spread(&corpus::program(C2), &m, &zip, 1).unwrap();
    assert_eq!(c2.value.exact, rational::zero());
    let c3 = path_specific_spread(&corpus::program(C3), &m, &zip, 1).unwrap();
    assert_eq!(c3.value.exact, ratio(67, 350));
    assert_eq!(c3.value.render(2), "0.19");
    let full = spread_over_background(&corpus::program(C3), &m, 1).unwrap();
    assert!(c3.value.exact <= full.value.exact);
    let none = path_specific_spread(&corpus::program(C3), &m, &PathSpec::default(), 1).unwrap();
    assert_eq!(none, full);
}

#[test]
fn path_spec_validation() {
    let m = regions();
    let p = corpus::program(C3);
    assert_eq!(
        path_specific_spread(&p, &m, &PathSpec::new(["group"]), 1).unwrap_err(),
        Error::ProtectedVariableClamped("group".into())
    );
    assert_eq!(
        path_specific_spread(&p, &m, &PathSpec::new(["zip"]), 1).unwrap_err(),
        Error::UnknownVariable("zip".into())
    );
}

#[test]
fn insurance_classifiers() {
    let m = insurance();
    let engine_only = corpus::program(INSURANCE_ENGINE);
    let (s, v) = check_counterfactual_fairness(&engine_only, &m, 1).unwrap();
    assert_eq!(s.value.exact, ratio(37, 101));
    assert!((rational::to_f64(&s.value.exact) - 0.36).abs() <= 0.02);
    assert!(!v.holds);
    let w = v.witness.unwrap();
    assert_ne!(w.d1, w.d2);
    let fair = corpus::program(INSURANCE_FAIR);
    let (s, v) = check_counterfactual_fairness(&fair, &m, 1).unwrap();
    assert_eq!(s.value.exact, rational::zero());
    assert!(v.holds);
    for p in [&engine_only, &fair] {
        let diff = prob_deviating_counterfactual(p, &m, 1).unwrap();
        let spread = spread_over_background(p, &m, 1).unwrap();
        assert_eq!(diff.exact, spread.value.exact);
    }
}

#[test]
fn diff_probability_equals_spread_on_regions() {
    let m = regions();
    for file in [C1, C2, C3] {
        let p = corpus::program(file);
        let diff = prob_deviating_counterfactual(&p, &m, 1).unwrap();
        let spread = spread_over_background(&p, &m, 1).unwrap();
        assert!(diff.exact <= spread.value.exact, "{}", file.0);
    }
    let c3 = prob_deviating_counterfactual(&corpus::program(C3), &m, 1).unwrap();
    assert!(c3.exact > rational::zero() && c3.exact <= ratio(112, 490));
}

#[test]
fn counterfactual_fairness_agrees_with_zero_spread() {
    let m = regions();
    for file in [C1, C2, C3] {
        let (s, v) = check_counterfactual_fairness(&corpus::program(file), &m, 1).unwrap();
        assert_eq!(v.holds, s.value.exact.is_zero(), "{}", file.0);
    }
    let k = inline("program k(group, score) { return 1; }");
    let (s, v) = check_counterfactual_fairness(&k, &m, 1).unwrap();
    assert!(v.holds && s.value.exact.is_zero());
    assert_eq!(prob_deviating_counterfactual(&k, &m, 1).unwrap().exact, rational::zero());
    let (_, v) = check_counterfactual_fairness(&corpus::program(C2), &m, 1).unwrap();
    assert!(!v.holds);
}

#[test]
fn diff_per_background_ignores_the_protected_marginal() {
    let m = regions();
    let p = corpus::program(C3);
    let skew: std::collections::BTreeMap<i64, Rational> =
        (0..10).map(|v| (v, if v == 0 { ratio(28, 100) } else { ratio(8, 100) })).collect();
    let reweighted = m.with_background_distribution("B1", Distribution::Pmf(skew)).unwrap();
    assert_eq!(diff_per_background(&p, &m).unwrap(), diff_per_background(&p, &reweighted).unwrap());
}

#[test]
fn exposure_is_checked() {
    let m = regions();
    let p = inline("program q(group, salary) { return salary > 3; }");
    assert!(matches!(compose(&p, &m), Err(Error::ExposureMismatch(_))));
    let narrow = inline("program q(group: [0, 5], score) { return score > 3; }");
    assert!(matches!(compose(&narrow, &m), Err(Error::DomainMismatch(_))));
}

#[test]
fn generated_names_avoid_collisions() {
    let m = parse_model(
        "bg f__x : [0, 1] ~ uniform\nlet p__y = 1 - f__x\nprotected p__y",
        "<inline>",
    )
    .unwrap();
    let p = inline("program q(p__y) { let c__t = p__y; return c__t; }");
    let s = spread_over_background(&p, &m, 1).unwrap();
    assert_eq!(s.value.exact, rational::one());
}
