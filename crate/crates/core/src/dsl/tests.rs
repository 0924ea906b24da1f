use proptest::prelude::*;
use rand::SeedableRng;

use super::*;
use crate::corpus::{self, *};
use crate::error::Error;
use crate::generate::{random_case, Options};
use crate::spaces::{Domain, InputSpace, Variable};

fn parse(src: &str) -> Result<DecisionProgram> {
    parse_program(&SourceProgram::inline(src))
}

#[test]
fn parses_c1() {
    let p = corpus::program(C1);
    assert_eq!(p.name, "c1");
    assert_eq!(p.param_names(), vec!["group", "score"]);
    assert_eq!(
        p.body,
        vec![Stmt::Return(Expr::bin(BinaryOp::Ne, Expr::var("group"), Expr::Int(0)))]
    );
}

#[test]
fn empty_source_is_a_syntax_error() {
    match parse("") {
        Err(Error::Syntax { line, expected, .. }) => {
            assert_eq!(line, 1);
            assert!(expected.iter().any(|e| e.contains("program")), "{expected:?}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn syntax_errors_carry_positions() {
    match parse("program p(a) {\n  return a +;\n}") {
        Err(Error::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 13)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn parses_credit() {
    let p = corpus::program(CREDIT);
    assert_eq!(p.consts, vec![("T".to_string(), 5)]);
    assert_eq!(p.param_names(), vec!["gender", "amount"]);
    match &p.body[..] {
        [Stmt::If { cond, then_branch, else_branch }] => {
            assert_eq!(*cond, Expr::bin(BinaryOp::Eq, Expr::var("gender"), Expr::Int(0)));
            assert_eq!(then_branch.len(), 1);
            assert_eq!(else_branch.len(), 1);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn typecheck_examples() {
    let space = scores_space();
    let c2 = typecheck(&corpus::program(C2), &space).unwrap();
    assert_eq!(c2.output_domain().iter().copied().collect::<Vec<_>>(), vec![0, 1]);
    let c3 = typecheck(&corpus::program(C3), &space).unwrap();
    assert_eq!(c3.output_domain().len(), 2);
    let unbound = parse("program p(group, score) { return x; }").unwrap();
    assert_eq!(
        typecheck(&unbound, &space).unwrap_err(),
        Error::UnboundVariable { name: "x".into() }
    );
}

#[test]
fn branch_local_assignment_is_not_definitely_assigned() {
    let space = scores_space();
    let p = parse("program p(group, score) { if (group > 1) { let t = 1; } return t; }").unwrap();
    assert!(matches!(typecheck(&p, &space), Err(Error::UnboundVariable { .. })));
    let ok = parse("program p(group, score) { if (group > 1) { let t = 1; } else { t = 2; } return t; }").unwrap();
    assert_eq!(typecheck(&ok, &space).unwrap().output_domain().len(), 2);
}

#[test]
fn missing_return_is_reported() {
    let space = scores_space();
    let p = parse("program p(group, score) { if (group > 1) { return 1; } }").unwrap();
    assert_eq!(
        typecheck(&p, &space).unwrap_err(),
        Error::MissingReturn { program: "p".into() }
    );
}

#[test]
fn overflow_risk_is_rejected() {
    let space = scores_space();
    let p = parse("program p(group, score) { let x = score * 100000; return x * 100000 > 0; }").unwrap();
    assert!(matches!(typecheck(&p, &space), Err(Error::WidthOverflowRisk { .. })));
    let fine = parse("program p(group, score) { return score * 100000 > 0; }").unwrap();
    assert!(typecheck(&fine, &space).is_ok());
}

#[test]
fn signature_and_declared_domains_are_checked() {
    let space = scores_space();
    let wrong = parse("program p(group, amount) { return 1; }").unwrap();
    assert!(matches!(typecheck(&wrong, &space), Err(Error::DomainMismatch(_))));
    let narrow = parse("program p(group: [0, 5], score) { return 1; }").unwrap();
    assert!(matches!(typecheck(&narrow, &space), Err(Error::DomainMismatch(_))));
    let wide = parse("program p(group: [0, 20], score: {1,2,3,4,5,6,7,8,9,10}) { return 1; }").unwrap();
    assert!(typecheck(&wide, &space).is_ok());
    assert_eq!(typecheck_declared(&wide).unwrap().inputs()[0].1, Domain::range(0, 20).unwrap());
}

#[test]
fn evaluation_examples() {
    let space = scores_space();
    let run = |file, g: i64, s: i64| {
        let p = typecheck(&corpus::program(file), &space).unwrap();
        p.evaluate(&Assignment::new().with("group", g).with("score", s)).unwrap()
    };
    assert_eq!(run(C1, 0, 5), 0);
    assert_eq!(run(C3, 6, 7), 0);
    assert_eq!(run(C3, 5, 7), 1);
    for g in 0..10 {
        assert_eq!(run(C2, g, 8), 1);
    }
}

#[test]
fn evaluate_checks_the_assignment() {
    let space = scores_space();
    let p = typecheck(&corpus::program(C2), &space).unwrap();
    assert!(p.evaluate(&Assignment::new().with("group", 0)).is_err());
    assert!(p.evaluate(&Assignment::new().with("group", 0).with("score", 11)).is_err());
    assert!(p
        .evaluate(&Assignment::new().with("group", 0).with("score", 1).with("x", 1))
        .is_err());
}

#[test]
fn constants_can_be_overridden() {
    let space = credit_space();
    let p = typecheck(&corpus::credit(3), &space).unwrap();
    assert_eq!(p.eval_point(0, &[3]), 1);
    assert_eq!(p.eval_point(0, &[4]), 0);
    assert_eq!(p.eval_point(1, &[8]), 1);
    assert!(corpus::program(C1).with_constants([("T", 1)]).is_err());
    let assign = parse("const T = 1; program p(group, score) { T = 2; return 1; }").unwrap();
    assert!(typecheck(&assign, &scores_space()).is_err());
}

#[test]
fn corpus_outputs_stay_in_the_output_domain() {
    for (program, space) in corpus::programs_with_spaces() {
        let p = typecheck(&program, &space).unwrap();
        for (point, _) in space.enumerate().unwrap() {
            let d = p.eval_point(point.group, &point.u);
            assert!(p.output_domain().contains(&d), "{}: {d}", p.name());
        }
    }
}

#[test]
fn evaluation_is_pure_across_threads() {
    let space = scores_space();
    let p = std::sync::Arc::new(typecheck(&corpus::program(C3), &space).unwrap());
    let reference: Vec<i64> = (0..100).map(|i| p.eval_point(i / 10, &[i % 10 + 1])).collect();
    let handles: Vec<_> = (0..4)
        .map(|_| {
            let p = p.clone();
            std::thread::spawn(move || (0..100).map(|i| p.eval_point(i / 10, &[i % 10 + 1])).collect::<Vec<_>>())
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap(), reference);
    }
}

#[test]
fn wrapping_preserves_the_decision() {
    let space = scores_nonuniform_space();
    let w = space.unprotected[0].uniformize(None).unwrap();
    assert_eq!(w.size(), 100);
    let wrapped = wrap_program(&corpus::program(C3), &w).unwrap();
    assert_eq!(wrapped.param_names(), vec!["group", "score_raw"]);
    let raw_space = InputSpace::new(space.protected.clone(), vec![w.raw_variable()]).unwrap();
    let p = typecheck(&wrapped, &raw_space).unwrap();
    let c3 = typecheck(&corpus::program(C3), &space).unwrap();
    for g in 0..10 {
        for k in 0..100 {
            assert_eq!(p.eval_point(g, &[k]), c3.eval_point(g, &[w.table[k as usize]]));
        }
    }
}

#[test]
fn printed_corpus_reparses() {
    for (program, _) in corpus::programs_with_spaces() {
        let text = program.to_string();
        assert_eq!(parse(&text).unwrap(), program, "{text}");
    }
}

#[test]
fn chained_comparisons_are_rejected() {
    assert!(matches!(parse("program p(a) { return 1 < a < 3; }"), Err(Error::Syntax { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn print_parse_round_trip(seed in any::<u64>(), binary in any::<bool>()) {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let case = random_case(&mut rng, Options { binary, ..Options::default() });
        let text = case.program.to_string();
        prop_assert_eq!(parse(&text).unwrap(), case.program, "{}", text);
    }

    #[test]
    fn generated_outputs_stay_in_domain(seed in any::<u64>()) {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let case = random_case(&mut rng, Options { binary: false, ..Options::default() });
        for (point, _) in case.space.enumerate().unwrap() {
            let d = case.validated.eval_point(point.group, &point.u);
            prop_assert!(case.validated.output_domain().contains(&d));
        }
    }

    #[test]
    fn expressions_round_trip(a in -50i64..50, b in -50i64..50, c in 0i64..2) {
        let e = Expr::ite(
            Expr::bin(BinaryOp::Lt, Expr::Int(a), Expr::Unary(UnaryOp::Neg, Box::new(Expr::var("x")))),
            Expr::bin(BinaryOp::Sub, Expr::Int(b), Expr::bin(BinaryOp::Sub, Expr::var("x"), Expr::Int(c))),
            Expr::Unary(UnaryOp::Not, Box::new(Expr::Int(a))),
        );
        prop_assert_eq!(parse_expr(&e.to_string()).unwrap(), e);
    }
}

#[test]
fn singleton_domains_evaluate() {
    let space = InputSpace::new(
        Variable::uniform("g", Domain::range(3, 3).unwrap()),
        vec![Variable::uniform("u", Domain::set([7]).unwrap())],
    )
    .unwrap();
    let p = typecheck(&parse("program p(g, u) { return g + u; }").unwrap(), &space).unwrap();
    assert_eq!(p.output_domain().iter().copied().collect::<Vec<_>>(), vec![10]);
}
