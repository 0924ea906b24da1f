use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};

use fairflow::dsl::{typecheck, ValidatedProgram};
use fairflow::engine::{self, bitblast, projected_count, to_cnf, Circuit, DEFAULT_BUDGET};
use fairflow::qualitative::{self, Counterexample};
use fairflow::quantitative::{self, Backend, Spread};
use fairflow::rational::{self, Rational};
use fairflow::spaces::InputSpace;
use fairflow::{causal, Error, OutcomeGrid, FLOW_PARITY_CAVEAT};

use crate::config::{Accepts, Analysis, Overrides};
use crate::report::{CnfReport, CrossCheckReport, Metric, PerURow, Report, VerdictReport};
use crate::{reproduce, BackendChoice, Cli, Command, Format, Target};
use crate::{EXIT_HOLDS, EXIT_MISMATCH, EXIT_USAGE, EXIT_VIOLATED};

/// What the process prints and the code it exits with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    pub(crate) fn error(code: i32, message: String) -> Self {
        Outcome {
            code,
            stdout: String::new(),
            stderr: message,
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<Error>() {
        Some(Error::BackendMismatch { .. }) => EXIT_MISMATCH,
        _ => EXIT_USAGE,
    }
}

pub(crate) fn execute(cli: Cli) -> Outcome {
    let mut pool = rayon::ThreadPoolBuilder::new();
    match cli.jobs {
        Some(0) => return Outcome::error(EXIT_USAGE, "error: --jobs must be at least 1\n".into()),
        Some(n) => pool = pool.num_threads(n),
        None => {}
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => return Outcome::error(EXIT_USAGE, format!("error: cannot start worker pool: {e}\n")),
    };
    let start = Instant::now();
    let result = pool.install(|| dispatch(&cli));
    match result {
        Ok((mut report, code)) => {
            if cli.no_timings {
                report.timings = None;
            } else {
                report
                    .timings
                    .get_or_insert_with(BTreeMap::new)
                    .insert("totalMs".into(), start.elapsed().as_secs_f64() * 1e3);
            }
            let stdout = match cli.format {
                Format::Json => report.to_json(),
                Format::Text => report.to_text(),
            };
            Outcome {
                code,
                stdout,
                stderr: String::new(),
            }
        }
        Err(e) => {
            let code = exit_code_for(&e);
            let message = format!("{e:#}");
            let stdout = match cli.format {
                Format::Json => {
                    let v = serde_json::json!({ "error": message, "exitCode": code });
                    format!("{}\n", serde_json::to_string_pretty(&v).expect("json"))
                }
                Format::Text => String::new(),
            };
            Outcome {
                code,
                stdout,
                stderr: format!("error: {message}\n"),
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(Report, i32)> {
    let backend = cli.backend;
    match &cli.command {
        Command::CheckNi(t) => check_ni(t, backend),
        Command::CheckRestricted(t) => check_restricted(t, backend),
        Command::CheckConditional(t) => check_conditional(t, backend),
        Command::Parity(t) => parity(t, backend),
        Command::Vulnerability(t) => vulnerability(t, backend),
        Command::Spread(t) => spread(t, backend),
        Command::Counterfactual(t) => counterfactual(t, backend),
        Command::PathSpecific(t) => path_specific(t, backend),
        Command::Crosscheck(t) => crosscheck(t, backend),
        Command::Reproduce => {
            if backend.is_some() {
                bail!("reproduce runs every backend and takes no --backend");
            }
            Ok(reproduce::run())
        }
    }
}

fn resolve(t: &Target, accepts: Accepts, command: &str) -> Result<Analysis> {
    let o = Overrides {
        program: t.program.clone(),
        model: t.model.clone(),
        restriction: t.restriction.clone(),
        condition: t.condition.clone(),
        paths: t.paths.clone(),
        favorable: t.favorable,
        tolerance: t.tolerance.clone(),
        constants: t.constants.clone(),
        wrap: t.wrap.clone(),
    };
    Analysis::resolve(t.space.as_deref(), o, accepts, command)
}

fn enumeration_only(command: &str, backend: Option<BackendChoice>, t: &Target) -> Result<()> {
    if matches!(backend, Some(BackendChoice::Count | BackendChoice::Both)) {
        bail!("{command} runs on the enumeration backend only");
    }
    if t.emit_cnf.is_some() {
        bail!("{command} does not build a counting formula; --emit-cnf is not available");
    }
    Ok(())
}

fn backend_label(b: BackendChoice) -> &'static str {
    match b {
        BackendChoice::Enum => "enumeration",
        BackendChoice::Count => "counting",
        BackendChoice::Both => "both",
    }
}

fn new_report(command: &str, backend: BackendChoice, a: &Analysis) -> Report {
    let mut r = Report::new(command, backend_label(backend));
    r.config = Some(a.echo.clone());
    r
}

fn checked(a: &Analysis) -> Result<ValidatedProgram> {
    Ok(typecheck(&a.program, a.space())?)
}

fn verdict_code(holds: bool) -> i32 {
    if holds {
        EXIT_HOLDS
    } else {
        EXIT_VIOLATED
    }
}

fn verdict<W: serde::Serialize>(property: &str, holds: bool, witness: Option<&W>) -> VerdictReport {
    VerdictReport {
        property: property.into(),
        holds,
        witness: witness.map(|w| serde_json::to_value(w).expect("witnesses serialize")),
    }
}

fn per_u_rows(s: &Spread) -> Vec<PerURow> {
    s.per_u
        .iter()
        .map(|p| PerURow {
            u: p.u.clone(),
            spread: Metric::new(&p.spread),
        })
        .collect()
}

fn mismatch(what: &str, enumeration: &Rational, counting: &Rational, counts: (u64, u64)) -> anyhow::Error {
    Error::BackendMismatch {
        enumeration: counts.0,
        counting: counts.1,
        witness: format!(
            "{what} is {} by enumeration but {} by counting",
            rational::to_fraction(enumeration),
            rational::to_fraction(counting)
        ),
    }
    .into()
}

/// The program and space handed to the counting backend: every non-uniform
/// unprotected input is wrapped into equiprobable raw levels.
struct CountingTarget {
    program: ValidatedProgram,
    space: InputSpace,
    wrapped: bool,
    circuit: Circuit,
}

impl CountingTarget {
    fn build(a: &Analysis) -> Result<Self> {
        let w = quantitative::wrap_nonuniform(&a.program, a.space(), &a.wrap)?;
        let program = typecheck(&w.program, &w.space)?;
        let circuit = bitblast(&program, &w.space)?;
        Ok(CountingTarget {
            program,
            space: w.space,
            wrapped: !w.wrappings.is_empty(),
            circuit,
        })
    }

    /// The `(u, d)` pairs found by the SAT backend.
    fn sat_pairs(&self) -> Result<BTreeSet<(Vec<i64>, i64)>> {
        Ok(projected_count(&to_cnf(&self.circuit), Some(DEFAULT_BUDGET))?.pairs)
    }

    fn enumerated_count(&self) -> Result<u64> {
        Ok(OutcomeGrid::build(&self.program, &self.space)?.projected_count())
    }

    fn emit(&self, path: Option<&Path>, report: &mut Report) -> Result<()> {
        if let Some(path) = path {
            let f = to_cnf(&self.circuit);
            std::fs::write(path, f.to_dimacs()).with_context(|| format!("cannot write {}", path.display()))?;
            report.cnf = Some(CnfReport {
                path: path.display().to_string(),
                variables: f.num_vars,
                clauses: f.clauses.len(),
            });
        }
        Ok(())
    }

    /// Both backends must find the same pairs.
    fn cross_check(&self) -> Result<engine::CrossCheck> {
        Ok(engine::cross_check_circuit(
            &self.program,
            &self.space,
            &self.circuit,
            Some(DEFAULT_BUDGET),
        )?)
    }

    /// The lexicographically first u reaching two outcomes, with the first
    /// pair of groups that separates them.
    fn witness(&self, pairs: &BTreeSet<(Vec<i64>, i64)>) -> Option<Counterexample> {
        let mut prev: Option<&Vec<i64>> = None;
        let u = pairs.iter().find_map(|(u, _)| {
            let hit = prev == Some(u);
            prev = Some(u);
            hit.then_some(u)
        })?;
        let groups = self.space.protected.domain.values();
        let g1 = groups[0];
        let d1 = self.program.eval_point(g1, u);
        let (g2, d2) = groups
            .iter()
            .map(|g| (*g, self.program.eval_point(*g, u)))
            .find(|(_, d)| *d != d1)?;
        Some(Counterexample {
            g1,
            g2,
            u: self.space.u_assignment(u),
            d1,
            d2,
        })
    }
}

const COUNTING_ACCEPTS: Accepts = Accepts {
    model: false,
    restriction: false,
    condition: false,
    paths: false,
    favorable: false,
    tolerance: false,
    wrap: true,
    needs_restriction: false,
    needs_condition: false,
};

fn check_ni(t: &Target, backend: Option<BackendChoice>) -> Result<(Report, i32)> {
    let a = resolve(t, COUNTING_ACCEPTS, "check-ni")?;
    let backend = backend.unwrap_or(BackendChoice::Enum);
    let mut report = new_report("check-ni", backend, &a);
    let p = checked(&a)?;
    let counting = CountingTarget::build(&a)?;
    counting.emit(t.emit_cnf.as_deref(), &mut report)?;

    let by_enum = match backend {
        BackendChoice::Count => None,
        _ => Some(qualitative::check_unconditional_ni(&p, a.space())?),
    };
    let by_count = match backend {
        BackendChoice::Enum => None,
        _ => {
            let pairs = counting.sat_pairs()?;
            let holds = pairs.len() as u128 == counting.space.u_size();
            let witness = counting.witness(&pairs);
            debug_assert_eq!(holds, witness.is_none());
            Some((holds, witness, pairs.len() as u64))
        }
    };
    if let (Some(e), Some((holds, witness, count))) = (&by_enum, &by_count) {
        let enum_count = counting.enumerated_count()?;
        let same_witness = counting.wrapped || e.witness == *witness;
        if e.holds != *holds || !same_witness {
            return Err(Error::BackendMismatch {
                enumeration: enum_count,
                counting: *count,
                witness: format!(
                    "noninterference {} by enumeration, {} by counting",
                    if e.holds { "holds" } else { "fails" },
                    if *holds { "holds" } else { "fails" }
                ),
            }
            .into());
        }
    }
    let (holds, witness) = match (by_enum, by_count) {
        (Some(e), _) => (e.holds, e.witness),
        (None, Some((holds, witness, count))) => {
            report.count = Some(count);
            (holds, witness)
        }
        (None, None) => unreachable!("some backend runs"),
    };
    report.verdict = Some(verdict("noninterference", holds, witness.as_ref()));
    Ok((report, verdict_code(holds)))
}

fn check_restricted(t: &Target, backend: Option<BackendChoice>) -> Result<(Report, i32)> {
    enumeration_only("check-restricted", backend, t)?;
    let accepts = Accepts {
        restriction: true,
        needs_restriction: true,
        ..Accepts::default()
    };
    let a = resolve(t, accepts, "check-restricted")?;
    let mut report = new_report("check-restricted", BackendChoice::Enum, &a);
    let p = checked(&a)?;
    let r = typecheck(a.restriction.as_ref().expect("required"), a.space())?;
    let v = qualitative::check_restricted_if(&p, &r, a.space())?;
    report.verdict = Some(verdict("restricted information flow", v.holds, v.witness.as_ref()));
    report.caveat = Some(FLOW_PARITY_CAVEAT.into());
    Ok((report, verdict_code(v.holds)))
}

fn check_conditional(t: &Target, backend: Option<BackendChoice>) -> Result<(Report, i32)> {
    enumeration_only("check-conditional", backend, t)?;
    let accepts = Accepts {
        condition: true,
        needs_condition: true,
        ..Accepts::default()
    };
    let a = resolve(t, accepts, "check-conditional")?;
    let mut report = new_report("check-conditional", BackendChoice::Enum, &a);
    let p = checked(&a)?;
    let psi = typecheck(a.condition.as_ref().expect("required"), a.space())?;
    let v = qualitative::check_conditional_if(&p, &psi, a.space())?;
    report.verdict = Some(verdict("conditional information flow", v.holds, v.witness.as_ref()));
    report.caveat = Some(FLOW_PARITY_CAVEAT.into());
    Ok((report, verdict_code(v.holds)))
}

fn parity(t: &Target, backend: Option<BackendChoice>) -> Result<(Report, i32)> {
    enumeration_only("parity", backend, t)?;
    let accepts = Accepts {
        condition: true,
        tolerance: true,
        ..Accepts::default()
    };
    let a = resolve(t, accepts, "parity")?;
    let mut report = new_report("parity", BackendChoice::Enum, &a);
    let p = checked(&a)?;
    let (table, v, property) = match &a.condition {
        Some(c) => {
            let cond = typecheck(c, a.space())?;
            let (t, v) = qualitative::conditional_demographic_parity(&p, &cond, a.space(), &a.tolerance)?;
            (t, v, "conditional demographic parity")
        }
        None => {
            let (t, v) = qualitative::demographic_parity(&p, a.space(), &a.tolerance)?;
            (t, v, "demographic parity")
        }
    };
    report.verdict = Some(verdict(property, v.holds, v.witness.as_ref()));
    report.parity = Some(table);
    Ok((report, verdict_code(v.holds)))
}

fn vulnerability(t: &Target, backend: Option<BackendChoice>) -> Result<(Report, i32)> {
    let a = resolve(t, COUNTING_ACCEPTS, "vulnerability")?;
    let backend = backend.unwrap_or(BackendChoice::Enum);
    let mut report = new_report("vulnerability", backend, &a);
    let p = checked(&a)?;
    let counting = CountingTarget::build(&a)?;
    counting.emit(t.emit_cnf.as_deref(), &mut report)?;

    let by_enum = match backend {
        BackendChoice::Count => None,
        _ => Some((
            quantitative::vulnerability(&p, a.space())?.exact,
            counting.enumerated_count()?,
        )),
    };
    let by_count = match backend {
        BackendChoice::Enum => None,
        _ => {
            let n = counting.sat_pairs()?.len() as u64;
            let v = quantitative::vulnerability_from_count(n, &counting.space, Backend::Counting)
                .context("the counting backend needs uniformly distributed groups")?;
            Some((v.value.exact, n))
        }
    };
    if let (Some((ve, ne)), Some((vc, nc))) = (&by_enum, &by_count) {
        if ne != nc {
            counting.cross_check()?;
        }
        if ve != vc {
            return Err(mismatch("V", ve, vc, (*ne, *nc)));
        }
    }
    let (v, n) = by_enum.or(by_count).expect("some backend runs");
    report.v = Some(Metric::new(&v));
    report.count = Some(n);
    Ok((report, EXIT_HOLDS))
}

fn spread(t: &Target, backend: Option<BackendChoice>) -> Result<(Report, i32)> {
    let accepts = Accepts {
        favorable: true,
        ..COUNTING_ACCEPTS
    };
    let a = resolve(t, accepts, "spread")?;
    let backend = backend.unwrap_or(BackendChoice::Enum);
    let mut report = new_report("spread", backend, &a);
    let p = checked(&a)?;
    let counting = CountingTarget::build(&a)?;
    counting.emit(t.emit_cnf.as_deref(), &mut report)?;

    let by_enum = match backend {
        BackendChoice::Count => None,
        _ => Some((
            quantitative::fairness_spread(&p, a.space(), a.favorable)?,
            counting.enumerated_count()?,
        )),
    };
    let by_count = match backend {
        BackendChoice::Enum => None,
        _ => {
            quantitative::ensure_binary(counting.program.output_domain(), a.favorable)?;
            let pairs = counting.sat_pairs()?;
            let n = pairs.len() as u64;
            let uniform = counting.space.with_uniform_groups();
            let v = quantitative::vulnerability_from_count(n, &uniform, Backend::Counting)?;
            let s = quantitative::spread_from_vulnerability(&v.value.exact, &uniform);
            let mut outcomes: BTreeMap<&Vec<i64>, usize> = BTreeMap::new();
            for (u, _) in &pairs {
                *outcomes.entry(u).or_default() += 1;
            }
            let per_u: Vec<PerURow> = counting
                .space
                .u_points()?
                .into_iter()
                .map(|(u, _)| {
                    let both = outcomes.get(&u).copied().unwrap_or(0) > 1;
                    PerURow {
                        u: counting.space.u_assignment(&u),
                        spread: Metric::new(&if both { rational::one() } else { rational::zero() }),
                    }
                })
                .collect();
            Some((s, per_u, n))
        }
    };
    if let (Some((se, ne)), Some((sc, rows, nc))) = (&by_enum, &by_count) {
        if ne != nc {
            counting.cross_check()?;
        }
        if se.value.exact != *sc {
            return Err(mismatch("S", &se.value.exact, sc, (*ne, *nc)));
        }
        if !counting.wrapped && per_u_rows(se) != *rows {
            return Err(mismatch("a per-u spread term", &se.value.exact, sc, (*ne, *nc)));
        }
    }
    match (by_enum, by_count) {
        (Some((s, n)), _) => {
            report.s = Some(Metric::new(&s.value.exact));
            report.per_u = Some(per_u_rows(&s));
            report.count = Some(n);
        }
        (None, Some((s, rows, n))) => {
            report.s = Some(Metric::new(&s));
            report.per_u = Some(rows);
            report.count = Some(n);
        }
        (None, None) => unreachable!("some backend runs"),
    }
    Ok((report, EXIT_HOLDS))
}

fn causal_accepts(paths: bool) -> Accepts {
    Accepts {
        model: true,
        paths,
        favorable: true,
        ..Accepts::default()
    }
}

fn counterfactual(t: &Target, backend: Option<BackendChoice>) -> Result<(Report, i32)> {
    enumeration_only("counterfactual", backend, t)?;
    let a = resolve(t, causal_accepts(false), "counterfactual")?;
    let mut report = new_report("counterfactual", BackendChoice::Enum, &a);
    let (s, v) = causal::check_counterfactual_fairness(&a.program, a.model(), a.favorable)?;
    let diff = causal::prob_deviating_counterfactual(&a.program, a.model(), a.favorable)?;
    report.verdict = Some(verdict("counterfactual fairness", v.holds, v.witness.as_ref()));
    report.s = Some(Metric::new(&s.value.exact));
    report.per_u = Some(per_u_rows(&s));
    report.diff_probability = Some(Metric::new(&diff.exact));
    Ok((report, verdict_code(v.holds)))
}

fn path_specific(t: &Target, backend: Option<BackendChoice>) -> Result<(Report, i32)> {
    enumeration_only("path-specific", backend, t)?;
    let a = resolve(t, causal_accepts(true), "path-specific")?;
    let mut report = new_report("path-specific", BackendChoice::Enum, &a);
    let paths = a.paths.as_ref().expect("required");
    let s = causal::path_specific_spread(&a.program, a.model(), paths, a.favorable)?;
    let holds = s.value.exact == rational::zero();
    let witness = s
        .per_u
        .iter()
        .find(|p| p.spread != rational::zero())
        .map(|p| serde_json::json!({ "b": p.u }));
    report.verdict = Some(verdict("path-specific counterfactual fairness", holds, witness.as_ref()));
    report.s = Some(Metric::new(&s.value.exact));
    report.per_u = Some(per_u_rows(&s));
    Ok((report, verdict_code(holds)))
}

fn crosscheck(t: &Target, backend: Option<BackendChoice>) -> Result<(Report, i32)> {
    if matches!(backend, Some(BackendChoice::Enum | BackendChoice::Count)) {
        bail!("crosscheck always runs both backends");
    }
    let a = resolve(t, COUNTING_ACCEPTS, "crosscheck")?;
    let mut report = new_report("crosscheck", BackendChoice::Both, &a);
    let counting = CountingTarget::build(&a)?;
    counting.emit(t.emit_cnf.as_deref(), &mut report)?;
    let x = counting.cross_check()?;
    report.count = Some(x.counting);
    report.crosscheck = Some(CrossCheckReport {
        program: x.program.clone(),
        enumeration: x.enumeration,
        counting: x.counting,
        gates: x.gates,
        clauses: x.clauses,
    });
    report.timings = Some(BTreeMap::from([
        ("enumerationMs".to_string(), x.timings.enumeration_ms),
        ("countingMs".to_string(), x.timings.counting_ms),
    ]));
    if x.enumeration != x.counting {
        return Err(anyhow!("backend counts differ: {} vs {}", x.enumeration, x.counting));
    }
    Ok((report, EXIT_HOLDS))
}
