//! Command-line front end: argument parsing, dispatch and exit codes.

pub mod config;
mod commands;
pub mod report;
mod reproduce;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::Outcome;

/// Exit codes.
pub const EXIT_HOLDS: i32 = 0;
pub const EXIT_VIOLATED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fairflow", version, about = "Fairness analysis of decision programs through information flow")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Analysis backend.
    #[arg(long, value_enum, global = true)]
    pub backend: Option<BackendChoice>,

    /// Report format.
    #[arg(long, value_enum, global = true, default_value = "text")]
    pub format: Format,

    /// Leave wall-clock timings out of the report.
    #[arg(long, global = true)]
    pub no_timings: bool,

    /// Worker threads for parallel enumeration.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendChoice {
    Enum,
    Count,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Unconditional noninterference from the protected input to the decision.
    CheckNi(Target),
    /// Noninterference within the classes of a restriction program.
    CheckRestricted(Target),
    /// Noninterference wherever a declassification condition is false.
    CheckConditional(Target),
    /// Demographic parity, or conditional parity with --condition.
    Parity(Target),
    /// Conditional vulnerability and the projected count.
    Vulnerability(Target),
    /// Fairness spread with its per-u terms.
    Spread(Target),
    /// Counterfactual fairness under a causal model.
    Counterfactual(Target),
    /// Path-specific counterfactual spread.
    PathSpecific(Target),
    /// Compare the enumeration and SAT counting backends.
    Crosscheck(Target),
    /// Run the built-in golden suite and print a pass/fail matrix.
    Reproduce,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Target {
    /// Decision program (`.dp`).
    #[arg(long)]
    pub program: Option<PathBuf>,
    /// Analysis configuration (JSON, schema 1).
    #[arg(long, visible_alias = "config")]
    pub space: Option<PathBuf>,
    /// Causal model (`.scm`).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Restriction program with the same signature as the decision program.
    #[arg(long)]
    pub restriction: Option<PathBuf>,
    /// Boolean condition program with the same signature.
    #[arg(long)]
    pub condition: Option<PathBuf>,
    /// Comma-separated variables held at their factual values.
    #[arg(long, value_delimiter = ',')]
    pub paths: Option<Vec<String>>,
    /// The favorable outcome (default 1).
    #[arg(long, allow_negative_numbers = true)]
    pub favorable: Option<i64>,
    /// Parity tolerance as an exact rational (default 0).
    #[arg(long)]
    pub tolerance: Option<String>,
    /// Override a program constant, `NAME=VALUE`.
    #[arg(long = "const", value_name = "NAME=VALUE", value_parser = parse_const)]
    pub constants: Vec<(String, i64)>,
    /// Wrap a non-uniform input into `SIZE` equiprobable levels, `NAME=SIZE`.
    #[arg(long, value_name = "NAME=SIZE", value_parser = parse_wrap)]
    pub wrap: Vec<(String, u64)>,
    /// Write the counting formula in DIMACS format.
    #[arg(long, value_name = "FILE")]
    pub emit_cnf: Option<PathBuf>,
}

fn split_pair(s: &str) -> Result<(&str, &str), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))
}

fn parse_const(s: &str) -> Result<(String, i64), String> {
    let (k, v) = split_pair(s)?;
    let v = v.parse().map_err(|_| format!("`{v}` is not an integer"))?;
    Ok((k.to_string(), v))
}

fn parse_wrap(s: &str) -> Result<(String, u64), String> {
    let (k, v) = split_pair(s)?;
    let v = v.parse().map_err(|_| format!("`{v}` is not a positive size"))?;
    Ok((k.to_string(), v))
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_HOLDS };
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome::error(code, text)
            } else {
                Outcome {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    commands::execute(cli)
}
