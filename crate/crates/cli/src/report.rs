//! The JSON report and its text rendering. JSON is the contract; the text
//! form is produced from the same structure.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use fairflow::dsl::Assignment;
use fairflow::quantitative::DECIMAL_PLACES;
use fairflow::rational::{self, Rational};

use crate::config::ConfigEcho;

/// An exact value with its decimal rendering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metric {
    pub exact: String,
    pub decimal: String,
}

impl Metric {
    pub fn new(value: &Rational) -> Self {
        Metric {
            exact: rational::to_fraction(value),
            decimal: rational::to_decimal(value, DECIMAL_PLACES),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerURow {
    pub u: Assignment,
    pub spread: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub property: String,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CrossCheckReport {
    pub program: String,
    pub enumeration: u64,
    pub counting: u64,
    pub gates: usize,
    pub clauses: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnfReport {
    pub path: String,
    pub variables: u32,
    pub clauses: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenRow {
    pub name: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config: Option<ConfigEcho>,
    pub backend: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub verdict: Option<VerdictReport>,
    #[serde(rename = "V", skip_serializing_if = "Option::is_none", default)]
    pub v: Option<Metric>,
    #[serde(rename = "S", skip_serializing_if = "Option::is_none", default)]
    pub s: Option<Metric>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub count: Option<u64>,
    #[serde(rename = "perU", skip_serializing_if = "Option::is_none", default)]
    pub per_u: Option<Vec<PerURow>>,
    #[serde(rename = "diffProbability", skip_serializing_if = "Option::is_none", default)]
    pub diff_probability: Option<Metric>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub parity: Option<fairflow::qualitative::ParityTable>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub crosscheck: Option<CrossCheckReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cnf: Option<CnfReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub matrix: Option<Vec<GoldenRow>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub caveat: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings: Option<BTreeMap<String, f64>>,
}

impl Report {
    pub fn new(command: &str, backend: &str) -> Self {
        Report {
            tool: "fairflow".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: None,
            backend: backend.into(),
            verdict: None,
            v: None,
            s: None,
            count: None,
            per_u: None,
            diff_probability: None,
            parity: None,
            crosscheck: None,
            cnf: None,
            matrix: None,
            caveat: None,
            timings: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        writeln!(w, "{} {}: {}", self.tool, self.version, self.command).unwrap();
        if let Some(c) = &self.config {
            writeln!(w, "program: {}", c.program).unwrap();
            for (label, v) in [
                ("config", &c.space),
                ("model", &c.model),
                ("restriction", &c.restriction),
                ("condition", &c.condition),
            ] {
                if let Some(v) = v {
                    writeln!(w, "{label}: {v}").unwrap();
                }
            }
            if let Some(p) = &c.paths {
                writeln!(w, "paths: {}", p.join(", ")).unwrap();
            }
        }
        writeln!(w, "backend: {}", self.backend).unwrap();
        if let Some(v) = &self.verdict {
            let state = if v.holds { "holds" } else { "violated" };
            writeln!(w, "{}: {state}", v.property).unwrap();
            if let Some(x) = &v.witness {
                writeln!(w, "witness: {x}").unwrap();
            }
        }
        for (label, m) in [("V", &self.v), ("S", &self.s), ("Pr[Diff = 1]", &self.diff_probability)] {
            if let Some(m) = m {
                writeln!(w, "{label} = {} ({})", m.exact, m.decimal).unwrap();
            }
        }
        if let Some(c) = self.count {
            writeln!(w, "count = {c}").unwrap();
        }
        if let Some(rows) = &self.per_u {
            writeln!(w, "spread terms:").unwrap();
            for r in rows {
                writeln!(w, "  {}: {}", r.u, r.spread.exact).unwrap();
            }
        }
        if let Some(t) = &self.parity {
            writeln!(w, "outcome rates by group (max gap {}):", rational::to_fraction(&t.max_gap)).unwrap();
            for (gi, g) in t.groups.iter().enumerate() {
                let cells: Vec<String> = t
                    .outcomes
                    .iter()
                    .zip(&t.rows[gi])
                    .map(|(d, p)| format!("{d}: {}", rational::to_fraction(p)))
                    .collect();
                writeln!(w, "  {g}: {}", cells.join(", ")).unwrap();
            }
        }
        if let Some(x) = &self.crosscheck {
            writeln!(
                w,
                "enumeration count = {}, SAT count = {} ({} gates, {} clauses)",
                x.enumeration, x.counting, x.gates, x.clauses
            )
            .unwrap();
        }
        if let Some(c) = &self.cnf {
            writeln!(w, "cnf: {} ({} variables, {} clauses)", c.path, c.variables, c.clauses).unwrap();
        }
        if let Some(rows) = &self.matrix {
            let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
            for r in rows {
                let mark = if r.pass { "PASS" } else { "FAIL" };
                writeln!(w, "{mark}  {:width$}  expected {}, got {}", r.name, r.expected, r.actual).unwrap();
            }
            let passed = rows.iter().filter(|r| r.pass).count();
            writeln!(w, "{passed}/{} goldens pass", rows.len()).unwrap();
        }
        if let Some(c) = &self.caveat {
            writeln!(w, "caveat: {c}").unwrap();
        }
        if let Some(t) = &self.timings {
            let parts: Vec<String> = t.iter().map(|(k, v)| format!("{k} {v:.3}")).collect();
            writeln!(w, "timings (ms): {}", parts.join(", ")).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_keeps_both_forms() {
        let m = Metric::new(&rational::ratio(2, 3));
        assert_eq!(m.exact, "2/3");
        assert_eq!(m.decimal, "0.666667");
    }

    #[test]
    fn json_round_trips() {
        let mut r = Report::new("spread", "enumeration");
        r.s = Some(Metric::new(&rational::ratio(1, 5)));
        r.count = Some(12);
        r.per_u = Some(vec![PerURow {
            u: Assignment::new().with("score", 6),
            spread: Metric::new(&rational::one()),
        }]);
        let json = r.to_json();
        let back: Report = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json(), json);
        assert!(json.contains("\"S\"") && json.contains("\"perU\"") && !json.contains("\"V\""));
    }
}
