//! Analysis configuration files (`"schema": 1`) and their resolution into
//! programs, spaces and models.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use fairflow::causal::{parse_model, CausalModel, PathSpec};
use fairflow::dsl::{parse_program, DecisionProgram, SourceProgram};
use fairflow::rational::{self, Rational};
use fairflow::spaces::{Distribution, Domain, InputSpace, Variable};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Protected,
    Unprotected,
    Background,
}

/// `[lo, hi]`, `{"range": [lo, hi]}` or `{"set": [v, ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DomainDecl {
    Bounds([i64; 2]),
    Range { range: [i64; 2] },
    Set { set: Vec<i64> },
}

impl DomainDecl {
    fn resolve(&self) -> fairflow::Result<Domain> {
        match self {
            DomainDecl::Bounds([lo, hi]) | DomainDecl::Range { range: [lo, hi] } => Domain::range(*lo, *hi),
            DomainDecl::Set { set } => Domain::set(set.iter().copied()),
        }
    }
}

/// A probability written exactly: `"3/10"`, `"0.3"` or an integer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Probability {
    Text(String),
    Int(i64),
}

impl Probability {
    fn resolve(&self) -> fairflow::Result<Rational> {
        match self {
            Probability::Text(t) => rational::parse(t),
            Probability::Int(i) => Ok(rational::int(*i)),
        }
    }
}

/// `"uniform"` or `{"pmf": {"value": probability, ...}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistDecl {
    Named(String),
    Pmf { pmf: BTreeMap<String, Probability> },
}

impl Default for DistDecl {
    fn default() -> Self {
        DistDecl::Named("uniform".into())
    }
}

impl DistDecl {
    fn resolve(&self, name: &str) -> Result<Distribution> {
        match self {
            DistDecl::Named(s) if s == "uniform" => Ok(Distribution::Uniform),
            DistDecl::Named(s) => bail!("input `{name}`: unknown distribution `{s}` (use \"uniform\" or {{\"pmf\": ...}})"),
            DistDecl::Pmf { pmf } => {
                let mut out = BTreeMap::new();
                for (k, p) in pmf {
                    let v: i64 = k
                        .trim()
                        .parse()
                        .map_err(|_| anyhow!("input `{name}`: pmf key `{k}` is not an integer"))?;
                    out.insert(v, p.resolve()?);
                }
                Ok(Distribution::Pmf(out))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDecl {
    pub name: String,
    pub role: Role,
    pub domain: DomainDecl,
    #[serde(default)]
    pub dist: DistDecl,
}

/// The JSON document as written. Relative paths are resolved against the
/// directory holding the file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema: u32,
    #[serde(default)]
    pub inputs: Vec<InputDecl>,
    pub program: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub restriction: Option<PathBuf>,
    pub condition: Option<PathBuf>,
    pub paths: Option<Vec<String>>,
    pub favorable: Option<i64>,
    pub tolerance: Option<String>,
    #[serde(default)]
    pub constants: BTreeMap<String, i64>,
    #[serde(default)]
    pub wrap: BTreeMap<String, u64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let mut cfg: ConfigFile =
            serde_json::from_str(&text).with_context(|| format!("invalid configuration {}", path.display()))?;
        if cfg.schema != SCHEMA_VERSION {
            bail!(
                "{}: unsupported schema {} (this tool reads schema {SCHEMA_VERSION})",
                path.display(),
                cfg.schema
            );
        }
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.program, &mut cfg.model, &mut cfg.restriction, &mut cfg.condition]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Options taken from the command line; each one overrides the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub program: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub restriction: Option<PathBuf>,
    pub condition: Option<PathBuf>,
    pub paths: Option<Vec<String>>,
    pub favorable: Option<i64>,
    pub tolerance: Option<String>,
    pub constants: Vec<(String, i64)>,
    pub wrap: Vec<(String, u64)>,
}

/// Which options a subcommand reads.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accepts {
    pub model: bool,
    pub restriction: bool,
    pub condition: bool,
    pub paths: bool,
    pub favorable: bool,
    pub tolerance: bool,
    pub wrap: bool,
    pub needs_restriction: bool,
    pub needs_condition: bool,
}

/// Everything an analysis needs, loaded and validated.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub echo: ConfigEcho,
    pub program: DecisionProgram,
    pub space: Option<InputSpace>,
    pub model: Option<CausalModel>,
    pub restriction: Option<DecisionProgram>,
    pub condition: Option<DecisionProgram>,
    pub paths: Option<PathSpec>,
    pub favorable: i64,
    pub tolerance: Rational,
    pub wrap: BTreeMap<String, u64>,
}

/// The resolved configuration as it appears in reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConfigEcho {
    pub schema: u32,
    pub program: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub space: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub restriction: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub condition: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub paths: Option<Vec<String>>,
    pub favorable: i64,
    pub tolerance: String,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub constants: BTreeMap<String, i64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub wrap: BTreeMap<String, u64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub inputs: Vec<InputEcho>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputEcho {
    pub name: String,
    pub role: Role,
    pub domain: String,
    pub dist: String,
}

fn echo_variable(v: &Variable, role: Role) -> InputEcho {
    let dist = match &v.dist {
        Distribution::Uniform => "uniform".to_string(),
        Distribution::Pmf(pmf) => {
            let parts: Vec<String> = pmf
                .iter()
                .map(|(k, p)| format!("{k}: {}", rational::to_fraction(p)))
                .collect();
            format!("pmf {{{}}}", parts.join(", "))
        }
    };
    InputEcho {
        name: v.name.clone(),
        role,
        domain: v.domain.to_string(),
        dist,
    }
}

fn read_program(path: &Path) -> Result<DecisionProgram> {
    let src = SourceProgram::from_file(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(parse_program(&src)?)
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

impl Analysis {
    /// Merges the optional config file with the command-line overrides and
    /// loads every referenced file. Options the subcommand does not read are
    /// rejected rather than ignored.
    pub fn resolve(space_path: Option<&Path>, o: Overrides, accepts: Accepts, command: &str) -> Result<Analysis> {
        let file = match space_path {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile {
                schema: SCHEMA_VERSION,
                ..ConfigFile::default()
            },
        };
        let program_path = o.program.or(file.program).ok_or_else(|| anyhow!("{command}: no program given (use --program or the config's \"program\")"))?;
        let model_path = o.model.or(file.model);
        let restriction_path = o.restriction.or(file.restriction);
        let condition_path = o.condition.or(file.condition);
        let paths = o.paths.or(file.paths);
        let favorable = o.favorable.or(file.favorable);
        let tolerance = o.tolerance.or(file.tolerance);
        let mut constants = file.constants;
        constants.extend(o.constants);
        let mut wrap = file.wrap;
        wrap.extend(o.wrap);

        let reject = |present: bool, allowed: bool, what: &str| -> Result<()> {
            if present && !allowed {
                bail!("{command} does not take {what}");
            }
            Ok(())
        };
        reject(model_path.is_some(), accepts.model, "a causal model")?;
        reject(restriction_path.is_some(), accepts.restriction, "a restriction program")?;
        reject(condition_path.is_some(), accepts.condition, "a condition program")?;
        reject(paths.is_some(), accepts.paths, "a path specification")?;
        reject(favorable.is_some(), accepts.favorable, "a favorable outcome")?;
        reject(tolerance.is_some(), accepts.tolerance, "a tolerance")?;
        reject(!wrap.is_empty(), accepts.wrap, "wrapping sizes")?;
        if paths.is_some() && model_path.is_none() {
            bail!("a path specification needs a causal model");
        }
        if accepts.paths && paths.is_none() {
            bail!("{command} needs a path specification (--paths)");
        }
        if accepts.model && model_path.is_none() {
            bail!("{command} needs a causal model (--model or the config's \"model\")");
        }
        if accepts.needs_restriction && restriction_path.is_none() {
            bail!("{command} needs a restriction program (--restriction)");
        }
        if accepts.needs_condition && condition_path.is_none() {
            bail!("{command} needs a condition program (--condition)");
        }

        let mut program = read_program(&program_path)?;
        if !constants.is_empty() {
            program = program.with_constants(constants.iter().map(|(k, v)| (k.as_str(), *v)))?;
        }
        let restriction = restriction_path.as_deref().map(read_program).transpose()?;
        let condition = condition_path.as_deref().map(read_program).transpose()?;
        let tolerance_value = match &tolerance {
            Some(t) => rational::parse(t)?,
            None => rational::zero(),
        };

        let mut echo_inputs = Vec::new();
        let (space, model) = match &model_path {
            Some(mp) => {
                let text = std::fs::read_to_string(mp).with_context(|| format!("cannot read {}", mp.display()))?;
                let mut model = parse_model(&text, &display(mp))?;
                for decl in &file.inputs {
                    if decl.role != Role::Background {
                        bail!(
                            "input `{}`: with a causal model only background inputs may be declared",
                            decl.name
                        );
                    }
                    let declared = decl.domain.resolve()?;
                    let bg = model
                        .background
                        .iter()
                        .find(|v| v.name == decl.name)
                        .ok_or_else(|| anyhow!("input `{}` is not a background variable of the model", decl.name))?;
                    if bg.domain != declared {
                        bail!(
                            "background `{}`: domain {declared} differs from the model's {}",
                            decl.name,
                            bg.domain
                        );
                    }
                    model = model.with_background_distribution(&decl.name, decl.dist.resolve(&decl.name)?)?;
                }
                for v in &model.background {
                    echo_inputs.push(echo_variable(v, Role::Background));
                }
                (None, Some(model))
            }
            None => {
                let mut protected = None;
                let mut unprotected = Vec::new();
                for decl in &file.inputs {
                    let var = Variable::new(decl.name.clone(), decl.domain.resolve()?, decl.dist.resolve(&decl.name)?)?;
                    match decl.role {
                        Role::Protected if protected.is_some() => bail!("more than one protected input"),
                        Role::Protected => protected = Some(var),
                        Role::Unprotected => unprotected.push(var),
                        Role::Background => bail!("background input `{}` needs a causal model", decl.name),
                    }
                }
                let protected = protected.ok_or_else(|| anyhow!("{command} needs a space with one protected input (--space)"))?;
                if unprotected.is_empty() {
                    bail!("the space declares no unprotected input");
                }
                let space = InputSpace::new(protected, unprotected)?;
                echo_inputs.push(echo_variable(&space.protected, Role::Protected));
                for v in &space.unprotected {
                    echo_inputs.push(echo_variable(v, Role::Unprotected));
                }
                (Some(space), None)
            }
        };

        let echo = ConfigEcho {
            schema: SCHEMA_VERSION,
            program: display(&program_path),
            space: space_path.map(display),
            model: model_path.as_deref().map(display),
            restriction: restriction_path.as_deref().map(display),
            condition: condition_path.as_deref().map(display),
            paths: paths.clone(),
            favorable: favorable.unwrap_or(1),
            tolerance: rational::to_fraction(&tolerance_value),
            constants,
            wrap: wrap.clone(),
            inputs: echo_inputs,
        };
        Ok(Analysis {
            echo,
            program,
            space,
            model,
            restriction,
            condition,
            paths: paths.map(PathSpec::new),
            favorable: favorable.unwrap_or(1),
            tolerance: tolerance_value,
            wrap,
        })
    }

    /// The input space; present whenever no model is configured.
    pub fn space(&self) -> &InputSpace {
        self.space.as_ref().expect("resolved without a model")
    }

    pub fn model(&self) -> &CausalModel {
        self.model.as_ref().expect("resolved with a model")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_and_dist_forms() {
        let cfg: ConfigFile = serde_json::from_str(
            r#"{"schema": 1, "inputs": [
                {"name": "g", "role": "protected", "domain": [0, 1]},
                {"name": "u", "role": "unprotected", "domain": {"set": [1, 5]}, "dist": {"pmf": {"1": "0.25", "5": "3/4"}}},
                {"name": "v", "role": "unprotected", "domain": {"range": [2, 3]}, "dist": "uniform"}
            ]}"#,
        )
        .unwrap();
        assert_eq!(cfg.inputs[0].domain.resolve().unwrap(), Domain::range(0, 1).unwrap());
        assert_eq!(cfg.inputs[1].domain.resolve().unwrap(), Domain::set([1, 5]).unwrap());
        match cfg.inputs[1].dist.resolve("u").unwrap() {
            Distribution::Pmf(p) => assert_eq!(p[&1], rational::ratio(1, 4)),
            d => panic!("{d:?}"),
        }
        assert_eq!(cfg.inputs[2].dist.resolve("v").unwrap(), Distribution::Uniform);
    }

    #[test]
    fn unknown_fields_and_distributions_are_rejected() {
        assert!(serde_json::from_str::<ConfigFile>(r#"{"schema": 1, "input": []}"#).is_err());
        assert!(DistDecl::Named("normal".into()).resolve("x").is_err());
        let bad_key = DistDecl::Pmf {
            pmf: BTreeMap::from([("one".to_string(), Probability::Int(1))]),
        };
        assert!(bad_key.resolve("x").is_err());
    }
}
