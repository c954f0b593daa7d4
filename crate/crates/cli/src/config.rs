//! JSON run configuration.

use std::path::{Path, PathBuf};

use corsrbf::engine::ConfigError;
use corsrbf::{BoundedDomain, NamedObjective, OptimizationConfig};
use serde::Deserialize;

/// A configuration problem, with the line of the offending key when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ObjectiveSpec {
    Builtin(String),
    External(ExternalSpec),
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExternalSpec {
    pub command: Vec<String>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub objective: ObjectiveSpec,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    /// Dimension of the built-in sphere when no bounds are given.
    pub dim: Option<usize>,
    pub n_init: usize,
    pub m: usize,
    pub rho0: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub lh_attempts: Option<usize>,
    pub cloud_size: Option<usize>,
    pub best_fraction: Option<f64>,
    pub workers: Option<usize>,
    pub batch_size: Option<usize>,
    pub seed: Option<u64>,
    pub use_space_rescaling: Option<bool>,
    pub maximize: Option<bool>,
    /// Where the history CSV goes; `--out` takes precedence.
    pub history: Option<PathBuf>,
}

/// Fully resolved run settings.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub objective: ObjectiveSpec,
    pub domain: BoundedDomain,
    pub optimization: OptimizationConfig,
    pub history: Option<PathBuf>,
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub objective: Option<String>,
}

/// 1-based line of the first occurrence of `"key"` in the document.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&quoted)).map(|i| i + 1)
}

pub fn parse(text: &str) -> Result<RunConfigFile, ConfigIssue> {
    serde_json::from_str(text).map_err(|e| ConfigIssue {
        line: Some(e.line()),
        message: e.to_string(),
    })
}

pub fn load(path: &Path) -> Result<(RunConfigFile, String), ConfigIssue> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigIssue {
        line: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    Ok((parse(&text)?, text))
}

/// Applies overrides and defaults, then checks every invariant.
pub fn resolve(
    file: RunConfigFile,
    text: &str,
    overrides: &Overrides,
) -> Result<RunPlan, ConfigIssue> {
    let issue = |key: &str, message: String| ConfigIssue {
        line: line_of(text, key),
        message,
    };
    let objective = match &overrides.objective {
        Some(name) => ObjectiveSpec::Builtin(name.clone()),
        None => file.objective.clone(),
    };
    let domain = match (&objective, &file.lower, &file.upper) {
        (_, Some(lower), Some(upper)) => BoundedDomain::new(lower.clone(), upper.clone())
            .map_err(|e| issue("lower", format!("bounds: {e}")))?,
        (_, Some(_), None) | (_, None, Some(_)) => {
            return Err(issue(
                if file.lower.is_some() { "lower" } else { "upper" },
                "lower and upper must be given together".to_string(),
            ))
        }
        (ObjectiveSpec::Builtin(name), None, None) => {
            NamedObjective::by_name(name, file.dim.unwrap_or(2))
                .map_err(|e| issue("objective", e.to_string()))?
                .domain()
                .clone()
        }
        (ObjectiveSpec::External(_), None, None) => {
            return Err(issue(
                "objective",
                "external objectives need lower and upper bounds".to_string(),
            ))
        }
    };
    match &objective {
        ObjectiveSpec::Builtin(name) => {
            let builtin = NamedObjective::by_name(name, domain.dim())
                .map_err(|e| issue("objective", e.to_string()))?;
            if builtin.dim() != domain.dim() {
                return Err(issue(
                    "lower",
                    format!("{name} is {}-dimensional but bounds have {}", builtin.dim(), domain.dim()),
                ));
            }
        }
        ObjectiveSpec::External(spec) if spec.command.is_empty() => {
            return Err(issue("command", "command must not be empty".to_string()));
        }
        ObjectiveSpec::External(_) => {}
    }

    let defaults = OptimizationConfig::default();
    let optimization = OptimizationConfig {
        n_init: file.n_init,
        m: file.m,
        rho0: file.rho0.unwrap_or(defaults.rho0),
        p: file.p.unwrap_or(defaults.p),
        q: file.q.unwrap_or(defaults.q),
        lh_attempts: file.lh_attempts.unwrap_or(defaults.lh_attempts),
        cloud_size: file.cloud_size.unwrap_or(defaults.cloud_size),
        best_fraction: file.best_fraction.unwrap_or(defaults.best_fraction),
        workers: overrides.workers.or(file.workers).unwrap_or(defaults.workers),
        batch_size: file.batch_size.unwrap_or(defaults.batch_size),
        seed: overrides.seed.or(file.seed).unwrap_or(defaults.seed),
        use_space_rescaling: file.use_space_rescaling.unwrap_or(defaults.use_space_rescaling),
        maximize: file.maximize.unwrap_or(defaults.maximize),
        proposal: defaults.proposal,
    };
    optimization
        .validate(domain.dim())
        .map_err(|ConfigError { field, message }| {
            let line = if field == "workers" && overrides.workers.is_some() {
                None
            } else {
                line_of(text, field)
            };
            ConfigIssue {
                line,
                message: format!("{field} {message}"),
            }
        })?;
    Ok(RunPlan {
        objective,
        domain,
        optimization,
        history: file.history,
    })
}
