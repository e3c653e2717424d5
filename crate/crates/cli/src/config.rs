use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use gammalab::spaces::SpaceSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CheckName {
    Curvature,
    GradientEstimate,
    VarianceBound,
    BeDiagnostics,
    BobkovLocal,
    BobkovGlobal,
    TwoPointGrid,
    PhiTrace,
    Zeta,
    Isoperimetry,
    GaussOracle,
}

impl CheckName {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Curvature => "curvature",
            CheckName::GradientEstimate => "gradient-estimate",
            CheckName::VarianceBound => "variance-bound",
            CheckName::BeDiagnostics => "be-diagnostics",
            CheckName::BobkovLocal => "bobkov-local",
            CheckName::BobkovGlobal => "bobkov-global",
            CheckName::TwoPointGrid => "two-point-grid",
            CheckName::PhiTrace => "phi-trace",
            CheckName::Zeta => "zeta",
            CheckName::Isoperimetry => "isoperimetry",
            CheckName::GaussOracle => "gauss-oracle",
        }
    }

    /// Checks that never look at the space.
    pub fn space_free(self) -> bool {
        matches!(self, CheckName::TwoPointGrid | CheckName::GaussOracle)
    }

    /// Checks that take `K*` unless a `K` override is given.
    pub fn uses_curvature(self) -> bool {
        !matches!(self, CheckName::Curvature | CheckName::TwoPointGrid | CheckName::GaussOracle)
    }

    pub fn uses_heat_flow(self) -> bool {
        matches!(
            self,
            CheckName::GradientEstimate | CheckName::VarianceBound | CheckName::BobkovLocal | CheckName::PhiTrace | CheckName::Zeta
        )
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    JsonLines,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::JsonLines => "jsonl",
        }
    }
}

/// An `α` entry: a number or the symbol `"1/K"`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Alpha {
    Value(f64),
    Symbol(String),
}

impl Alpha {
    pub fn resolve(&self, k: f64) -> Result<f64, CliError> {
        match self {
            Alpha::Value(v) if v.is_finite() && *v >= 0.0 => Ok(*v),
            Alpha::Value(v) => Err(CliError::Config(format!("alpha must be finite and nonnegative, got {v}"))),
            Alpha::Symbol(s) if s.replace(' ', "") == "1/K" => Ok(1.0 / k),
            Alpha::Symbol(s) => Err(CliError::Config(format!("unknown alpha symbol {s:?} (expected a number or \"1/K\")"))),
        }
    }
}

/// Parameters of one check. Every field is optional; unset ones take the
/// check's defaults, which are echoed into the summary.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckParams {
    /// Time grid.
    pub t: Option<Vec<f64>>,
    pub alpha: Option<Vec<Alpha>>,
    pub epsilon: Option<f64>,
    /// Curvature override; `K*` of the space otherwise.
    #[serde(rename = "K")]
    pub k: Option<f64>,
    pub tolerance: Option<f64>,
    /// Number of random fields where the check samples them.
    pub samples: Option<usize>,
    /// Points per axis of the `(a, b)` grid.
    pub grid: Option<usize>,
    /// Horizon `T` of the Φ interpolation.
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    /// Interval unions for the Gaussian oracle, e.g. `"[-1,1] u [2,inf]"`.
    pub intervals: Option<Vec<String>>,
    /// State sets for isoperimetry.
    pub sets: Option<Vec<Vec<usize>>>,
    /// Half-line thresholds for isoperimetry on chains.
    pub thresholds: Option<Vec<f64>>,
    #[serde(rename = "assert")]
    pub asserted: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub space: Option<SpaceSpec>,
    #[serde(default)]
    pub checks: BTreeMap<CheckName, CheckParams>,
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        let mut config: Self =
            toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {}", origin.display(), e.to_string().trim_end())))?;
        // A relative space file is relative to the config that names it.
        if let Some(SpaceSpec::File { path, .. }) = &mut config.space {
            if path.is_relative() {
                if let Some(dir) = origin.parent() {
                    *path = dir.join(&*path);
                }
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let text = r#"
seed = 7
format = "json-lines"

[space]
model = "ou_chain"
n = 50
R = 5.0

[checks.curvature]

[checks.bobkov-local]
alpha = [0.0, "1/K"]
t = [0.1, 0.5]
"#;
        let c = ExperimentConfig::parse(text, Path::new("x.toml")).unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.format, Some(Format::JsonLines));
        assert_eq!(c.space, Some(SpaceSpec::OuChain { n: 50, half_width: 5.0 }));
        let keys: Vec<_> = c.checks.keys().copied().collect();
        assert_eq!(keys, vec![CheckName::Curvature, CheckName::BobkovLocal]);
        let alpha = c.checks[&CheckName::BobkovLocal].alpha.as_ref().unwrap();
        assert_eq!(alpha[1].resolve(2.0).unwrap(), 0.5);
    }

    #[test]
    fn errors_name_the_field() {
        let err = ExperimentConfig::parse("[checks.zeta]\nbogus = 1\n", Path::new("cfg.toml")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("cfg.toml") && msg.contains("bogus"), "{msg}");
        let err = ExperimentConfig::parse("[checks.nonsense]\n", Path::new("cfg.toml")).unwrap_err();
        assert!(err.to_string().contains("nonsense"));
        assert!(Alpha::Symbol("K".into()).resolve(1.0).is_err());
    }
}
