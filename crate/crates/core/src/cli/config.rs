//! Run configuration: a TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::dictionary::DictionarySpec;
use crate::solver::{RepairConfig, SolverConfig};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    /// Outcome column; `y` when unset.
    pub outcome: Option<String>,
    /// Covariate columns; every other column when unset (none in lag mode).
    pub covariates: Option<Vec<String>>,
    /// Treat the outcome column as a series and use `y_{t−1}` as the first covariate.
    pub lag: bool,
}

impl DataConfig {
    pub fn outcome(&self) -> &str {
        self.outcome.as_deref().unwrap_or("y")
    }
}

/// A dictionary given either as a preset string or spelled out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CandidateConfig {
    Preset(String),
    Spec(DictionarySpec),
}

impl CandidateConfig {
    pub fn expand(&self) -> Result<Vec<DictionarySpec>, CliError> {
        match self {
            CandidateConfig::Preset(s) => parse_preset(s),
            CandidateConfig::Spec(s) => Ok(vec![s.clone()]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepairSection {
    pub enabled: bool,
    pub eps: f64,
    pub initial_grid: usize,
    pub max_rounds: usize,
}

impl Default for RepairSection {
    fn default() -> Self {
        let r = RepairConfig::default();
        Self { enabled: true, eps: r.eps, initial_grid: r.initial_grid, max_rounds: r.max_rounds }
    }
}

impl RepairSection {
    pub fn config(&self) -> RepairConfig {
        RepairConfig { eps: self.eps, initial_grid: self.initial_grid, max_rounds: self.max_rounds }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Covariate points of the QGM check.
    pub qgm_x_points: usize,
    /// Levels of the QGM check; `0.01, …, 0.99` when unset.
    pub qgm_u: Option<Vec<f64>>,
    /// Confidence level of pointwise bands.
    pub band_level: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { qgm_x_points: 201, qgm_u: None, band_level: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub candidates: Vec<CandidateConfig>,
    /// Penalty grid for `select`; five log-spaced values in `[0.001, 0.5]` when unset.
    pub lambdas: Option<Vec<f64>>,
    pub solver: SolverConfig,
    pub repair: RepairSection,
    pub grids: GridConfig,
    /// Dictionary used for the Stein diagnostics; the fitted one when unset.
    pub stein_probe: Option<CandidateConfig>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            candidates: Vec::new(),
            lambdas: None,
            solver: SolverConfig::default(),
            repair: RepairSection::default(),
            grids: GridConfig::default(),
            stein_probe: None,
            output_dir: PathBuf::from("gtreg-out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, CliError> {
        toml::from_str(s).map_err(|e| CliError::Config(format!("invalid configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// All candidate specifications, presets expanded, in order.
    pub fn candidate_specs(&self) -> Result<Vec<DictionarySpec>, CliError> {
        let mut out = Vec::new();
        for c in &self.candidates {
            out.extend(c.expand()?);
        }
        if out.is_empty() {
            out.push(DictionarySpec::linear_linear());
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.data.path.is_none() {
            return Err(CliError::Config("no data file given".into()));
        }
        if let Some(cov) = &self.data.covariates {
            if cov.iter().any(|c| c == self.data.outcome()) {
                return Err(CliError::Config(format!(
                    "covariate list contains the outcome column `{}`{}",
                    self.data.outcome(),
                    if self.data.lag { "; lag mode adds its lag automatically" } else { "" }
                )));
            }
        }
        if let Some(l) = &self.lambdas {
            if l.is_empty() || l.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(CliError::Config("lambdas must be a nonempty list of positive numbers".into()));
            }
        }
        if let Some(u) = &self.grids.qgm_u {
            if u.is_empty() || u.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
                return Err(CliError::Config("qgm_u levels must lie in (0, 1)".into()));
            }
        }
        if !(self.grids.band_level > 0.0 && self.grids.band_level < 1.0) {
            return Err(CliError::Config("band_level must lie in (0, 1)".into()));
        }
        if self.grids.qgm_x_points == 0 {
            return Err(CliError::Config("qgm_x_points must be positive".into()));
        }
        self.solver.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }
}

/// The 50-specification search over the four dictionary classes:
/// linear-linear; cubic `W` with `K ∈ 6..=14`; quadratic `S` with
/// `J ∈ {5, 6}` and cubic `S` with `J ∈ {6, 7}`; and every spline-spline
/// combination of the two.
pub fn standard_candidate_set() -> Vec<DictionarySpec> {
    let ys = [(5, 2), (6, 2), (6, 3), (7, 3)];
    let mut out = vec![DictionarySpec::linear_linear()];
    out.extend((6..=14).map(DictionarySpec::spline_x));
    out.extend(ys.iter().map(|&(j, q)| DictionarySpec::spline_y(j, q)));
    for k in 6..=14 {
        for &(j, q) in &ys {
            out.push(DictionarySpec::spline_spline(k, j, q));
        }
    }
    out
}

/// Parses `linear-linear`, `spline-linear:K`, `linear-spline:J,q`,
/// `spline-spline:K,J,q` or `standard-set`.
pub fn parse_preset(s: &str) -> Result<Vec<DictionarySpec>, CliError> {
    let bad = || CliError::Config(format!("unrecognized candidate `{s}`"));
    let (name, args) = match s.split_once(':') {
        Some((n, a)) => (n.trim(), a.trim()),
        None => (s.trim(), ""),
    };
    let nums: Vec<usize> = if args.is_empty() {
        Vec::new()
    } else {
        args.split(',').map(|t| t.trim().parse::<usize>().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    let spec = match (name, nums.as_slice()) {
        ("standard-set", []) => return Ok(standard_candidate_set()),
        ("linear-linear", []) => DictionarySpec::linear_linear(),
        ("spline-linear", [k]) if *k >= 3 => DictionarySpec::spline_x(*k),
        ("linear-spline", [j, q]) if *j >= 3 && *q >= 1 => DictionarySpec::spline_y(*j, *q),
        ("spline-spline", [k, j, q]) if *k >= 3 && *j >= 3 && *q >= 1 => DictionarySpec::spline_spline(*k, *j, *q),
        _ => return Err(bad()),
    };
    Ok(vec![spec])
}
