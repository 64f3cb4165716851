//! Versioned JSON reports and the per-run output directory.
//!
//! Every report carries a `schema` tag. A fit report is also the stored
//! artifact read back by `eval` and `diagnose`: it holds the resolved
//! dictionary, the standardized coefficients and their covariance, and
//! where the data came from.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::dictionary::{Dictionary, ResolvedDictionary};
use crate::drf::{QgmReport, QgmViolation};
use crate::duality::{DualCertificate, LassoKktReport};
use crate::inference::{SandwichKind, SteinReport};
use crate::solver::{PathEntry, SlopeConstraint};

pub const FIT_SCHEMA: &str = "gtreg.fit.v1";
pub const SELECT_SCHEMA: &str = "gtreg.select.v1";
pub const DIAGNOSE_SCHEMA: &str = "gtreg.diagnose.v1";
pub const B0_SCHEMA: &str = "gtreg.b0.v1";

/// Relative tolerance of the raw/standardized coefficient check.
const RAW_MAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSource {
    pub path: PathBuf,
    pub outcome: String,
    pub covariates: Vec<String>,
    pub lag: bool,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    MaximumLikelihood,
    AdaptiveLasso,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub converged: bool,
    /// `‖∇Q_n‖_∞` for ML fits, the proximal KKT residual for penalized ones.
    pub score_norm: f64,
    pub iterations: usize,
    /// `Q_n` per observation, standardized outcome units.
    pub value: f64,
    /// Log-likelihood in raw outcome units.
    pub loglik_raw: f64,
    /// Condition number of `TᵀT/n`; very large values point at a near-singular design.
    pub gram_condition: Option<f64>,
    pub gradient_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualitySummary {
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub constraint_residual: f64,
}

impl From<&DualCertificate> for DualitySummary {
    fn from(c: &DualCertificate) -> Self {
        Self {
            primal_value: c.primal_value,
            dual_value: c.dual_value,
            gap: c.gap,
            constraint_residual: c.constraint_residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QgmSummary {
    pub passed: bool,
    pub num_violations: usize,
    pub x_points: usize,
    pub u_points: usize,
    /// The first few violations.
    pub examples: Vec<QgmViolation>,
}

impl From<&QgmReport> for QgmSummary {
    fn from(r: &QgmReport) -> Self {
        Self {
            passed: r.passed,
            num_violations: r.violations.len(),
            x_points: r.x_points,
            u_points: r.u_points,
            examples: r.violations.iter().take(10).cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySummary {
    pub lambda: f64,
    pub active_set: Vec<usize>,
    pub bic: f64,
    pub kkt: LassoKktReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSummary {
    pub kind: SandwichKind,
    pub pseudo_inverse: bool,
    /// Row-major, standardized coordinates.
    pub cov_std: Vec<Vec<f64>>,
    pub se_std: Vec<f64>,
    pub se_raw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub info_matrix_gap: f64,
    pub stein: SteinReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema: String,
    pub label: String,
    pub estimator: Estimator,
    pub dictionary: ResolvedDictionary,
    pub data: DataSource,
    pub b_std: Vec<f64>,
    /// `Aᵀ b_std` with `A` the raw map of the dictionary.
    pub b_raw: Vec<f64>,
    pub covariance: Option<CovarianceSummary>,
    pub convergence: Convergence,
    pub constraints: Vec<SlopeConstraint>,
    pub repair_rounds: usize,
    pub qgm: Option<QgmSummary>,
    pub penalty: Option<PenaltySummary>,
    pub path: Option<Vec<PathEntry>>,
    pub duality: DualitySummary,
    pub diagnostics: Option<Diagnostics>,
    pub seed: u64,
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Artifact("covariance matrix is not square".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl FitReport {
    pub fn dictionary(&self) -> Result<Dictionary, CliError> {
        Dictionary::from_resolved(self.dictionary.clone()).map_err(|e| CliError::Artifact(format!("stored dictionary: {e}")))
    }

    pub fn b_std(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.b_std)
    }

    pub fn cov_std(&self) -> Result<Option<DMatrix<f64>>, CliError> {
        self.covariance.as_ref().map(|c| from_rows(&c.cov_std)).transpose()
    }

    /// Schema tag, dimensions, and the raw/standardized coefficient map.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema != FIT_SCHEMA {
            return Err(CliError::Artifact(format!("schema `{}` does not match `{FIT_SCHEMA}`", self.schema)));
        }
        let dict = self.dictionary()?;
        let jk = dict.jk();
        if self.b_std.len() != jk || self.b_raw.len() != jk {
            return Err(CliError::Artifact(format!("expected {jk} coefficients")));
        }
        let raw = dict.to_raw_coefficients(&self.b_std());
        let scale = 1.0 + raw.amax();
        if let Some((l, (a, b))) =
            raw.iter().zip(&self.b_raw).enumerate().find(|(_, (a, b))| (*a - *b).abs() > RAW_MAP_TOL * scale)
        {
            return Err(CliError::Artifact(format!("raw coefficient {l} is {b}, the raw map gives {a}")));
        }
        if let Some(c) = &self.covariance {
            if c.cov_std.len() != jk {
                return Err(CliError::Artifact(format!("covariance must be {jk}×{jk}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFit {
    pub spec_index: usize,
    pub label: String,
    pub lambda: f64,
    pub bic: f64,
    pub num_params: usize,
    pub num_active: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectReport {
    pub schema: String,
    pub data: DataSource,
    pub lambdas: Vec<f64>,
    /// QGM-passing per-candidate winners by BIC; ties keep candidate order.
    pub ranking: Vec<RankedFit>,
    pub candidates: Vec<crate::solver::CandidateReport>,
    /// Per-candidate fit artifacts, relative to the run directory.
    pub artifacts: Vec<Option<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseReport {
    pub schema: String,
    pub fit: String,
    pub duality: DualitySummary,
    pub score_norm: f64,
    pub info_matrix_gap: f64,
    pub stein: SteinReport,
    /// Components with `|z| > 3`.
    pub flagged: Vec<usize>,
    pub qgm: QgmSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct B0Sidecar {
    pub schema: String,
    pub dgp: crate::simulate::DgpSpec,
    /// Dictionary the coefficients refer to (raw units, unstandardized).
    pub dictionary: crate::dictionary::DictionarySpec,
    pub b0: Vec<f64>,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Artifact(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Artifact(format!("{}: {e}", path.display())))
}

pub fn load_fit(path: &Path) -> Result<FitReport, CliError> {
    #[derive(Deserialize)]
    struct Tag {
        schema: String,
    }
    let tag: Tag = read_json(path)?;
    if tag.schema != FIT_SCHEMA {
        return Err(CliError::Artifact(format!(
            "{}: schema `{}` does not match `{FIT_SCHEMA}`",
            path.display(),
            tag.schema
        )));
    }
    let r: FitReport = read_json(path)?;
    r.validate()?;
    Ok(r)
}

/// The only writer into a run directory.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::Io(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    pub fn write_csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let io = |e: csv::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}
