//! Batch front end: `fit`, `select`, `eval`, `diagnose` and `simulate`.
//!
//! Settings come from an optional TOML file ([`RunConfig`]) and flags, with
//! flags taking precedence. Reports are pretty-printed JSON with a `schema`
//! field; band grids and simulated data are CSV.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error,
//! 4 non-convergence, 5 QGM failure after the allowed repairs.

mod commands;
pub mod config;
pub mod data;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::error::GtrError;

pub use commands::{cmd_diagnose, cmd_eval, cmd_fit, cmd_select, cmd_simulate, EvalRequest, SimulateRequest};
pub use config::{parse_preset, standard_candidate_set, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    /// A stored report that cannot be used (unreadable, wrong schema, inconsistent).
    #[error("{0}")]
    Artifact(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] GtrError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Artifact(_) => 2,
            CliError::Data(_) => 3,
            CliError::Io(_) => 1,
            CliError::Model(e) => match e {
                GtrError::InvalidSpec(_)
                | GtrError::InvalidKnots(_)
                | GtrError::InvalidArgument(_)
                | GtrError::MissingCovariance
                | GtrError::LevelUnattainable { .. } => 2,
                GtrError::EmptyData | GtrError::NonFiniteData { .. } | GtrError::DimensionMismatch { .. } => 3,
                GtrError::FirstStepNotConverged => 4,
                GtrError::NoAdmissibleLambda(_) => 5,
                _ => 1,
            },
        }
    }
}

/// How a command that produced its outputs ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    NotConverged,
    QgmFailed,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::NotConverged => 4,
            Status::QgmFailed => 5,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "gtreg", version, about = "Gaussian-transform distributional regression")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Maximum-likelihood fit of one dictionary, with QGM repair, inference and certificates.
    Fit(RunArgs),
    /// Adaptive-Lasso paths over candidate dictionaries, QGM screening and BIC ranking.
    Select(RunArgs),
    /// CDF, PDF or quantile grids with pointwise bands from a stored fit.
    Eval(EvalArgs),
    /// Stein moments, information-matrix gap, duality certificate and QGM report of a stored fit.
    Diagnose(DiagnoseArgs),
    /// Writes a simulated sample as CSV.
    Simulate(SimulateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fit(_) => "fit",
            Command::Select(_) => "select",
            Command::Eval(_) => "eval",
            Command::Diagnose(_) => "diagnose",
            Command::Simulate(_) => "simulate",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV data file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub outcome: Option<String>,
    /// Comma-separated covariate columns.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    /// Build `(y_t, y_{t−1})` pairs from the outcome column.
    #[arg(long)]
    pub lag: bool,
    /// Dictionary preset, repeatable: linear-linear, spline-linear:K,
    /// linear-spline:J,q, spline-spline:K,J,q or standard-set.
    #[arg(long = "candidate")]
    pub candidates: Vec<String>,
    /// Comma-separated penalty grid.
    #[arg(long = "lambda", value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    /// Skip constraint-based QGM repair.
    #[arg(long)]
    pub no_repair: bool,
    #[arg(long)]
    pub repair_rounds: Option<usize>,
    #[arg(long)]
    pub qgm_x_points: Option<usize>,
    #[arg(long)]
    pub band_level: Option<f64>,
}

impl RunArgs {
    /// Config file (if any) with flags applied on top.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.data {
            cfg.data.path = Some(v.clone());
        }
        if let Some(v) = &self.outcome {
            cfg.data.outcome = Some(v.clone());
        }
        if let Some(v) = &self.covariates {
            cfg.data.covariates = Some(v.clone());
        }
        if self.lag {
            cfg.data.lag = true;
        }
        if !self.candidates.is_empty() {
            cfg.candidates = self.candidates.iter().cloned().map(config::CandidateConfig::Preset).collect();
        }
        if let Some(v) = &self.lambdas {
            cfg.lambdas = Some(v.clone());
        }
        if let Some(v) = &self.out {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.max_iter {
            cfg.solver.max_iter = v;
        }
        if let Some(v) = self.grad_tol {
            cfg.solver.grad_tol = v;
        }
        if self.no_repair {
            cfg.repair.enabled = false;
        }
        if let Some(v) = self.repair_rounds {
            cfg.repair.max_rounds = v;
        }
        if let Some(v) = self.qgm_x_points {
            cfg.grids.qgm_x_points = v;
        }
        if let Some(v) = self.band_level {
            cfg.grids.band_level = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Cdf,
    Pdf,
    Quantile,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Stored fit report (fit.json).
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Covariate point in raw units, comma-separated for several covariates; repeatable.
    #[arg(long = "x", allow_hyphen_values = true)]
    pub x: Vec<String>,
    /// Comma-separated grid of levels (quantile) or outcome values (cdf, pdf).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub grid: Option<Vec<f64>>,
    /// Number of outcome points for cdf/pdf grids when --grid is absent.
    #[arg(long, default_value_t = 101)]
    pub grid_points: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value = "gtreg-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub fit: PathBuf,
    /// Data file, when it has moved since the fit.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Dictionary preset for the Stein probe; the fitted dictionary by default.
    #[arg(long)]
    pub probe: Option<String>,
    #[arg(long, default_value_t = 201)]
    pub qgm_x_points: usize,
    #[arg(long, default_value = "gtreg-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DgpArg {
    BaselineGaussian,
    LinearLocationScale,
    BimodalMisspec,
    MelbourneLike,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub kind: Option<DgpArg>,
    /// TOML data-generating specification (a `kind` key plus its parameters).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Sample size (series length for melbourne-like).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of covariates for baseline-gaussian.
    #[arg(long)]
    pub covariates: Option<usize>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: &Cli) -> Result<Status, CliError> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(&a.resolve()?),
        Command::Select(a) => cmd_select(&a.resolve()?),
        Command::Eval(a) => cmd_eval(&EvalRequest::from_args(a)?),
        Command::Diagnose(a) => cmd_diagnose(&a.fit, a.data.as_deref(), a.probe.as_deref(), a.qgm_x_points, &a.out),
        Command::Simulate(a) => cmd_simulate(&SimulateRequest::from_args(a)?),
    }
}
