//! CSV ingestion: header row, `.` decimals, no missing cells.

use std::io::Read;
use std::path::Path;

use super::config::DataConfig;
use super::CliError;
use crate::dictionary::Sample;

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub sample: Sample,
    /// Outcome name followed by covariate names.
    pub names: Vec<String>,
    /// Things that did not stop ingestion but may surprise the user.
    pub warnings: Vec<String>,
}

pub fn load_sample(cfg: &DataConfig) -> Result<Ingested, CliError> {
    let path = cfg.path.as_deref().ok_or_else(|| CliError::Config("no data file given".into()))?;
    let file = std::fs::File::open(path).map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    read_sample(file, cfg, path)
}

/// Reads from any reader; `origin` only labels messages.
pub fn read_sample<R: Read>(input: R, cfg: &DataConfig, origin: &Path) -> Result<Ingested, CliError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
    let data_err = |msg: String| CliError::Data(format!("{}: {msg}", origin.display()));
    let header: Vec<String> =
        rdr.headers().map_err(|e| data_err(format!("unreadable header: {e}")))?.iter().map(str::to_string).collect();
    let mut warnings = Vec::new();

    let col = |name: &str| -> Result<usize, CliError> {
        let hits: Vec<usize> = header.iter().enumerate().filter(|(_, h)| *h == name).map(|(i, _)| i).collect();
        match hits.as_slice() {
            [i] => Ok(*i),
            [] => Err(CliError::Config(format!("column `{name}` not found in {} (columns: {})", origin.display(), header.join(", ")))),
            _ => Err(CliError::Config(format!("column `{name}` appears more than once in {}", origin.display()))),
        }
    };
    let outcome = cfg.outcome();
    let y_col = col(outcome)?;
    let cov_names: Vec<String> = match &cfg.covariates {
        Some(c) => c.clone(),
        None if cfg.lag => Vec::new(),
        None => header.iter().filter(|h| *h != outcome).cloned().collect(),
    };
    let cov_cols: Vec<usize> = cov_names.iter().map(|c| col(c)).collect::<Result<_, _>>()?;
    let unused: Vec<&String> =
        header.iter().enumerate().filter(|(i, _)| *i != y_col && !cov_cols.contains(i)).map(|(_, h)| h).collect();
    if !unused.is_empty() {
        warnings.push(format!("ignoring columns: {}", unused.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")));
    }

    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut missing = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| data_err(format!("malformed record: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        let cell = |c: usize| -> Result<Option<f64>, CliError> {
            let raw = rec.get(c).unwrap_or("");
            if raw.is_empty() {
                return Ok(None);
            }
            let v: f64 = raw
                .parse()
                .map_err(|_| data_err(format!("line {line}, column `{}`: `{raw}` is not a number", header[c])))?;
            if !v.is_finite() {
                return Err(data_err(format!("line {line}, column `{}`: non-finite value", header[c])));
            }
            Ok(Some(v))
        };
        let yv = cell(y_col)?;
        let xv: Vec<Option<f64>> = cov_cols.iter().map(|&c| cell(c)).collect::<Result<_, _>>()?;
        match (yv, xv.iter().copied().collect::<Option<Vec<f64>>>()) {
            (Some(a), Some(b)) => {
                y.push(a);
                x.push(b);
            }
            _ => missing.push(line),
        }
    }
    if !missing.is_empty() {
        let shown: Vec<String> = missing.iter().take(20).map(u64::to_string).collect();
        let more = if missing.len() > 20 { format!(" and {} more", missing.len() - 20) } else { String::new() };
        return Err(data_err(format!("missing values on lines {}{more}", shown.join(", "))));
    }
    if y.is_empty() {
        return Err(data_err("no data rows".into()));
    }

    let mut names = vec![outcome.to_string()];
    if cfg.lag {
        if y.len() < 2 {
            return Err(data_err("lag mode needs at least two rows".into()));
        }
        let lagged: Vec<Vec<f64>> = (1..y.len())
            .map(|t| std::iter::once(y[t - 1]).chain(x[t].iter().copied()).collect())
            .collect();
        y.remove(0);
        x = lagged;
        names.push(format!("{outcome}_lag1"));
    }
    names.extend(cov_names);
    let sample = Sample::new(y, x).map_err(|e| data_err(e.to_string()))?;
    Ok(Ingested { sample, names, warnings })
}
