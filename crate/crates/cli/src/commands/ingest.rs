//! Reads a column of returns and reports the lab estimates.

use serde::{Deserialize, Serialize};

use uamark::gauss1d::{estimate_with, VarianceConvention};

use crate::error::CliError;
use crate::output::{num, Output, Table};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    /// CSV file with one return per row. Lines starting with `#` are skipped.
    pub input: String,
    /// Zero-based column holding the returns.
    pub column: usize,
    pub header: bool,
}

/// Parses the configured column; errors carry the 1-based line number.
pub fn read_returns(cfg: &IngestConfig) -> Result<Vec<f64>, CliError> {
    if cfg.input.is_empty() {
        return Err(CliError::Config("input: missing path to the returns file".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(cfg.header)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(&cfg.input)
        .map_err(|e| CliError::Config(format!("input: {}: {e}", cfg.input)))?;
    let mut returns = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", cfg.input)))?;
        let line = rec.position().map_or(0, |p| p.line());
        let cell = rec
            .get(cfg.column)
            .ok_or_else(|| CliError::Config(format!("{}:{line}: no column {}", cfg.input, cfg.column)))?;
        let v: f64 = cell
            .parse()
            .map_err(|_| CliError::Config(format!("{}:{line}: `{cell}` is not a number", cfg.input)))?;
        if !v.is_finite() {
            return Err(CliError::Config(format!("{}:{line}: `{cell}` is not finite", cfg.input)));
        }
        returns.push(v);
    }
    if returns.is_empty() {
        return Err(CliError::Config(format!("{}: no returns found", cfg.input)));
    }
    Ok(returns)
}

pub fn ingest(cfg: &mut IngestConfig, out: &mut Output) -> Result<(), CliError> {
    let returns = read_returns(cfg)?;
    let unc = estimate_with(&returns, VarianceConvention::Uncentered)?;
    let cen = estimate_with(&returns, VarianceConvention::Centered)?;
    let mut t = Table::new(&["n_obs", "mu_hat", "sigma2_uncentered", "sigma2_centered"]);
    t.push(vec![returns.len().to_string(), num(unc.mu_hat), num(unc.sigma2_hat), num(cen.sigma2_hat)]);
    out.csv("ingest.csv", &t)?;
    let mut r = Table::new(&["index", "return"]);
    for (i, v) in returns.iter().enumerate() {
        r.push(vec![i.to_string(), num(*v)]);
    }
    out.csv("returns.csv", &r)?;
    Ok(())
}
