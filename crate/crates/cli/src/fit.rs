//! Least-squares scaling fits of a measured statistic against `(log x)^3` or
//! `x^(1/3)`.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{CliError, Result};

pub const MIN_DISTINCT_X: usize = 4;

/// R² below which a positive slope is still reported as no scaling.
const MIN_R2: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// `y ~ c (ln x)^3`.
    LogCubed,
    /// `y ~ c x^(1/3)`.
    CubeRoot,
}

impl Model {
    pub fn feature(self, x: f64) -> f64 {
        match self {
            Model::LogCubed => x.ln().powi(3),
            Model::CubeRoot => x.cbrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: Model,
    pub points: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub predicted_constant: Option<f64>,
    pub ratio_to_predicted: Option<f64>,
    pub no_scaling: bool,
}

/// Ordinary least squares of `y` on `model.feature(x)`.
pub fn fit_scaling(xs: &[f64], ys: &[f64], model: Model, predicted: Option<f64>) -> Result<FitReport> {
    if xs.len() != ys.len() {
        return Err(CliError::Invalid(format!("{} abscissae but {} ordinates", xs.len(), ys.len())));
    }
    let mut distinct: Vec<f64> = xs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < MIN_DISTINCT_X {
        return Err(CliError::TooFewPoints { got: distinct.len(), required: MIN_DISTINCT_X });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) || xs.iter().any(|&x| x <= 0.0) {
        return Err(CliError::Invalid("abscissae must be positive and all values finite".into()));
    }
    let u: Vec<f64> = xs.iter().map(|&x| model.feature(x)).collect();
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let suu: f64 = u.iter().map(|a| (a - mu).powi(2)).sum();
    let suy: f64 = u.iter().zip(ys).map(|(a, b)| (a - mu) * (b - my)).sum();
    let syy: f64 = ys.iter().map(|b| (b - my).powi(2)).sum();
    let slope = suy / suu;
    let intercept = my - slope * mu;
    let sse: f64 = u.iter().zip(ys).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    // Relative test: a constant series can leave rounding noise in syy.
    let flat = syy <= 1e-24 * ys.iter().map(|y| y * y).sum::<f64>().max(f64::MIN_POSITIVE);
    let r2 = if flat { 0.0 } else { (1.0 - sse / syy).max(0.0) };
    let no_scaling = flat || slope <= 0.0 || r2 < MIN_R2;
    Ok(FitReport {
        model,
        points: xs.len(),
        slope,
        intercept,
        r2,
        predicted_constant: predicted,
        ratio_to_predicted: predicted.map(|c| slope / c),
        no_scaling,
    })
}

/// Reads two numeric columns from a CSV with a header row. Rows with an
/// empty cell in either column are skipped.
pub fn read_columns(path: &Path, x: &str, y: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| CliError::MissingColumn(name.into()));
    let (ix, iy) = (col(x)?, col(y)?);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let (a, b) = (rec.get(ix).unwrap_or(""), rec.get(iy).unwrap_or(""));
        if a.is_empty() || b.is_empty() {
            continue;
        }
        let parse = |s: &str, name: &str| {
            s.parse::<f64>()
                .map_err(|_| CliError::Invalid(format!("row {}: column `{name}` is not a number: `{s}`", line + 2)))
        };
        xs.push(parse(a, x)?);
        ys.push(parse(b, y)?);
    }
    Ok((xs, ys))
}
