use serde::{Deserialize, Serialize};

use super::linalg::Qr;
use super::tdist::two_sided_p_value;
use crate::error::{Error, Result};

/// Relative size of `|R_kk|` below which a column counts as a linear
/// combination of the columns before it.
const COLLINEAR_TOL: f64 = 1e-10;

/// Named feature columns of a regression problem. The intercept is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Design {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Design> {
        if names.len() != columns.len() {
            return Err(Error::Contract(format!(
                "{} feature names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if let Some(first) = columns.first() {
            if columns.iter().any(|c| c.len() != first.len()) {
                return Err(Error::Contract("feature columns differ in length".into()));
            }
        }
        Ok(Design { names, columns })
    }

    /// Build from row-major observations.
    pub fn from_rows<S: AsRef<str>>(names: &[S], rows: &[Vec<f64>]) -> Result<Design> {
        let p = names.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::Contract(format!(
                "row {bad} has {} values, expected {p}",
                rows[bad].len()
            )));
        }
        let columns = (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Design::new(names.iter().map(|s| s.as_ref().to_owned()).collect(), columns)
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Keep only the named features, in the order given.
    pub fn select(&self, keep: &[String]) -> Result<Design> {
        let mut columns = Vec::with_capacity(keep.len());
        for name in keep {
            let j = self
                .names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Contract(format!("no feature named `{name}`")))?;
            columns.push(self.columns[j].clone());
        }
        Design::new(keep.to_vec(), columns)
    }

    pub fn take_rows(&self, rows: &[usize]) -> Design {
        Design {
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
        }
    }
}

/// A fitted linear model with inference and fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub feature_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub stderrs: Vec<f64>,
    pub p_values: Vec<f64>,
    pub intercept_stderr: f64,
    pub intercept_p_value: f64,
    pub rmse_ms: f64,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub n_samples: usize,
    /// Zero-variance columns dropped before fitting.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped: Vec<String>,
    /// Features removed by backward elimination, in removal order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eliminated: Vec<String>,
}

impl LinearFit {
    /// Model with known coefficients and no fit statistics.
    pub fn fixed(names: &[&str], coefficients: &[f64], intercept: f64) -> LinearFit {
        let p = names.len();
        LinearFit {
            feature_names: names.iter().map(|s| s.to_string()).collect(),
            coefficients: coefficients.to_vec(),
            intercept,
            stderrs: vec![0.0; p],
            p_values: vec![0.0; p],
            intercept_stderr: 0.0,
            intercept_p_value: 0.0,
            rmse_ms: 0.0,
            r_squared: 1.0,
            adj_r_squared: 1.0,
            n_samples: 0,
            dropped: Vec::new(),
            eliminated: Vec::new(),
        }
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .map(|j| self.coefficients[j])
    }

    /// Evaluate on a row whose values are labelled by `names`; features the
    /// model does not use are ignored.
    pub fn predict_named(&self, names: &[String], values: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for (name, coef) in self.feature_names.iter().zip(&self.coefficients) {
            let j = names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Contract(format!("row lacks model feature `{name}`")))?;
            acc += coef * values[j];
        }
        Ok(acc + self.intercept)
    }
}

fn is_constant(col: &[f64]) -> bool {
    col.iter().all(|&v| v == col[0])
}

/// Ordinary least squares with an intercept. Zero-variance columns are
/// dropped (and listed in `dropped`); any remaining linear dependence is a
/// [`Error::SingularDesign`].
pub fn ols_fit(design: &Design, targets: &[f64]) -> Result<LinearFit> {
    let n = targets.len();
    if design.columns.iter().any(|c| c.len() != n) {
        return Err(Error::Contract(format!(
            "design has {} rows per column, {n} targets",
            design.columns.first().map_or(0, Vec::len)
        )));
    }

    let mut names = Vec::new();
    let mut columns = Vec::new();
    let mut dropped = Vec::new();
    for (name, col) in design.names.iter().zip(&design.columns) {
        if n > 0 && is_constant(col) {
            log::debug!("feature `{name}` has zero variance; dropped");
            dropped.push(name.clone());
        } else {
            names.push(name.clone());
            columns.push(col.clone());
        }
    }
    let p = names.len();
    if n <= p + 1 {
        return Err(Error::InsufficientData { needed: p + 2, got: n });
    }

    let mut cols = Vec::with_capacity(p + 1);
    cols.push(vec![1.0; n]);
    cols.extend(columns.iter().cloned());
    let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let qr = Qr::new(cols);
    let collinear: Vec<String> = qr
        .rdiag_abs()
        .iter()
        .zip(&norms)
        .enumerate()
        .skip(1)
        .filter(|(_, (r, norm))| **r <= COLLINEAR_TOL * **norm)
        .map(|(k, _)| names[k - 1].clone())
        .collect();
    if !collinear.is_empty() {
        return Err(Error::SingularDesign { columns: collinear });
    }

    let beta = qr.solve(targets);
    let fitted: Vec<f64> = (0..n)
        .map(|i| beta[0] + (0..p).map(|j| beta[j + 1] * columns[j][i]).sum::<f64>())
        .collect();
    let sse: f64 = targets.iter().zip(&fitted).map(|(y, f)| (y - f).powi(2)).sum();
    let mean = targets.iter().sum::<f64>() / n as f64;
    let sst: f64 = targets.iter().map(|y| (y - mean).powi(2)).sum();

    let df = (n - p - 1) as f64;
    let sigma2 = sse / df;
    let inv = qr.normal_inverse();
    let se: Vec<f64> = (0..=p).map(|k| (sigma2 * inv[k][k]).max(0.0).sqrt()).collect();
    let p_value = |coef: f64, se: f64| {
        if se == 0.0 {
            if coef == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            two_sided_p_value(coef / se, df)
        }
    };

    let r_squared = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / df;

    Ok(LinearFit {
        coefficients: beta[1..].to_vec(),
        intercept: beta[0],
        stderrs: se[1..].to_vec(),
        p_values: (1..=p).map(|k| p_value(beta[k], se[k])).collect(),
        intercept_stderr: se[0],
        intercept_p_value: p_value(beta[0], se[0]),
        rmse_ms: (sse / n as f64).sqrt(),
        r_squared,
        adj_r_squared,
        n_samples: n,
        feature_names: names,
        dropped,
        eliminated: Vec::new(),
    })
}

/// Repeatedly drop the least significant feature (largest p-value above
/// `alpha`, ties to the earliest declared) and refit, until every remaining
/// feature has `p <= alpha` or only the intercept is left.
pub fn backward_eliminate(design: &Design, targets: &[f64], alpha: f64) -> Result<LinearFit> {
    let mut active = design.names.clone();
    let mut eliminated = Vec::new();
    loop {
        let mut fit = ols_fit(&design.select(&active)?, targets)?;
        let worst = fit
            .p_values
            .iter()
            .enumerate()
            .fold(None::<(usize, f64)>, |best, (j, &p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((j, p)),
            });
        match worst {
            Some((j, p)) if p > alpha => {
                let name = fit.feature_names[j].clone();
                log::debug!("eliminating `{name}` (p = {p:.4})");
                active.retain(|n| *n != name);
                eliminated.push(name);
            }
            _ => {
                // Constant columns dropped inside ols_fit stay out of later rounds too.
                fit.dropped = design
                    .names
                    .iter()
                    .filter(|n| !fit.feature_names.contains(n) && !eliminated.contains(n))
                    .cloned()
                    .collect();
                fit.eliminated = eliminated;
                return Ok(fit);
            }
        }
    }
}
