//! Prediction scores for Gaussian forecasts: MSPE, MAE, CRPS and the
//! logarithmic score.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{normal_cdf, normal_pdf};

/// Mean squared prediction error.
pub fn mspe(preds: &[f64], truths: &[f64]) -> Result<f64> {
    check(preds, truths)?;
    Ok(preds
        .iter()
        .zip(truths)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / preds.len() as f64)
}

/// Mean absolute error.
pub fn mae(preds: &[f64], truths: &[f64]) -> Result<f64> {
    check(preds, truths)?;
    Ok(preds
        .iter()
        .zip(truths)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / preds.len() as f64)
}

fn check(preds: &[f64], truths: &[f64]) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::EmptyInput("no predictions to score".into()));
    }
    if preds.len() != truths.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions vs {} truths",
            preds.len(),
            truths.len()
        )));
    }
    Ok(())
}

/// CRPS of a Gaussian forecast, closed form
/// `sd [z (2 Phi(z) - 1) + 2 phi(z) - 1/sqrt(pi)]` with `z = (y - mean)/sd`.
/// A degenerate forecast (`sd <= 0`) scores as the point-mass CRPS `|y - mean|`.
pub fn crps_gaussian(mean: f64, sd: f64, truth: f64) -> f64 {
    if sd <= 0.0 {
        return (truth - mean).abs();
    }
    let z = (truth - mean) / sd;
    sd * (z * (2.0 * normal_cdf(z) - 1.0) + 2.0 * normal_pdf(z)
        - 1.0 / std::f64::consts::PI.sqrt())
}

/// Logarithmic score `-log N(y; mean, sd^2)`.
pub fn logs_gaussian(mean: f64, sd: f64, truth: f64) -> Result<f64> {
    if sd <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "logarithmic score needs sd > 0, got {sd}"
        )));
    }
    let z = (truth - mean) / sd;
    Ok(0.5 * (2.0 * std::f64::consts::PI * sd * sd).ln() + 0.5 * z * z)
}

/// The four scores over a test set (CRPS and LogS averaged sitewise).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub mspe: f64,
    pub mae: f64,
    pub crps: f64,
    pub logs: f64,
    pub n_test: usize,
}

pub fn score_report(means: &[f64], sds: &[f64], truths: &[f64]) -> Result<ScoreReport> {
    check(means, truths)?;
    if sds.len() != means.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} means vs {} sds",
            means.len(),
            sds.len()
        )));
    }
    let n = means.len();
    let crps = (0..n)
        .map(|i| crps_gaussian(means[i], sds[i], truths[i]))
        .sum::<f64>()
        / n as f64;
    let logs = (0..n)
        .map(|i| logs_gaussian(means[i], sds[i], truths[i]))
        .collect::<Result<Vec<_>>>()?
        .iter()
        .sum::<f64>()
        / n as f64;
    Ok(ScoreReport {
        mspe: mspe(means, truths)?,
        mae: mae(means, truths)?,
        crps,
        logs,
        n_test: n,
    })
}
