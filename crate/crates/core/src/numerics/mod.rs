//! Special functions, optimization and small linear-algebra helpers.

pub mod bessel;
pub mod optimize;

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Cholesky with jitter escalation: tries `m + jitter I`, multiplying the
/// jitter by 10 up to three attempts before giving up.
pub fn cholesky_with_jitter(m: &DMatrix<f64>, jitter: f64) -> Result<Cholesky<f64, Dyn>> {
    let mut j = jitter.max(0.0);
    for attempt in 0..3 {
        let mut trial = m.clone();
        if j > 0.0 {
            for i in 0..trial.nrows() {
                trial[(i, i)] += j;
            }
        }
        if let Some(chol) = trial.cholesky() {
            return Ok(chol);
        }
        j = if j == 0.0 && attempt == 0 { 1e-10 } else { j * 10.0 };
    }
    Err(Error::NotPositiveDefinite)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal distribution function via the complementary error function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}
