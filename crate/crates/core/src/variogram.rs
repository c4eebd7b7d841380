//! Isotropic Matérn(+nugget) variograms: evaluation, empirical estimation,
//! maximum-likelihood fitting, and the registration horizon `h_t`.
//!
//! The Matérn correlation is pinned as
//! `rho(h) = 2^{1-nu}/Gamma(nu) (h/alpha)^nu K_nu(h/alpha)`,
//! used consistently by fitting, kriging and the nonstationary simulations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::geometry::Location;
use crate::numerics::bessel::bessel_k;
use crate::numerics::cholesky_with_jitter;
use crate::numerics::optimize::NelderMead;

/// Matérn correlation at scaled distance `x = h / alpha`.
///
/// Half-integer smoothness uses the exponential-polynomial closed forms; any
/// other order goes through `K_nu`.
pub fn matern_correlation(x: f64, nu: f64) -> f64 {
    debug_assert!(x >= 0.0 && nu > 0.0);
    if x <= 0.0 {
        return 1.0;
    }
    if nu == 0.5 {
        return (-x).exp();
    }
    if nu == 1.5 {
        return (1.0 + x) * (-x).exp();
    }
    if nu == 2.5 {
        return (1.0 + x + x * x / 3.0) * (-x).exp();
    }
    matern_correlation_general(x, nu)
}

/// Bessel-path Matérn correlation, also used to validate the closed forms.
pub(crate) fn matern_correlation_general(x: f64, nu: f64) -> f64 {
    let v = 2.0f64.powf(1.0 - nu) / gamma(nu) * x.powf(nu) * bessel_k(nu, x);
    v.clamp(0.0, 1.0)
}

/// Isotropic Matérn variogram/covariance parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramModel {
    pub sigma2: f64,
    pub alpha: f64,
    pub nu: f64,
    pub nugget: f64,
}

impl VariogramModel {
    pub fn new(sigma2: f64, alpha: f64, nu: f64, nugget: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma2 must be > 0, got {sigma2}")));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be > 0, got {alpha}")));
        }
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidParameter(format!("nu must be > 0, got {nu}")));
        }
        if !(nugget >= 0.0) || !nugget.is_finite() {
            return Err(Error::InvalidParameter(format!("nugget must be >= 0, got {nugget}")));
        }
        Ok(Self { sigma2, alpha, nu, nugget })
    }

    /// Total sill `nugget + sigma2`.
    pub fn sill(&self) -> f64 {
        self.nugget + self.sigma2
    }

    /// Covariance `C(h)`: `sigma2 + nugget` at the origin, else
    /// `sigma2 * rho(h/alpha)`.
    pub fn covariance(&self, h: f64) -> f64 {
        debug_assert!(h >= 0.0);
        if h == 0.0 {
            self.sill()
        } else {
            self.sigma2 * matern_correlation(h / self.alpha, self.nu)
        }
    }

    /// Semivariance `gamma(h) = C(0) - C(h)`; zero at the origin by
    /// convention, jumping to the nugget for any `h > 0`.
    pub fn semivariance(&self, h: f64) -> f64 {
        debug_assert!(h >= 0.0);
        if h == 0.0 {
            0.0
        } else {
            self.nugget + self.sigma2 * (1.0 - matern_correlation(h / self.alpha, self.nu))
        }
    }

    /// Correlation `C(h)/C(0)` (1 at the origin).
    pub fn correlation(&self, h: f64) -> f64 {
        self.covariance(h) / self.sill()
    }
}

/// Matheron moment estimator binned by distance.
#[derive(Debug, Clone)]
pub struct EmpiricalVariogram {
    pub bin_centers: Vec<f64>,
    pub semivariances: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Binned empirical semivariances `1/(2 N_b) sum (x_i - x_j)^2` over pairs
/// whose distance falls in bin `b`. Empty bins keep count 0.
pub fn empirical_variogram(
    sites: &[Location],
    values: &[f64],
    n_bins: usize,
    max_dist: f64,
) -> Result<EmpiricalVariogram> {
    if sites.len() < 2 {
        return Err(Error::EmptyInput("need at least 2 sites".into()));
    }
    if sites.len() != values.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} sites vs {} values",
            sites.len(),
            values.len()
        )));
    }
    if !(max_dist > 0.0) || n_bins == 0 {
        return Err(Error::InvalidParameter(
            "need max_dist > 0 and n_bins >= 1".into(),
        ));
    }
    let width = max_dist / n_bins as f64;
    let mut sums = vec![0.0f64; n_bins];
    let mut counts = vec![0usize; n_bins];
    for i in 0..sites.len() {
        for j in (i + 1)..sites.len() {
            let d = sites[i].distance(&sites[j]);
            if d <= 0.0 || d > max_dist {
                continue;
            }
            let b = ((d / width) as usize).min(n_bins - 1);
            sums[b] += (values[i] - values[j]).powi(2);
            counts[b] += 1;
        }
    }
    let semivariances = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / (2.0 * c as f64) } else { 0.0 })
        .collect();
    let bin_centers = (0..n_bins).map(|b| (b as f64 + 0.5) * width).collect();
    Ok(EmpiricalVariogram {
        bin_centers,
        semivariances,
        counts,
    })
}

/// A function sampled on `m` equally spaced abscissae over `[0, h_t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    values: Vec<f64>,
    h_t: f64,
}

impl SampledFunction {
    pub fn new(values: Vec<f64>, h_t: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::GridTooCoarse {
                need: 2,
                got: values.len(),
            });
        }
        if !(h_t > 0.0) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "sampled function needs h_t > 0 and finite values".into(),
            ));
        }
        Ok(Self { values, h_t })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn h_t(&self) -> f64 {
        self.h_t
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Absissa of sample `j` (`0` maps to 0, `m-1` maps to `h_t`).
    pub fn abscissa(&self, j: usize) -> f64 {
        self.h_t * j as f64 / (self.values.len() - 1) as f64
    }

    /// Linear interpolation inside `[0, h_t]`, clamped at the ends.
    pub fn interpolate(&self, h: f64) -> f64 {
        let m = self.values.len();
        let t = (h / self.h_t) * (m - 1) as f64;
        if t <= 0.0 {
            return self.values[0];
        }
        if t >= (m - 1) as f64 {
            return self.values[m - 1];
        }
        let k = t as usize;
        let frac = t - k as f64;
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }
}

/// Evaluate a variogram on a uniform grid over `[0, h_t]`. The first sample
/// is the `h -> 0+` limit (the nugget) so the sampled curve represents the
/// function handed to registration after standardization.
pub fn sample_on_grid(model: &VariogramModel, h_t: f64, m: usize) -> Result<SampledFunction> {
    if m < 2 {
        return Err(Error::GridTooCoarse { need: 2, got: m });
    }
    if !(h_t > 0.0) {
        return Err(Error::InvalidParameter(format!("h_t must be > 0, got {h_t}")));
    }
    let mut values = Vec::with_capacity(m);
    values.push(model.nugget);
    for j in 1..m {
        values.push(model.semivariance(h_t * j as f64 / (m - 1) as f64));
    }
    SampledFunction::new(values, h_t)
}

/// Smallest distance at which every variogram is within `rel_tol` of its
/// sill, found by doubling and bisection on the monotone semivariance.
pub fn determine_ht(models: &[VariogramModel], rel_tol: f64) -> Result<f64> {
    if models.is_empty() {
        return Err(Error::EmptyInput("need at least one model".into()));
    }
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "rel_tol must be in (0, 1), got {rel_tol}"
        )));
    }
    let mut h_t = 0.0f64;
    for model in models {
        let target = (1.0 - rel_tol) * model.sill();
        if model.semivariance(model.alpha * 1e-9) >= target {
            // nugget already dominates; this model does not constrain h_t
            continue;
        }
        let mut hi = model.alpha;
        let mut guard = 0;
        while model.semivariance(hi) < target {
            hi *= 2.0;
            guard += 1;
            if guard > 200 {
                return Err(Error::DegenerateVariogram(
                    "semivariance never approaches its sill".into(),
                ));
            }
        }
        let mut lo = 0.0f64;
        while hi - lo > 1e-13 * hi {
            let mid = 0.5 * (lo + hi);
            if model.semivariance(mid) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        h_t = h_t.max(hi);
    }
    if h_t <= 0.0 {
        return Err(Error::DegenerateVariogram(
            "pure-nugget models admit no registration horizon".into(),
        ));
    }
    Ok(h_t)
}

/// Options for the maximum-likelihood fit.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Fix the smoothness instead of estimating it.
    pub fix_nu: Option<f64>,
    pub with_nugget: bool,
    /// Minimum number of sites accepted for a regional fit.
    pub min_sites: usize,
    pub multistarts: usize,
    pub max_iters: usize,
    /// Diagonal jitter added before every Cholesky.
    pub jitter: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            fix_nu: None,
            with_nugget: false,
            min_sites: 10,
            multistarts: 5,
            max_iters: 400,
            jitter: 1e-10,
        }
    }
}

/// A fitted model with the attained log-likelihood.
#[derive(Debug, Clone)]
pub struct FittedVariogram {
    pub model: VariogramModel,
    pub loglik: f64,
    pub converged: bool,
    pub n_evals: usize,
}

/// Zero-mean Gaussian log-likelihood of `values` under the model, using the
/// supplied distance matrix.
pub fn gaussian_loglik(
    dist: &DMatrix<f64>,
    values: &[f64],
    model: &VariogramModel,
    jitter: f64,
) -> Result<f64> {
    let n = values.len();
    if dist.nrows() != n || dist.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "distance matrix {}x{} vs {} values",
            dist.nrows(),
            dist.ncols(),
            n
        )));
    }
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        cov[(i, i)] = model.sill();
        for j in (i + 1)..n {
            let c = model.sigma2 * matern_correlation(dist[(i, j)] / model.alpha, model.nu);
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }
    let chol = cholesky_with_jitter(&cov, jitter)?;
    let ldet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let x = nalgebra::DVector::from_column_slice(values);
    let u = chol.l().solve_lower_triangular(&x).ok_or(Error::NotPositiveDefinite)?;
    let quad = u.norm_squared();
    Ok(-0.5 * (ldet + quad + n as f64 * (2.0 * std::f64::consts::PI).ln()))
}

/// Distances grouped by value so each likelihood evaluation computes one
/// correlation per distinct distance (regular grids repeat distances
/// heavily). Values within 1e-9 relative share a representative.
struct DistanceGroups {
    unique: Vec<f64>,
    index: Vec<u32>,
    n: usize,
}

impl DistanceGroups {
    fn build(dist: &DMatrix<f64>) -> Self {
        let n = dist.nrows();
        let mut entries: Vec<(f64, usize)> = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                entries.push((dist[(i, j)], i * n + j));
            }
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut unique: Vec<f64> = Vec::new();
        let mut index = vec![0u32; n * n];
        for (d, flat) in entries {
            match unique.last() {
                Some(&last) if d - last <= 1e-9 * d.max(1e-300) => {}
                _ => unique.push(d),
            }
            let id = (unique.len() - 1) as u32;
            index[flat] = id;
            let (i, j) = (flat / n, flat % n);
            index[j * n + i] = id;
        }
        Self { unique, index, n }
    }

    /// Profiled negative log-likelihood: with correlation matrix
    /// `R = rho(d/alpha) + delta I`, the variance maximizing the likelihood
    /// is `sigma2 = x' R^{-1} x / n` in closed form.
    fn profiled_negloglik(
        &self,
        values: &nalgebra::DVector<f64>,
        alpha: f64,
        nu: f64,
        delta: f64,
        jitter: f64,
    ) -> Option<(f64, f64)> {
        let n = self.n;
        let corr: Vec<f64> = self
            .unique
            .iter()
            .map(|&d| matern_correlation(d / alpha, nu))
            .collect();
        let mut r = DMatrix::zeros(n, n);
        for i in 0..n {
            r[(i, i)] = 1.0 + delta;
            for j in (i + 1)..n {
                let c = corr[self.index[i * n + j] as usize];
                r[(i, j)] = c;
                r[(j, i)] = c;
            }
        }
        let chol = cholesky_with_jitter(&r, jitter).ok()?;
        let ldet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let u = chol.l().solve_lower_triangular(values)?;
        let quad = u.norm_squared();
        if !(quad > 0.0) {
            return None;
        }
        let sigma2 = quad / n as f64;
        let nll = 0.5
            * (n as f64 * sigma2.ln()
                + ldet
                + n as f64
                + n as f64 * (2.0 * std::f64::consts::PI).ln());
        Some((nll, sigma2))
    }
}

/// Fit a Matérn(+nugget) model by maximum likelihood from a precomputed
/// distance matrix (coordinates of any dimension reduce to this).
///
/// The simplex search runs in log-parameter space over the range, the
/// smoothness (unless fixed) and the nugget-to-variance ratio; the variance
/// itself is profiled out exactly. Deterministic multi-starts cover the
/// plausible ranges; non-positive-definite candidates are rejected.
pub fn fit_matern_mle_from_dist(
    dist: &DMatrix<f64>,
    values: &[f64],
    opts: &FitOptions,
) -> Result<FittedVariogram> {
    let n = values.len();
    if n < opts.min_sites {
        return Err(Error::InvalidParameter(format!(
            "fit needs at least {} sites, got {n}",
            opts.min_sites
        )));
    }
    if dist.nrows() != n || dist.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "distance matrix {}x{} vs {} values",
            dist.nrows(),
            dist.ncols(),
            n
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite observation".into()));
    }
    if let Some(nu) = opts.fix_nu {
        if !(nu > 0.0) {
            return Err(Error::InvalidParameter(format!("fixed nu must be > 0, got {nu}")));
        }
    }
    let max_dist = dist.iter().copied().fold(0.0f64, f64::max);
    if !(max_dist > 0.0) {
        return Err(Error::DegenerateVariogram("all sites coincide".into()));
    }

    let groups = DistanceGroups::build(dist);
    let x = nalgebra::DVector::from_column_slice(values);

    // log-parameter layout: [ln alpha, ln nu (if free), ln delta (if nugget)]
    let nu_free = opts.fix_nu.is_none();
    let mut dim = 1;
    let nu_pos = if nu_free { Some(dim) } else { None };
    if nu_free {
        dim += 1;
    }
    let delta_pos = if opts.with_nugget { Some(dim) } else { None };

    let alpha_box = ((1e-4 * max_dist).ln(), (1e2 * max_dist).ln());
    let nu_box = (0.05f64.ln(), 10.0f64.ln());
    let delta_box = (1e-8f64.ln(), 1e4f64.ln());

    let unpack = |p: &[f64]| -> (f64, f64, f64) {
        let alpha = p[0].exp();
        let nu = nu_pos.map_or_else(|| opts.fix_nu.unwrap(), |k| p[k].exp());
        let delta = delta_pos.map_or(0.0, |k| p[k].exp());
        (alpha, nu, delta)
    };
    let objective = |p: &[f64]| -> f64 {
        if p[0] < alpha_box.0 || p[0] > alpha_box.1 {
            return f64::INFINITY;
        }
        if let Some(k) = nu_pos {
            if p[k] < nu_box.0 || p[k] > nu_box.1 {
                return f64::INFINITY;
            }
        }
        if let Some(k) = delta_pos {
            if p[k] < delta_box.0 || p[k] > delta_box.1 {
                return f64::INFINITY;
            }
        }
        let (alpha, nu, delta) = unpack(p);
        match groups.profiled_negloglik(&x, alpha, nu, delta, opts.jitter) {
            Some((nll, _)) => nll,
            None => f64::INFINITY,
        }
    };

    // deterministic stratified starts over the plausible ranges
    let s_count = opts.multistarts.max(1);
    let nu_lattice: [f64; 5] = [0.35, 0.6, 1.0, 1.7, 2.8];
    let nu_perm = [2usize, 0, 4, 1, 3];
    let delta_lattice: [f64; 5] = [0.05, 0.5, 0.01, 1.0, 0.15];
    let starts: Vec<Vec<f64>> = (0..s_count)
        .map(|s| {
            let frac = (s as f64 + 0.5) / s_count as f64;
            let a = (0.02 * max_dist).ln() + frac * ((0.5f64 / 0.02).ln());
            let mut p = vec![a];
            if nu_free {
                p.push(nu_lattice[nu_perm[s % 5]].ln());
            }
            if opts.with_nugget {
                p.push(delta_lattice[s % 5].ln());
            }
            p
        })
        .collect();

    let nm = NelderMead {
        max_iters: opts.max_iters,
        ..Default::default()
    };
    let mut best: Option<crate::numerics::optimize::SimplexResult> = None;
    let mut total_evals = 0usize;
    for start in &starts {
        let res = nm.minimize(&objective, start);
        total_evals += res.n_evals;
        let better = match &best {
            Some(b) => res.fx < b.fx,
            None => true,
        };
        if better {
            best = Some(res);
        }
    }
    let best = best.expect("at least one start");
    if !best.fx.is_finite() {
        return Err(Error::DegenerateVariogram(
            "likelihood not finite at any candidate".into(),
        ));
    }
    let (alpha, nu, delta) = unpack(&best.x);
    let (nll, sigma2) = groups
        .profiled_negloglik(&x, alpha, nu, delta, opts.jitter)
        .ok_or(Error::NotPositiveDefinite)?;
    let model = VariogramModel::new(sigma2, alpha, nu, delta * sigma2)?;
    let fitted = FittedVariogram {
        model,
        loglik: -nll,
        converged: best.converged,
        n_evals: total_evals,
    };
    if !best.converged {
        return Err(Error::NonConvergence {
            iters: best.iters,
            loglik: fitted.loglik,
            best: Box::new(model),
        });
    }
    Ok(fitted)
}

/// Maximum-likelihood fit from site coordinates (Euclidean distances).
pub fn fit_matern_mle(
    sites: &[Location],
    values: &[f64],
    opts: &FitOptions,
) -> Result<FittedVariogram> {
    if sites.len() != values.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} sites vs {} values",
            sites.len(),
            values.len()
        )));
    }
    let n = sites.len();
    let mut dist = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = sites[i].distance(&sites[j]);
            dist[(i, j)] = d;
            dist[(j, i)] = d;
        }
    }
    fit_matern_mle_from_dist(&dist, values, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exponential_closed_form_at_nu_half() {
        let model = VariogramModel::new(1.3, 0.4, 0.5, 0.0).unwrap();
        let mut h: f64 = 0.0;
        while h <= 4.0 {
            let want = 1.3 * (-h / 0.4f64).exp();
            assert_abs_diff_eq!(model.covariance(h.max(1e-300)), want, epsilon = 1e-12);
            if h > 0.0 {
                assert_abs_diff_eq!(
                    matern_correlation_general(h / 0.4, 0.5),
                    (-h / 0.4f64).exp(),
                    epsilon = 1e-12
                );
            }
            h += 0.05;
        }
    }

    #[test]
    fn nu_three_halves_closed_form() {
        // correlation (1 + x) e^{-x}; with alpha = 1/sqrt(3) this is the
        // (1 + sqrt(3) h) e^{-sqrt(3) h} variant at h = 1
        let m = VariogramModel::new(1.0, 1.0, 1.5, 0.0).unwrap();
        assert_abs_diff_eq!(m.covariance(1.0), 2.0 * (-1.0f64).exp(), epsilon = 1e-10);
        let m2 = VariogramModel::new(1.0, 1.0 / 3.0f64.sqrt(), 1.5, 0.0).unwrap();
        let s3 = 3.0f64.sqrt();
        assert_abs_diff_eq!(m2.covariance(1.0), (1.0 + s3) * (-s3).exp(), epsilon = 1e-10);
        assert_abs_diff_eq!(
            matern_correlation_general(1.0, 1.5),
            2.0 * (-1.0f64).exp(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn covariance_and_semivariance_identities() {
        let m = VariogramModel::new(0.8, 0.25, 0.7, 0.2).unwrap();
        assert_abs_diff_eq!(m.covariance(0.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.semivariance(0.0), 0.0, epsilon = 1e-15);
        // gamma(h) + C(h) = C(0) for h > 0
        for h in [1e-6, 0.1, 0.3, 1.0, 5.0] {
            assert_abs_diff_eq!(
                m.semivariance(h) + m.covariance(h),
                m.covariance(0.0),
                epsilon = 1e-12
            );
        }
        // sill reached far out
        assert_abs_diff_eq!(m.semivariance(1e4), m.sill(), epsilon = 1e-10);
        // monotone nondecreasing
        let mut prev = 0.0;
        for j in 0..400 {
            let g = m.semivariance(j as f64 * 0.02 + 1e-12);
            assert!(g >= prev - 1e-13);
            prev = g;
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(VariogramModel::new(0.0, 1.0, 0.5, 0.0).is_err());
        assert!(VariogramModel::new(1.0, -1.0, 0.5, 0.0).is_err());
        assert!(VariogramModel::new(1.0, 1.0, 0.0, 0.0).is_err());
        assert!(VariogramModel::new(1.0, 1.0, 0.5, -0.1).is_err());
    }

    #[test]
    fn empirical_variogram_basics() {
        // constant field: all semivariances zero
        let sites: Vec<Location> = (0..6)
            .map(|i| Location::new_2d(i as f64 * 0.1, 0.0))
            .collect();
        let ev = empirical_variogram(&sites, &[2.0; 6], 4, 1.0).unwrap();
        assert!(ev.semivariances.iter().all(|&s| s == 0.0));

        // two sites, values 0 and 2, distance 1, one bin: gamma = 2
        let sites = vec![Location::new_2d(0.0, 0.0), Location::new_2d(1.0, 0.0)];
        let ev = empirical_variogram(&sites, &[0.0, 2.0], 1, 1.0).unwrap();
        assert_eq!(ev.counts[0], 1);
        assert_abs_diff_eq!(ev.semivariances[0], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn horizon_closed_form_and_max_rule() {
        let exp1 = VariogramModel::new(1.0, 0.2, 0.5, 0.0).unwrap();
        let h = determine_ht(&[exp1], 0.05).unwrap();
        assert_abs_diff_eq!(h, -0.2 * 0.05f64.ln(), epsilon = 1e-6);
        let exp2 = VariogramModel::new(1.0, 0.5, 0.5, 0.0).unwrap();
        let h2 = determine_ht(&[exp1, exp2], 0.05).unwrap();
        assert_abs_diff_eq!(h2, -0.5 * 0.05f64.ln(), epsilon = 1e-6);
    }

    #[test]
    fn grid_sampling() {
        let m = VariogramModel::new(1.0, 0.3, 0.5, 0.1).unwrap();
        let f = sample_on_grid(&m, 1.0, 2).unwrap();
        assert_eq!(f.values(), &[0.1, m.semivariance(1.0)]);

        let f = sample_on_grid(&m, 1.5, 512).unwrap();
        // nondecreasing samples
        assert!(f.values().windows(2).all(|w| w[1] >= w[0] - 1e-13));
        // dense sampling interpolates the analytic curve well
        let g = sample_on_grid(&m, 1.5, 512).unwrap();
        let mut max_err = 0.0f64;
        for k in 0..2000 {
            let h = 1.5 * (k as f64 + 0.5) / 2000.0;
            max_err = max_err.max((g.interpolate(h) - m.semivariance(h)).abs());
        }
        assert!(max_err < 1e-4 * m.sill(), "max interpolation error {max_err}");
    }

    #[test]
    fn loglik_scaling_invariance_on_lattice() {
        // scaling observations by c shifts the sigma2 argmax by c^2 and
        // leaves alpha at the same lattice point
        let sites: Vec<Location> = (0..25)
            .map(|i| Location::new_2d((i % 5) as f64 * 0.2, (i / 5) as f64 * 0.2))
            .collect();
        let n = sites.len();
        let mut dist = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                dist[(i, j)] = sites[i].distance(&sites[j]);
            }
        }
        // deterministic pseudo-data
        let values: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        let scaled: Vec<f64> = values.iter().map(|v| 2.0 * v).collect();
        let alphas = [0.1, 0.2, 0.4, 0.8];
        let sigmas = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
        let argmax = |vals: &[f64]| {
            let mut best = (0usize, 0usize, f64::NEG_INFINITY);
            for (ai, &a) in alphas.iter().enumerate() {
                for (si, &s2) in sigmas.iter().enumerate() {
                    let m = VariogramModel::new(s2, a, 0.5, 0.0).unwrap();
                    let ll = gaussian_loglik(&dist, vals, &m, 1e-10).unwrap();
                    if ll > best.2 {
                        best = (ai, si, ll);
                    }
                }
            }
            best
        };
        let (a1, s1, _) = argmax(&values);
        let (a2, s2, _) = argmax(&scaled);
        assert_eq!(a1, a2);
        assert_eq!(s2, s1 + 2); // sigma lattice has ratio 2, scaling by 2 shifts two steps
    }

    #[test]
    fn white_noise_with_nugget_goes_flat() {
        // deterministic "white noise" series: the nugget absorbs variance and
        // the fitted variogram is near flat at short range
        let sites: Vec<Location> = (0..40)
            .map(|i| Location::new_2d((i % 8) as f64 * 0.3, (i / 8) as f64 * 0.3))
            .collect();
        let values: Vec<f64> = (0..40)
            .map(|i| (((i * 2654435761usize) % 1000) as f64 / 1000.0 - 0.5) * 2.0)
            .collect();
        let opts = FitOptions {
            fix_nu: Some(0.5),
            with_nugget: true,
            ..Default::default()
        };
        let fit = fit_matern_mle(&sites, &values, &opts).unwrap();
        let m = fit.model;
        // most of the sill is nugget or the range collapsed: either way the
        // continuous part explains little of gamma at the shortest lag
        let short = m.semivariance(0.3);
        assert!(short / m.sill() > 0.6, "short-lag semivariance {short} vs sill {}", m.sill());
    }
}
