//! Elastic registration of standardized regional variograms.
//!
//! Curves are mapped to square-root velocity functions, aligned to a common
//! template by dynamic programming over a slope-constrained lattice, and the
//! per-curve warps are recentred so the mean warp is the identity. The
//! resulting distance warps are kernel-smoothed and extended by the identity
//! beyond the registration horizon `h_t`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::variogram::SampledFunction;

/// Square-root velocity representation on the uniform unit grid:
/// `q = sign(f') sqrt(|f'|)` with derivatives taken by central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct SrvfCurve {
    q: Vec<f64>,
}

impl SrvfCurve {
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }
}

/// SRVF of a sampled function viewed on the normalized domain `[0, 1]`.
pub fn to_srvf(f: &SampledFunction) -> SrvfCurve {
    let v = f.values();
    let m = v.len();
    let dt = 1.0 / (m - 1) as f64;
    let mut q = Vec::with_capacity(m);
    for j in 0..m {
        let d = if j == 0 {
            (v[1] - v[0]) / dt
        } else if j == m - 1 {
            (v[m - 1] - v[m - 2]) / dt
        } else {
            (v[j + 1] - v[j - 1]) / (2.0 * dt)
        };
        q.push(d.signum() * d.abs().sqrt());
    }
    SrvfCurve { q }
}

/// Shift/scale a curve to `[0, 1]`: the shift is the value at the origin
/// (the nugget) and the scale is the increment up to `h_t` (the partial
/// sill). Returns `(standardized, scale, shift)`.
pub fn standardize(f: &SampledFunction) -> Result<(SampledFunction, f64, f64)> {
    let v = f.values();
    let shift = v[0];
    let scale = v[v.len() - 1] - shift;
    if !(scale > 0.0) {
        return Err(Error::DegenerateVariogram(format!(
            "flat curve: scale {scale} is not positive"
        )));
    }
    let out: Vec<f64> = v.iter().map(|x| (x - shift) / scale).collect();
    Ok((SampledFunction::new(out, f.h_t())?, scale, shift))
}

/// Coprime step pairs `(a, b)` with `1 <= a, b <= max_step`: the slopes the
/// DP lattice can realize locally, spanning `[1/max_step, max_step]`.
fn lattice_steps(max_step: usize) -> Vec<(usize, usize)> {
    fn gcd(mut a: usize, mut b: usize) -> usize {
        while b != 0 {
            let t = a % b;
            a = b;
            b = t;
        }
        a
    }
    let mut steps = Vec::new();
    for a in 1..=max_step {
        for b in 1..=max_step {
            if gcd(a, b) == 1 {
                steps.push((a, b));
            }
        }
    }
    steps
}

/// Result of a pairwise alignment: the warp sampled on the uniform unit
/// grid and the attained squared SRVF distance.
#[derive(Debug, Clone)]
pub struct DpAlignment {
    pub warp: Vec<f64>,
    pub cost: f64,
}

/// Optimal boundary-preserving warp `gamma` minimizing
/// `|| q_target - (q_moving o gamma) sqrt(gamma') ||^2` over a lattice of
/// piecewise-linear warps with slopes in `[1/max_step, max_step]`.
pub fn dp_align(q_target: &SrvfCurve, q_moving: &SrvfCurve, max_step: usize) -> Result<DpAlignment> {
    let m = q_target.len();
    if q_moving.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "target has {m} samples, moving has {}",
            q_moving.len()
        )));
    }
    if m < 8 {
        return Err(Error::GridTooCoarse { need: 8, got: m });
    }
    if max_step == 0 {
        return Err(Error::InvalidParameter("max_step must be >= 1".into()));
    }
    let q1 = q_target.q();
    let q2 = q_moving.q();
    let steps = lattice_steps(max_step);
    let dt = 1.0 / (m - 1) as f64;

    let edge_cost = |i: usize, j: usize, a: usize, b: usize| -> f64 {
        // trapezoid integral of (q1 - (q2 o gamma) sqrt(s))^2 along the edge
        // from (i-a, j-b) to (i, j); gamma is linear with slope s = b/a there
        let s = b as f64 / a as f64;
        let sq = s.sqrt();
        let mut acc = 0.0;
        for r in 0..=a {
            let w = if r == 0 || r == a { 0.5 } else { 1.0 };
            let off = r as f64 * s;
            let k = off as usize;
            let fr = off - k as f64;
            let jj = j - b + k;
            let q2v = if fr <= 1e-12 || jj + 1 >= m {
                q2[jj.min(m - 1)]
            } else {
                q2[jj] * (1.0 - fr) + q2[jj + 1] * fr
            };
            let d = q1[i - a + r] - sq * q2v;
            acc += w * d * d;
        }
        acc * dt
    };

    const UNSET: u16 = u16::MAX;
    let mut energy = vec![f64::INFINITY; m * m];
    let mut back = vec![UNSET; m * m];
    energy[0] = 0.0;
    for i in 1..m {
        for j in 1..m {
            let mut best = f64::INFINITY;
            let mut arg = UNSET;
            for (si, &(a, b)) in steps.iter().enumerate() {
                if i < a || j < b {
                    continue;
                }
                let prev = energy[(i - a) * m + (j - b)];
                if prev >= best {
                    continue;
                }
                let total = prev + edge_cost(i, j, a, b);
                if total < best {
                    best = total;
                    arg = si as u16;
                }
            }
            energy[i * m + j] = best;
            back[i * m + j] = arg;
        }
    }

    // backtrack the node path and resample the piecewise-linear warp
    let mut nodes = vec![(m - 1, m - 1)];
    let (mut i, mut j) = (m - 1, m - 1);
    while (i, j) != (0, 0) {
        let s = back[i * m + j];
        debug_assert!(s != UNSET, "lattice must reach (0, 0)");
        let (a, b) = steps[s as usize];
        i -= a;
        j -= b;
        nodes.push((i, j));
    }
    nodes.reverse();
    let mut warp = vec![0.0f64; m];
    let mut seg = 0usize;
    for gi in 0..m {
        while nodes[seg + 1].0 < gi {
            seg += 1;
        }
        let (i0, j0) = nodes[seg];
        let (i1, j1) = nodes[seg + 1];
        let frac = (gi - i0) as f64 / (i1 - i0) as f64;
        warp[gi] = (j0 as f64 + frac * (j1 - j0) as f64) * dt;
    }
    warp[m - 1] = 1.0;
    Ok(DpAlignment {
        warp,
        cost: energy[(m - 1) * m + (m - 1)],
    })
}

/// Linear interpolation of samples on the uniform unit grid.
fn interp_unit(values: &[f64], t: f64) -> f64 {
    let m = values.len();
    let pos = t * (m - 1) as f64;
    if pos <= 0.0 {
        return values[0];
    }
    if pos >= (m - 1) as f64 {
        return values[m - 1];
    }
    let k = pos as usize;
    let fr = pos - k as f64;
    values[k] * (1.0 - fr) + values[k + 1] * fr
}

/// Derivative on the uniform unit grid (central differences, one-sided ends).
fn unit_gradient(values: &[f64]) -> Vec<f64> {
    let m = values.len();
    let dt = 1.0 / (m - 1) as f64;
    (0..m)
        .map(|j| {
            if j == 0 {
                (values[1] - values[0]) / dt
            } else if j == m - 1 {
                (values[m - 1] - values[m - 2]) / dt
            } else {
                (values[j + 1] - values[j - 1]) / (2.0 * dt)
            }
        })
        .collect()
}

/// `(q o gamma) sqrt(gamma')` on the grid.
fn warp_srvf(q: &[f64], gamma: &[f64]) -> Vec<f64> {
    let grad = unit_gradient(gamma);
    gamma
        .iter()
        .zip(&grad)
        .map(|(&g, &dg)| interp_unit(q, g) * dg.max(0.0).sqrt())
        .collect()
}

/// Inverse of a monotone warp, resampled on the uniform unit grid.
fn invert_warp(gamma: &[f64]) -> Vec<f64> {
    let m = gamma.len();
    let dt = 1.0 / (m - 1) as f64;
    let mut out = vec![0.0f64; m];
    let mut seg = 0usize;
    for (k, o) in out.iter_mut().enumerate() {
        let u = k as f64 * dt;
        while seg + 1 < m - 1 && gamma[seg + 1] < u {
            seg += 1;
        }
        let (g0, g1) = (gamma[seg], gamma[seg + 1]);
        let frac = if g1 > g0 { ((u - g0) / (g1 - g0)).clamp(0.0, 1.0) } else { 0.0 };
        *o = (seg as f64 + frac) * dt;
    }
    out[0] = 0.0;
    out[m - 1] = 1.0;
    out
}

/// Karcher-style mean of warps through their square-root densities:
/// `psi_i = sqrt(gamma_i')`, averaged, renormalized to the unit sphere and
/// integrated back to a warp.
fn sqrt_mean_warp(warps: &[Vec<f64>]) -> Vec<f64> {
    let m = warps[0].len();
    let dt = 1.0 / (m - 1) as f64;
    let mut psi_bar = vec![0.0f64; m];
    for w in warps {
        let grad = unit_gradient(w);
        for (p, g) in psi_bar.iter_mut().zip(&grad) {
            *p += g.max(0.0).sqrt() / warps.len() as f64;
        }
    }
    let mut norm2 = 0.0;
    for j in 0..m {
        let w = if j == 0 || j == m - 1 { 0.5 } else { 1.0 };
        norm2 += w * psi_bar[j] * psi_bar[j] * dt;
    }
    let norm = norm2.sqrt();
    for p in &mut psi_bar {
        *p /= norm;
    }
    let mut gamma = vec![0.0f64; m];
    for j in 1..m {
        gamma[j] = gamma[j - 1] + dt * 0.5 * (psi_bar[j - 1].powi(2) + psi_bar[j].powi(2));
    }
    let total = gamma[m - 1];
    for g in &mut gamma {
        *g /= total;
    }
    gamma
}

#[derive(Debug, Clone)]
pub struct RegistrationOptions {
    pub max_iters: usize,
    /// L2 change of the template SRVF at which iteration stops.
    pub tol: f64,
    /// DP lattice step bound (slopes within `[1/max_step, max_step]`).
    pub max_step: usize,
}

impl Default for RegistrationOptions {
    fn default() -> Self {
        Self {
            max_iters: 20,
            tol: 1e-6,
            max_step: 10,
        }
    }
}

/// Output of multiple registration.
#[derive(Debug, Clone)]
pub struct RegistrationResult {
    /// Estimate of the common template, function domain, standardized scale.
    pub template: SampledFunction,
    /// Regional distance warps `phi_i` sampled on `[0, h_t]` (distance
    /// domain, not yet smoothed).
    pub warps: Vec<SampledFunction>,
    /// The registered curves `f_i o phi_i^{-1}`.
    pub aligned: Vec<SampledFunction>,
    pub iterations: usize,
    pub converged: bool,
}

/// Template iteration: align every curve to the running template, recompute
/// the template as the mean of the aligned SRVFs, and recentre so the mean
/// warp is the identity. Inputs must be standardized curves on a common
/// grid. The returned `phi_i` satisfy `f_i ~= template o phi_i`.
pub fn register_set(
    functions: &[SampledFunction],
    opts: &RegistrationOptions,
) -> Result<RegistrationResult> {
    if functions.len() < 2 {
        return Err(Error::InvalidParameter(
            "registration needs at least 2 curves".into(),
        ));
    }
    let m = functions[0].len();
    let h_t = functions[0].h_t();
    for f in functions {
        if f.len() != m || f.h_t() != h_t {
            return Err(Error::DimensionMismatch(
                "curves must share one grid and horizon".into(),
            ));
        }
    }

    let qs: Vec<SrvfCurve> = functions.iter().map(to_srvf).collect();
    let mut template: Vec<f64> = (0..m)
        .map(|j| qs.iter().map(|q| q.q()[j]).sum::<f64>() / qs.len() as f64)
        .collect();
    let mut gams: Vec<Vec<f64>> = vec![(0..m)
        .map(|j| j as f64 / (m - 1) as f64)
        .collect(); qs.len()];
    let mut iterations = 0;
    let mut converged = false;
    let dt = 1.0 / (m - 1) as f64;

    while iterations < opts.max_iters {
        iterations += 1;
        let template_curve = SrvfCurve { q: template.clone() };
        let aligns: Vec<DpAlignment> = qs
            .par_iter()
            .map(|q| dp_align(&template_curve, q, opts.max_step))
            .collect::<Result<_>>()?;
        gams = aligns.into_iter().map(|a| a.warp).collect();

        // recentre: compose every warp with the inverse mean warp
        let mean_warp = sqrt_mean_warp(&gams);
        let mean_inv = invert_warp(&mean_warp);
        for g in &mut gams {
            let composed: Vec<f64> = mean_inv.iter().map(|&t| interp_unit(g, t)).collect();
            *g = composed;
        }
        let aligned_qs: Vec<Vec<f64>> = qs
            .iter()
            .zip(&gams)
            .map(|(q, g)| warp_srvf(q.q(), g))
            .collect();
        let new_template: Vec<f64> = (0..m)
            .map(|j| aligned_qs.iter().map(|a| a[j]).sum::<f64>() / qs.len() as f64)
            .collect();
        let change = template
            .iter()
            .zip(&new_template)
            .map(|(a, b)| (a - b) * (a - b) * dt)
            .sum::<f64>()
            .sqrt();
        template = new_template;
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    // phi_i = gamma_i^{-1}, mapped back to the distance domain [0, h_t]
    let mut warps = Vec::with_capacity(qs.len());
    let mut aligned = Vec::with_capacity(qs.len());
    for (f, g) in functions.iter().zip(&gams) {
        let phi: Vec<f64> = invert_warp(g).iter().map(|&t| t * h_t).collect();
        warps.push(SampledFunction::new(phi, h_t)?);
        let reg: Vec<f64> = g.iter().map(|&t| interp_unit(f.values(), t)).collect();
        aligned.push(SampledFunction::new(reg, h_t)?);
    }
    let template_fn: Vec<f64> = (0..m)
        .map(|j| aligned.iter().map(|a| a.values()[j]).sum::<f64>() / aligned.len() as f64)
        .collect();
    Ok(RegistrationResult {
        template: SampledFunction::new(template_fn, h_t)?,
        warps,
        aligned,
        iterations,
        converged,
    })
}

/// A monotone boundary-preserving distance warp on `[0, h_t]`, identity
/// beyond the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpingFunction {
    warped: Vec<f64>,
    h_t: f64,
    bandwidth: f64,
}

impl WarpingFunction {
    /// Knot abscissae (uniform over `[0, h_t]`).
    pub fn knot(&self, j: usize) -> f64 {
        self.h_t * j as f64 / (self.warped.len() - 1) as f64
    }

    pub fn knot_count(&self) -> usize {
        self.warped.len()
    }

    pub fn warped_values(&self) -> &[f64] {
        &self.warped
    }

    pub fn h_t(&self) -> f64 {
        self.h_t
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// The identity warp.
    pub fn identity(h_t: f64) -> Self {
        Self {
            warped: vec![0.0, h_t],
            h_t,
            bandwidth: 0.0,
        }
    }

    /// Warped distance. Distances beyond `h_t` pass through unchanged.
    pub fn evaluate(&self, h: f64) -> f64 {
        debug_assert!(h >= 0.0);
        if h >= self.h_t {
            return h;
        }
        let m = self.warped.len();
        let pos = h / self.h_t * (m - 1) as f64;
        let k = pos as usize;
        if k + 1 >= m {
            return self.warped[m - 1];
        }
        let fr = pos - k as f64;
        self.warped[k] * (1.0 - fr) + self.warped[k + 1] * fr
    }

    /// Largest deviation from the identity over the knots.
    pub fn sup_deviation_from_identity(&self) -> f64 {
        self.warped
            .iter()
            .enumerate()
            .map(|(j, w)| (w - self.knot(j)).abs())
            .fold(0.0, f64::max)
    }
}

/// Pool-adjacent-violators projection onto nondecreasing sequences.
fn isotonic(values: &mut [f64]) {
    let n = values.len();
    let mut level: Vec<f64> = Vec::with_capacity(n);
    let mut weight: Vec<f64> = Vec::with_capacity(n);
    for &v in values.iter() {
        level.push(v);
        weight.push(1.0);
        while level.len() > 1 && level[level.len() - 2] > level[level.len() - 1] {
            let (l1, w1) = (level.pop().unwrap(), weight.pop().unwrap());
            let k = level.len() - 1;
            level[k] = (level[k] * weight[k] + l1 * w1) / (weight[k] + w1);
            weight[k] += w1;
        }
    }
    let mut idx = 0;
    for (l, w) in level.iter().zip(&weight) {
        for _ in 0..*w as usize {
            values[idx] = *l;
            idx += 1;
        }
    }
}

/// Kernel-smooth a raw warp and extend it by the identity beyond `h_t`.
///
/// The Gaussian Nadaraya-Watson smoother runs on the deviation from the
/// identity, which keeps the boundary values exact and leaves an identity
/// input untouched; monotonicity is restored by isotonic projection when
/// smoothing introduces local decreases.
pub fn smooth_and_extend(raw: &SampledFunction, bandwidth: f64) -> Result<WarpingFunction> {
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must be > 0, got {bandwidth}"
        )));
    }
    let h_t = raw.h_t();
    let v = raw.values();
    let m = v.len();
    let tol = 1e-9 * h_t;
    if v[0].abs() > tol || (v[m - 1] - h_t).abs() > tol {
        return Err(Error::InvalidParameter(
            "raw warp must run from (0, 0) to (h_t, h_t)".into(),
        ));
    }
    if v.windows(2).any(|w| w[1] < w[0] - 1e-12 * h_t) {
        return Err(Error::InvalidParameter("raw warp must be nondecreasing".into()));
    }

    let dh = h_t / (m - 1) as f64;
    let window = ((6.0 * bandwidth / dh).ceil() as usize).max(1);
    let resid: Vec<f64> = (0..m).map(|j| v[j] - raw.abscissa(j)).collect();
    let mut smoothed = Vec::with_capacity(m);
    for i in 0..m {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(m - 1);
        let mut num = 0.0;
        let mut den = 0.0;
        for j in lo..=hi {
            let u = (i as f64 - j as f64) * dh / bandwidth;
            let w = (-0.5 * u * u).exp();
            num += w * resid[j];
            den += w;
        }
        smoothed.push(raw.abscissa(i) + num / den);
    }
    smoothed[0] = 0.0;
    smoothed[m - 1] = h_t;
    if smoothed.windows(2).any(|w| w[1] < w[0]) {
        isotonic(&mut smoothed);
        smoothed[0] = 0.0;
        smoothed[m - 1] = h_t;
    }
    // keep the map strictly increasing between knots
    for j in 1..m {
        let floor = smoothed[j - 1] + 1e-12 * h_t;
        if smoothed[j] < floor {
            smoothed[j] = floor;
        }
    }
    smoothed[m - 1] = h_t;
    Ok(WarpingFunction {
        warped: smoothed,
        h_t,
        bandwidth,
    })
}
