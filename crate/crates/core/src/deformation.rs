//! Global warped distances, classical MDS embedding, and dimension selection.
//!
//! The global distance between two sites is the segment-weight combination
//! of the regional distance warps evaluated at the Euclidean distance. The
//! warped distance matrix is embedded by double centering and
//! eigendecomposition (Torgerson), with negative eigenvalues clamped at zero
//! since warped distances need not be Euclidean-realizable.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Location, Partition};
use crate::registration::WarpingFunction;

/// A monotone distance warp usable in the global distance. Implemented by
/// [`WarpingFunction`] and by analytic warps in evaluation code.
pub trait DistanceWarp: Sync {
    fn warp(&self, h: f64) -> f64;
}

impl DistanceWarp for WarpingFunction {
    fn warp(&self, h: f64) -> f64 {
        self.evaluate(h)
    }
}

/// Identity warp for stationary baselines and tests.
#[derive(Debug, Clone, Copy)]
pub struct IdentityWarp;

impl DistanceWarp for IdentityWarp {
    fn warp(&self, h: f64) -> f64 {
        h
    }
}

/// Deformed-space distance `phi(s, s2)`: the weighted combination of the
/// regional warps of the Euclidean distance, weights being segment-length
/// fractions. Zero for coincident sites; symmetric.
pub fn global_distance<W: DistanceWarp>(
    s: &Location,
    s2: &Location,
    part: &Partition,
    warps: &[W],
) -> Result<f64> {
    if warps.len() != part.k() {
        return Err(Error::DimensionMismatch(format!(
            "{} warps for {} regions",
            warps.len(),
            part.k()
        )));
    }
    let d = s.distance(s2);
    if d == 0.0 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for (region, weight) in part.weights(s, s2)? {
        acc += weight * warps[region].warp(d);
    }
    Ok(acc)
}

/// Pairwise warped distances for a site list (observed sites first by
/// convention, then prediction sites).
#[derive(Debug, Clone)]
pub struct WarpedDistanceMatrix {
    sites: Vec<Location>,
    values: DMatrix<f64>,
    has_duplicates: bool,
}

impl WarpedDistanceMatrix {
    pub fn sites(&self) -> &[Location] {
        &self.sites
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// True if two distinct site indices share coordinates (downstream code
    /// may want jitter or psi escalation).
    pub fn has_duplicates(&self) -> bool {
        self.has_duplicates
    }

    /// Wrap an externally built symmetric matrix (used by evaluation code
    /// working with analytic distances).
    pub fn from_parts(sites: Vec<Location>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != sites.len() || values.ncols() != sites.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} sites vs {}x{} matrix",
                sites.len(),
                values.nrows(),
                values.ncols()
            )));
        }
        let has_duplicates = (0..sites.len()).any(|i| {
            ((i + 1)..sites.len()).any(|j| sites[i].coords() == sites[j].coords())
        });
        Ok(Self {
            sites,
            values,
            has_duplicates,
        })
    }
}

/// Assemble the full warped distance matrix (parallel over rows).
pub fn warped_distance_matrix<W: DistanceWarp>(
    sites: &[Location],
    part: &Partition,
    warps: &[W],
) -> Result<WarpedDistanceMatrix> {
    if sites.len() < 2 {
        return Err(Error::EmptyInput("need at least 2 sites".into()));
    }
    let n = sites.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let mut row = Vec::with_capacity(n - i - 1);
            for j in (i + 1)..n {
                row.push(global_distance(&sites[i], &sites[j], part, warps)?);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut values = DMatrix::zeros(n, n);
    let mut has_duplicates = false;
    for (i, row) in rows.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            values[(i, j)] = v;
            values[(j, i)] = v;
            if sites[i].coords() == sites[j].coords() {
                has_duplicates = true;
            }
        }
    }
    Ok(WarpedDistanceMatrix {
        sites: sites.to_vec(),
        values,
        has_duplicates,
    })
}

/// Coordinates of all sites in the deformed space.
#[derive(Debug, Clone)]
pub struct DeformedEmbedding {
    /// `(n + m) x d` coordinates, centered columns.
    pub coords: DMatrix<f64>,
    /// All eigenvalues of the centered Gram matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// Extra dimensions beyond the geographic dimension.
    pub psi: usize,
    /// Distance-reproduction score of this embedding (NaN when undefined).
    pub nmse: f64,
    /// Requested dimensions that had no positive eigenvalue left and were
    /// filled with zeros.
    pub zero_padded: usize,
}

/// Eigendecomposition of the double-centered squared-distance matrix,
/// ordered by descending eigenvalue with a deterministic sign convention
/// (largest-magnitude entry of each eigenvector is positive).
fn centered_gram_eigen(dist: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = dist.nrows();
    let d2 = dist.map(|v| v * v);
    let row_mean: Vec<f64> = (0..n).map(|i| d2.row(i).sum() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = -0.5 * (d2[(i, j)] - row_mean[i] - row_mean[j] + grand);
        }
    }
    let eig = b.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&c)));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (new_k, &k) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(k);
        let mut max_abs = 0.0;
        let mut flip = false;
        for &v in col.iter() {
            if v.abs() > max_abs {
                max_abs = v.abs();
                flip = v < 0.0;
            }
        }
        for i in 0..n {
            vectors[(i, new_k)] = if flip { -col[i] } else { col[i] };
        }
    }
    (eigenvalues, vectors)
}

fn coords_from_eigen(
    eigenvalues: &[f64],
    vectors: &DMatrix<f64>,
    d: usize,
) -> (DMatrix<f64>, usize) {
    let n = vectors.nrows();
    let mut coords = DMatrix::zeros(n, d);
    let mut zero_padded = 0;
    for k in 0..d {
        let lam = if k < eigenvalues.len() { eigenvalues[k] } else { 0.0 };
        if lam > 0.0 {
            let s = lam.sqrt();
            for i in 0..n {
                coords[(i, k)] = vectors[(i, k)] * s;
            }
        } else {
            zero_padded += 1;
        }
    }
    (coords, zero_padded)
}

fn nmse_of_coords(dist: &DMatrix<f64>, coords: &DMatrix<f64>) -> Result<f64> {
    let n = dist.nrows();
    if coords.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} embedded rows vs {n} sites",
            coords.nrows()
        )));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += dist[(i, j)];
                count += 1;
            }
        }
    }
    let mean = sum / count as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut d2 = 0.0;
            for k in 0..coords.ncols() {
                let diff = coords[(i, k)] - coords[(j, k)];
                d2 += diff * diff;
            }
            let diff = d2.sqrt() - dist[(i, j)];
            num += diff * diff;
            den += (dist[(i, j)] - mean) * (dist[(i, j)] - mean);
        }
    }
    if den <= f64::EPSILON * count as f64 {
        return Err(Error::DegenerateStatistic(
            "constant distance matrix has no NMSE scale".into(),
        ));
    }
    Ok(1.0 - num / den)
}

/// Classical (Torgerson) MDS into `d` dimensions.
pub fn cmds(dist: &WarpedDistanceMatrix, d: usize) -> Result<DeformedEmbedding> {
    if d == 0 {
        return Err(Error::InvalidParameter("need d >= 1".into()));
    }
    if dist.len() < 2 {
        return Err(Error::EmptyInput("need at least 2 sites".into()));
    }
    let (eigenvalues, vectors) = centered_gram_eigen(dist.values());
    let (coords, zero_padded) = coords_from_eigen(&eigenvalues, &vectors, d);
    let nmse = nmse_of_coords(dist.values(), &coords).unwrap_or(f64::NAN);
    let d_geo = dist.sites()[0].dim();
    Ok(DeformedEmbedding {
        coords,
        eigenvalues,
        psi: d.saturating_sub(d_geo),
        nmse,
        zero_padded,
    })
}

/// Distance-reproduction score of an embedding against the target warped
/// distances: `1 - ||D_emb - Delta||^2 / ||Delta - mean||^2` over
/// off-diagonal entries. 1 means perfect reproduction.
pub fn embedding_nmse(dist: &WarpedDistanceMatrix, emb: &DeformedEmbedding) -> Result<f64> {
    nmse_of_coords(dist.values(), &emb.coords)
}

/// Sweep `psi = 0..=psi_max`, compute the NMSE curve, and return the
/// smallest `psi` within `epsilon` of the curve maximum. If distinct sites
/// embed at coincident coordinates, `psi` escalates (folding mitigation).
pub fn select_dimension(
    dist: &WarpedDistanceMatrix,
    psi_max: usize,
    epsilon: f64,
) -> Result<(usize, Vec<(usize, f64)>)> {
    if dist.len() < 2 {
        return Err(Error::EmptyInput("need at least 2 sites".into()));
    }
    let d_geo = dist.sites()[0].dim();
    let (eigenvalues, vectors) = centered_gram_eigen(dist.values());
    let mut curve = Vec::with_capacity(psi_max + 1);
    for psi in 0..=psi_max {
        let (coords, _) = coords_from_eigen(&eigenvalues, &vectors, d_geo + psi);
        let nmse = nmse_of_coords(dist.values(), &coords)?;
        curve.push((psi, nmse));
    }
    let best = curve
        .iter()
        .map(|&(_, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut psi_star = curve
        .iter()
        .find(|&&(_, v)| v >= best - epsilon)
        .map(|&(p, _)| p)
        .unwrap_or(0);

    // folding mitigation: distinct sites must not share deformed coordinates
    let colocated = |coords: &DMatrix<f64>| -> bool {
        let n = coords.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if dist.values()[(i, j)] > 1e-9 {
                    let mut d2 = 0.0;
                    for k in 0..coords.ncols() {
                        let diff = coords[(i, k)] - coords[(j, k)];
                        d2 += diff * diff;
                    }
                    if d2.sqrt() < 1e-9 {
                        return true;
                    }
                }
            }
        }
        false
    };
    while psi_star < psi_max {
        let (coords, _) = coords_from_eigen(&eigenvalues, &vectors, d_geo + psi_star);
        if !colocated(&coords) {
            break;
        }
        psi_star += 1;
    }
    Ok((psi_star, curve))
}

/// Root-mean-square residual between two configurations after optimal
/// translation and rotation/reflection (orthogonal Procrustes).
pub fn procrustes_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.nrows(), b.nrows(), "configurations must match in rows");
    let n = a.nrows();
    let d = a.ncols().max(b.ncols());
    let pad = |m: &DMatrix<f64>| -> DMatrix<f64> {
        let mut out = DMatrix::zeros(n, d);
        for i in 0..n {
            for k in 0..m.ncols() {
                out[(i, k)] = m[(i, k)];
            }
        }
        let means: Vec<f64> = (0..d).map(|k| out.column(k).sum() / n as f64).collect();
        for i in 0..n {
            for k in 0..d {
                out[(i, k)] -= means[k];
            }
        }
        out
    };
    let ac = pad(a);
    let bc = pad(b);
    let svd = (ac.transpose() * &bc).svd(true, true);
    let rot = svd.u.unwrap() * svd.v_t.unwrap();
    let aligned = ac * rot;
    ((&aligned - &bc).norm_squared() / n as f64).sqrt()
}
