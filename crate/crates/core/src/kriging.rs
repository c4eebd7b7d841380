//! Simple kriging for zero-mean (standardized) data, plus the nonstationary
//! covariance evaluated through the global distance function.
//!
//! Kriging in the deformed space works on the embedded coordinates'
//! Euclidean distances: the embedding step is what turns warped distances
//! into a valid isotropic covariance argument. The stationary baseline runs
//! through the same code on geographic coordinates.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::deformation::{global_distance, DistanceWarp};
use crate::error::{Error, Result};
use crate::geometry::{Location, Partition};
use crate::numerics::cholesky_with_jitter;
use crate::variogram::{fit_matern_mle_from_dist, FitOptions, VariogramModel};

/// A stationary isotropic model fitted on deformed-space distances.
#[derive(Debug, Clone)]
pub struct DeformedCovModel {
    pub base: VariogramModel,
    /// Dimensionality of the embedding the fit ran in.
    pub dim: usize,
    pub loglik: f64,
}

/// Euclidean distance matrix of row-coordinates.
pub fn euclidean_distances(coords: &DMatrix<f64>) -> DMatrix<f64> {
    let n = coords.nrows();
    let mut dist = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut d2 = 0.0;
            for k in 0..coords.ncols() {
                let diff = coords[(i, k)] - coords[(j, k)];
                d2 += diff * diff;
            }
            let d = d2.sqrt();
            dist[(i, j)] = d;
            dist[(j, i)] = d;
        }
    }
    dist
}

/// Fit the Matérn(+nugget) model on deformed-space coordinates.
pub fn fit_deformed(
    coords: &DMatrix<f64>,
    values: &[f64],
    opts: &FitOptions,
) -> Result<DeformedCovModel> {
    let dist = euclidean_distances(coords);
    let fit = fit_matern_mle_from_dist(&dist, values, opts)?;
    Ok(DeformedCovModel {
        base: fit.model,
        dim: coords.ncols(),
        loglik: fit.loglik,
    })
}

/// Spatially varying per-region scalar (sill or nugget field).
#[derive(Debug, Clone)]
pub struct RegionField<'a> {
    partition: &'a Partition,
    values: Vec<f64>,
}

impl<'a> RegionField<'a> {
    pub fn new(partition: &'a Partition, values: Vec<f64>) -> Result<Self> {
        if values.len() != partition.k() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} regions",
                values.len(),
                partition.k()
            )));
        }
        Ok(Self { partition, values })
    }

    pub fn at(&self, s: &Location) -> Result<f64> {
        Ok(self.values[self.partition.region_of(s)?])
    }
}

/// Nonstationary covariance between two geographic sites: the deformed-space
/// model composed with the global distance. With sill/nugget fields supplied
/// it becomes `sigma(s) sigma(s2) rho(phi(s, s2)) + tau(s) 1{s = s2}`.
pub fn ns_cov<W: DistanceWarp>(
    s: &Location,
    s2: &Location,
    warps: &[W],
    part: &Partition,
    model: &DeformedCovModel,
    sigma_field: Option<&RegionField>,
    tau_field: Option<&RegionField>,
) -> Result<f64> {
    let phi = global_distance(s, s2, part, warps)?;
    if sigma_field.is_none() && tau_field.is_none() {
        return Ok(model.base.covariance(phi));
    }
    let rho = model.base.correlation(phi);
    let sig = match sigma_field {
        Some(f) => f.at(s)? * f.at(s2)?,
        None => model.base.sill(),
    };
    let mut cov = sig * rho;
    if s.coords() == s2.coords() {
        if let Some(tau) = tau_field {
            cov += tau.at(s)?;
        }
    }
    Ok(cov)
}

/// Correlation of every grid site with an anchor under the nonstationary
/// model: `ns_cov(anchor, g) / C(0)`.
pub fn correlation_map<W: DistanceWarp>(
    anchor: &Location,
    grid: &[Location],
    warps: &[W],
    part: &Partition,
    model: &DeformedCovModel,
) -> Result<Vec<f64>> {
    let c0 = model.base.sill();
    grid.iter()
        .map(|g| Ok(ns_cov(anchor, g, warps, part, model, None, None)? / c0))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub site_id: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone)]
pub struct KrigingOutput {
    pub predictions: Vec<Prediction>,
    /// How many predictive variances were clamped at zero (the embedding
    /// approximation can make the system slightly inconsistent).
    pub variance_clamps: usize,
}

/// Simple kriging for zero-mean data: `mean = k' C^{-1} x`,
/// `var = C(0) - k' C^{-1} k` (clamped at zero). One Cholesky of the
/// training covariance is shared across test sites. A test site coincident
/// with a training site returns that observation with `sd = sqrt(nugget)`.
pub fn krige(
    train: &DMatrix<f64>,
    values: &[f64],
    test: &DMatrix<f64>,
    model: &VariogramModel,
    jitter: f64,
) -> Result<KrigingOutput> {
    let n = train.nrows();
    if n == 0 {
        return Err(Error::EmptyInput("no training sites".into()));
    }
    if values.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} training rows vs {} values",
            n,
            values.len()
        )));
    }
    if test.ncols() != train.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "train dim {} vs test dim {}",
            train.ncols(),
            test.ncols()
        )));
    }
    let dist = euclidean_distances(train);
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        cov[(i, i)] = model.sill() + jitter;
        for j in (i + 1)..n {
            let c = model.sigma2
                * crate::variogram::matern_correlation(dist[(i, j)] / model.alpha, model.nu);
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }
    let chol = cholesky_with_jitter(&cov, 0.0)?;
    let x = DVector::from_column_slice(values);
    let weights = chol.solve(&x);

    let results: Vec<(Prediction, bool)> = (0..test.nrows())
        .into_par_iter()
        .map(|t| {
            let mut k = DVector::zeros(n);
            let mut coincident: Option<usize> = None;
            for i in 0..n {
                let mut d2 = 0.0;
                for c in 0..train.ncols() {
                    let diff = test[(t, c)] - train[(i, c)];
                    d2 += diff * diff;
                }
                let d = d2.sqrt();
                if d < 1e-12 {
                    coincident = Some(i);
                    break;
                }
                k[i] = model.sigma2
                    * crate::variogram::matern_correlation(d / model.alpha, model.nu);
            }
            if let Some(i) = coincident {
                return (
                    Prediction {
                        site_id: t,
                        mean: values[i],
                        sd: model.nugget.sqrt(),
                    },
                    false,
                );
            }
            let mean = k.dot(&weights);
            let w = chol
                .l()
                .solve_lower_triangular(&k)
                .expect("triangular solve after successful Cholesky");
            let var = model.sill() - w.norm_squared();
            let clamped = var < 0.0;
            (
                Prediction {
                    site_id: t,
                    mean,
                    sd: var.max(0.0).sqrt(),
                },
                clamped,
            )
        })
        .collect();

    let variance_clamps = results.iter().filter(|(_, c)| *c).count();
    Ok(KrigingOutput {
        predictions: results.into_iter().map(|(p, _)| p).collect(),
        variance_clamps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deformation::IdentityWarp;
    use crate::geometry::BoxRegion;
    use approx::assert_abs_diff_eq;

    fn coords(rows: &[[f64; 2]]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(rows.len(), 2);
        for (i, r) in rows.iter().enumerate() {
            m[(i, 0)] = r[0];
            m[(i, 1)] = r[1];
        }
        m
    }

    #[test]
    fn exact_interpolation_without_nugget() {
        let train = coords(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let values = [1.0, -0.5, 2.0];
        let model = VariogramModel::new(1.0, 0.4, 0.5, 0.0).unwrap();
        let out = krige(&train, &values, &train.clone(), &model, 0.0).unwrap();
        for (p, want) in out.predictions.iter().zip(values) {
            assert_abs_diff_eq!(p.mean, want, epsilon = 1e-10);
            assert_abs_diff_eq!(p.sd, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn single_train_site_closed_form() {
        let train = coords(&[[0.0, 0.0]]);
        let test = coords(&[[0.7, 0.0]]);
        let model = VariogramModel::new(2.0, 0.5, 0.5, 0.0).unwrap();
        let out = krige(&train, &[1.4], &test, &model, 0.0).unwrap();
        let rho = (-0.7f64 / 0.5).exp();
        assert_abs_diff_eq!(out.predictions[0].mean, rho * 1.4, epsilon = 1e-12);
        assert_abs_diff_eq!(
            out.predictions[0].sd,
            (2.0 * (1.0 - rho * rho)).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn five_site_dense_solve_oracle() {
        let train = coords(&[
            [0.0, 0.0],
            [1.0, 0.2],
            [0.3, 0.9],
            [0.8, 0.75],
            [0.5, 0.4],
        ]);
        let values = [0.3, -0.2, 1.1, 0.4, -0.9];
        let model = VariogramModel::new(1.3, 0.45, 1.5, 0.05).unwrap();
        let test = coords(&[[0.25, 0.35], [0.9, 0.9], [0.1, 0.7]]);
        let out = krige(&train, &values, &test, &model, 0.0).unwrap();

        // oracle: explicit matrix inverse
        let n = 5;
        let mut c = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let d = ((train[(i, 0)] - train[(j, 0)]).powi(2)
                    + (train[(i, 1)] - train[(j, 1)]).powi(2))
                .sqrt();
                c[(i, j)] = model.covariance(d);
            }
        }
        let cinv = c.try_inverse().unwrap();
        let x = DVector::from_column_slice(&values);
        for (t, p) in out.predictions.iter().enumerate() {
            let mut k = DVector::zeros(n);
            for i in 0..n {
                let d = ((test[(t, 0)] - train[(i, 0)]).powi(2)
                    + (test[(t, 1)] - train[(i, 1)]).powi(2))
                .sqrt();
                k[i] = model.sigma2
                    * crate::variogram::matern_correlation(d / model.alpha, model.nu);
            }
            let mean = k.dot(&(&cinv * &x));
            let var = model.sill() - k.dot(&(&cinv * &k));
            assert_abs_diff_eq!(p.mean, mean, epsilon = 1e-10);
            assert_abs_diff_eq!(p.sd, var.max(0.0).sqrt(), epsilon = 1e-10);
        }
    }

    #[test]
    fn coincident_test_site_with_nugget() {
        let train = coords(&[[0.0, 0.0], [1.0, 1.0]]);
        let model = VariogramModel::new(1.0, 0.5, 0.5, 0.09).unwrap();
        let out = krige(&train, &[2.0, -1.0], &coords(&[[1.0, 1.0]]), &model, 0.0).unwrap();
        assert_abs_diff_eq!(out.predictions[0].mean, -1.0, epsilon = 0.0);
        assert_abs_diff_eq!(out.predictions[0].sd, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn variance_bounds_and_screening() {
        let model = VariogramModel::new(1.0, 0.4, 0.8, 0.0).unwrap();
        let base = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let test = coords(&[[0.4, 0.6], [0.9, 0.1]]);
        let mut prev_vars: Option<Vec<f64>> = None;
        for take in 1..=4 {
            let train = coords(&base[..take]);
            let values: Vec<f64> = (0..take).map(|i| (i as f64 * 0.7).sin()).collect();
            let out = krige(&train, &values, &test, &model, 0.0).unwrap();
            let vars: Vec<f64> = out.predictions.iter().map(|p| p.sd * p.sd).collect();
            for &v in &vars {
                assert!(v >= 0.0 && v <= model.sill() + 1e-12);
            }
            if let Some(prev) = prev_vars {
                // adding a training site never increases the variance
                for (now, before) in vars.iter().zip(prev) {
                    assert!(*now <= before + 1e-10);
                }
            }
            prev_vars = Some(vars);
        }
    }

    #[test]
    fn identity_deformation_matches_geographic_kriging() {
        use crate::deformation::{cmds, warped_distance_matrix};
        let domain = BoxRegion::from_bounds(&[[0.0, 2.0], [0.0, 2.0]]).unwrap();
        let part = Partition::vertical_split(&domain, &[1.0]).unwrap();
        let sites: Vec<Location> = (0..25)
            .map(|i| Location::new_2d((i % 5) as f64 / 2.0, (i / 5) as f64 / 2.0))
            .collect();
        let values: Vec<f64> = (0..20).map(|i| ((i * 3) as f64 * 0.31).sin()).collect();
        let dist = warped_distance_matrix(&sites, &part, &[IdentityWarp, IdentityWarp]).unwrap();
        let emb = cmds(&dist, 2).unwrap();
        let model = VariogramModel::new(1.0, 0.5, 0.6, 0.01).unwrap();

        let geo: DMatrix<f64> = coords(
            &sites
                .iter()
                .map(|s| [s.coords()[0], s.coords()[1]])
                .collect::<Vec<_>>(),
        );
        let (geo_train, geo_test) = (geo.rows(0, 20).into_owned(), geo.rows(20, 5).into_owned());
        let (emb_train, emb_test) = (
            emb.coords.rows(0, 20).into_owned(),
            emb.coords.rows(20, 5).into_owned(),
        );
        let out_geo = krige(&geo_train, &values, &geo_test, &model, 0.0).unwrap();
        let out_emb = krige(&emb_train, &values, &emb_test, &model, 0.0).unwrap();
        for (a, b) in out_geo.predictions.iter().zip(&out_emb.predictions) {
            assert_abs_diff_eq!(a.mean, b.mean, epsilon = 1e-8);
            assert_abs_diff_eq!(a.sd, b.sd, epsilon = 1e-8);
        }
    }

    #[test]
    fn ns_cov_reduces_and_extends() {
        let domain = BoxRegion::from_bounds(&[[0.0, 2.0], [0.0, 2.0]]).unwrap();
        let part = Partition::vertical_split(&domain, &[1.0]).unwrap();
        let warps = [IdentityWarp, IdentityWarp];
        let model = DeformedCovModel {
            base: VariogramModel::new(1.2, 0.4, 0.5, 0.3).unwrap(),
            dim: 2,
            loglik: 0.0,
        };
        let s = Location::new_2d(0.25, 0.5);
        let s2 = Location::new_2d(1.5, 0.75);
        // default form: stationary Matérn of the Euclidean distance
        assert_abs_diff_eq!(
            ns_cov(&s, &s2, &warps, &part, &model, None, None).unwrap(),
            model.base.covariance(s.distance(&s2)),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            ns_cov(&s, &s, &warps, &part, &model, None, None).unwrap(),
            model.base.sill(),
            epsilon = 0.0
        );
        // extended form with sigma = sqrt(sill), tau = 0 equals the default
        let sill_field =
            RegionField::new(&part, vec![model.base.sill().sqrt(); 2]).unwrap();
        let tau_field = RegionField::new(&part, vec![0.0; 2]).unwrap();
        assert_abs_diff_eq!(
            ns_cov(&s, &s2, &warps, &part, &model, Some(&sill_field), Some(&tau_field)).unwrap(),
            model.base.covariance(s.distance(&s2)),
            epsilon = 1e-12
        );
        // correlation map: anchor correlates with itself at 1
        let rho = correlation_map(&s, &[s.clone(), s2.clone()], &warps, &part, &model).unwrap();
        assert_abs_diff_eq!(rho[0], 1.0, epsilon = 1e-15);
        assert!(rho[1] < 1.0 && rho[1] > -1.0);
    }
}
