//! Seeded recovery studies: simulation-based checks for the empirical
//! variogram, the likelihood fit, the registration horizon and the
//! regionally varying simulation setting.

use variowarp::dataset::SpatialDataset;
use variowarp::deformation::{cmds, warped_distance_matrix, IdentityWarp};
use variowarp::geometry::{BoxRegion, Location, Partition};
use variowarp::gp::{build_cov_matrix, grid_sites, simulate, KernelField};
use variowarp::kriging::{euclidean_distances, fit_deformed};
use variowarp::numerics::cholesky_with_jitter;
use variowarp::variogram::{
    determine_ht, empirical_variogram, fit_matern_mle, FitOptions, VariogramModel,
};

fn domain() -> BoxRegion {
    BoxRegion::from_bounds(&[[0.0, 2.0], [0.0, 2.0]]).unwrap()
}

fn whole_domain_field(ell2: f64, nu: f64) -> KernelField {
    let part = Partition::new(vec![domain()]).unwrap();
    KernelField::isotropic(part, &[ell2], &[1.0], nu).unwrap()
}

/// Range mapping between the kernel length scale and the Matérn range.
fn alpha_from_ell2(ell2: f64, nu: f64) -> f64 {
    ell2.sqrt() / (2.0 * nu.sqrt())
}

#[test]
fn empirical_variogram_tracks_truth_at_mid_range() {
    let nu: f64 = 0.5;
    let alpha = 0.25;
    let ell2 = (2.0 * nu.sqrt() * alpha).powi(2);
    let field = whole_domain_field(ell2, nu);
    let sites = grid_sites(&domain(), 30, 30).unwrap();
    let model = VariogramModel::new(1.0, alpha, nu, 0.0).unwrap();
    // average a few seeds to tame realization noise in a single-field check
    let seeds: Vec<u64> = (11u64..=22).collect();
    let n_bins = 12;
    let max_dist = 1.2;
    let mut avg = vec![0.0f64; n_bins];
    for &seed in seeds.iter() {
        let r = simulate(&sites, &field, seed).unwrap();
        let ev = empirical_variogram(&sites, &r.values, n_bins, max_dist).unwrap();
        for (a, s) in avg.iter_mut().zip(&ev.semivariances) {
            *a += s / seeds.len() as f64;
        }
    }
    let centers: Vec<f64> = (0..n_bins)
        .map(|b| (b as f64 + 0.5) * max_dist / n_bins as f64)
        .collect();
    for (c, est) in centers.iter().zip(&avg) {
        // mid-range lags (one to two and a half ranges); short lags have few
        // pairs and near-sill lags fluctuate with each realization's sample
        // variance
        if *c < 0.25 || *c > 0.63 {
            continue;
        }
        let truth = model.semivariance(*c);
        let rel = (est - truth).abs() / truth;
        assert!(
            rel < 0.15,
            "bin at {c}: estimate {est} vs truth {truth} (rel {rel})"
        );
    }
}

#[test]
fn mle_recovers_exponential_parameters() {
    // single-seed sanity with loose windows (the 20-seed median study is in
    // the acceptance suite)
    let nu: f64 = 0.5;
    let alpha = 0.3;
    let ell2 = (2.0 * nu.sqrt() * alpha).powi(2);
    let field = whole_domain_field(ell2, nu);
    let sites = grid_sites(&domain(), 22, 22).unwrap();
    let r = simulate(&sites, &field, 3).unwrap();
    let opts = FitOptions {
        fix_nu: Some(0.5),
        multistarts: 3,
        ..Default::default()
    };
    let fit = fit_matern_mle(&sites, &r.values, &opts).unwrap();
    assert!(
        fit.model.alpha > 0.15 && fit.model.alpha < 0.55,
        "alpha {}",
        fit.model.alpha
    );
    assert!(
        fit.model.sigma2 > 0.5 && fit.model.sigma2 < 1.8,
        "sigma2 {}",
        fit.model.sigma2
    );
}

#[test]
fn deformed_fit_matches_geographic_fit_for_identity_embedding() {
    let nu: f64 = 0.5;
    let field = whole_domain_field(0.18, nu);
    let sites = grid_sites(&domain(), 12, 12).unwrap();
    let r = simulate(&sites, &field, 21).unwrap();
    let opts = FitOptions {
        fix_nu: Some(0.5),
        multistarts: 3,
        ..Default::default()
    };
    let geo = fit_matern_mle(&sites, &r.values, &opts).unwrap();
    let mut coords = nalgebra::DMatrix::zeros(sites.len(), 2);
    for (i, s) in sites.iter().enumerate() {
        coords[(i, 0)] = s.coords()[0];
        coords[(i, 1)] = s.coords()[1];
    }
    let def = fit_deformed(&coords, &r.values, &opts).unwrap();
    assert!((def.base.alpha - geo.model.alpha).abs() < 1e-6);
    assert!((def.base.sigma2 - geo.model.sigma2).abs() < 1e-6);
}

/// The regionally varying setting: kernels diag(0.0400) / diag(0.1849),
/// smoothness 0.6, unit variance, 30x30 grid split at x = 1.
fn two_region_setting() -> (Partition, KernelField, Vec<Location>) {
    let part = Partition::vertical_split(&domain(), &[1.0]).unwrap();
    let field = KernelField::isotropic(part.clone(), &[0.0400, 0.1849], &[1.0, 1.0], 0.6).unwrap();
    let sites = grid_sites(&domain(), 30, 30).unwrap();
    (part, field, sites)
}

#[test]
fn two_region_covariance_is_positive_definite() {
    let (_, field, sites) = two_region_setting();
    let cov = build_cov_matrix(&sites, &field, 1e-10).unwrap();
    assert!(cholesky_with_jitter(&cov, 0.0).is_ok());
}

#[test]
fn two_region_realizations_have_unit_regional_variance() {
    let (part, field, sites) = two_region_setting();
    let mut pooled = [Vec::new(), Vec::new()];
    for seed in 0..50u64 {
        let r = simulate(&sites, &field, seed).unwrap();
        let data = SpatialDataset::new(sites.clone(), r.values).unwrap();
        for region in 0..2 {
            let sub = data.restrict_to_region(&part, region).unwrap();
            pooled[region].extend(sub.values);
        }
    }
    for (region, values) in pooled.iter().enumerate() {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(
            (var - 1.0).abs() < 0.15,
            "region {region}: pooled variance {var}"
        );
    }
}

#[test]
fn two_region_fits_order_ranges_and_bound_horizon() {
    let (part, field, sites) = two_region_setting();
    let r = simulate(&sites, &field, 5).unwrap();
    let data = SpatialDataset::new(sites.clone(), r.values).unwrap();
    let opts = FitOptions {
        fix_nu: Some(0.6),
        multistarts: 3,
        ..Default::default()
    };
    let mut models = Vec::new();
    for region in 0..2 {
        let sub = data.restrict_to_region(&part, region).unwrap();
        models.push(fit_matern_mle(&sub.sites, &sub.values, &opts).unwrap().model);
    }
    // the diag(0.1849) region has the longer fitted range
    assert!(
        models[1].alpha > models[0].alpha,
        "alphas {} vs {}",
        models[0].alpha,
        models[1].alpha
    );
    // expected ranges: alpha = l / (2 sqrt(nu))
    let a1 = alpha_from_ell2(0.0400, 0.6);
    let a2 = alpha_from_ell2(0.1849, 0.6);
    assert!((models[0].alpha / a1) > 0.5 && (models[0].alpha / a1) < 2.0);
    assert!((models[1].alpha / a2) > 0.5 && (models[1].alpha / a2) < 2.0);
    let h_t = determine_ht(&models, 0.05).unwrap();
    assert!(h_t.is_finite() && h_t > 0.0);
    assert!(h_t <= 2.0 * 2.0f64.sqrt(), "h_t {h_t} beyond the domain diameter");
}

#[test]
fn identity_embedding_roundtrip_on_two_region_grid() {
    // identity warps: embedding distances equal geographic ones, and kriging
    // distances computed from the embedding match Euclidean ones
    let (part, _, _) = two_region_setting();
    let sites = grid_sites(&domain(), 8, 8).unwrap();
    let dist = warped_distance_matrix(&sites, &part, &[IdentityWarp, IdentityWarp]).unwrap();
    let emb = cmds(&dist, 2).unwrap();
    let emb_dist = euclidean_distances(&emb.coords);
    let mut max_err = 0.0f64;
    for i in 0..sites.len() {
        for j in 0..sites.len() {
            max_err = max_err.max((emb_dist[(i, j)] - dist.values()[(i, j)]).abs());
        }
    }
    assert!(max_err < 1e-9, "distance drift {max_err}");
}
