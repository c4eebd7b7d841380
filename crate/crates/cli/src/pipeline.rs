//! Staged pipeline: data -> transform -> split -> regional fits ->
//! registration -> embedding -> kriging -> scores -> manifest.
//!
//! Each stage appends its artifacts before the next starts, so a failing
//! stage leaves everything produced so far on disk and reports its name.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;

use variowarp::dataset::{apply_transforms, split, SpatialDataset, TransformMeta};
use variowarp::deformation::{
    cmds, select_dimension, warped_distance_matrix, DeformedEmbedding,
};
use variowarp::geometry::{BoxRegion, Location, Partition};
use variowarp::gp::{grid_sites, simulate, KernelField};
use variowarp::kriging::{
    correlation_map, fit_deformed, krige, DeformedCovModel, Prediction,
};
use variowarp::registration::{
    register_set, smooth_and_extend, standardize, RegistrationOptions, WarpingFunction,
};
use variowarp::scoring::{score_report, ScoreReport};
use variowarp::variogram::{
    determine_ht, empirical_variogram, fit_matern_mle, sample_on_grid, FitOptions,
    FittedVariogram,
};

use crate::config::{Mode, RunConfig};
use crate::export;
use crate::ingest::ingest_csv;
use crate::manifest::{artifact_entry, sha256_hex, RunManifest, StageTiming};
use crate::CliError;

/// How far the pipeline runs (one value per CLI subcommand).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StopAfter {
    Simulate,
    FitVariograms,
    Register,
    Embed,
    Krige,
    Score,
    Full,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct FittedModelRecord {
    pub region_id: usize,
    pub sigma2: f64,
    pub alpha: f64,
    pub nu: f64,
    pub nugget: f64,
    pub loglik: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct DeformedModelRecord {
    pub sigma2: f64,
    pub alpha: f64,
    pub nu: f64,
    pub nugget: f64,
    pub loglik: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RegistrationRecord {
    pub h_t: f64,
    pub bandwidth: f64,
    pub grid_m: usize,
    pub iterations: usize,
    pub converged: bool,
    pub regions: usize,
}

/// Everything a run produced, kept in memory for tests and reporting.
pub struct PipelineResult {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub partition: Partition,
    pub transform_meta: TransformMeta,
    pub train: SpatialDataset,
    pub test: SpatialDataset,
    pub grid: Vec<Location>,
    pub n_dropped: usize,
    pub duplicate_sites: bool,
    pub regional_fits: Vec<FittedVariogram>,
    pub h_t: Option<f64>,
    pub warps: Vec<WarpingFunction>,
    pub registration: Option<RegistrationRecord>,
    pub psi_star: Option<usize>,
    pub nmse_curve: Vec<(usize, f64)>,
    pub embedding: Option<DeformedEmbedding>,
    pub deformed_model: Option<DeformedCovModel>,
    pub stationary_model: Option<FittedVariogram>,
    pub ns_predictions: Vec<Prediction>,
    pub stat_predictions: Vec<Prediction>,
    pub variance_clamps: usize,
    pub scores_stationary: Option<ScoreReport>,
    pub scores_nonstationary: Option<ScoreReport>,
    pub manifest: Option<RunManifest>,
}

fn numerical(stage: &str) -> impl Fn(variowarp::Error) -> CliError + '_ {
    move |e| CliError::Numerical(format!("stage {stage}: {e}"))
}

fn locations_to_coords(sites: &[Location]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(sites.len(), 2);
    for (i, s) in sites.iter().enumerate() {
        m[(i, 0)] = s.coords()[0];
        m[(i, 1)] = s.coords()[1];
    }
    m
}

pub fn run_pipeline(
    config: &RunConfig,
    config_bytes: &[u8],
    out_override: Option<PathBuf>,
    seed_override: Option<u64>,
    stop: StopAfter,
    verbose: bool,
) -> Result<PipelineResult, CliError> {
    let out_dir = out_override
        .or_else(|| config.out_dir.clone())
        .ok_or_else(|| CliError::Config("no output directory (config out_dir or --out)".into()))?;
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Io(format!("create {}: {e}", out_dir.display())))?;
    let seed = config.effective_seed(seed_override)?;
    let partition = config.partition()?;
    let mut timings: Vec<StageTiming> = Vec::new();
    let mut artifacts: Vec<String> = Vec::new();
    let log = |stage: &str, timings: &mut Vec<StageTiming>, t0: Instant| {
        let millis = t0.elapsed().as_millis();
        timings.push(StageTiming {
            stage: stage.into(),
            millis,
        });
        if verbose {
            eprintln!("[variowarp] stage {stage}: {millis} ms");
        }
    };

    // data
    let t0 = Instant::now();
    let (raw_data, n_dropped) = match config.mode {
        Mode::Simulate => {
            let sim = config.simulate.as_ref().expect("validated");
            let domain = BoxRegion::from_bounds(&config.domain.domain_box)
                .map_err(numerical("data"))?;
            let sites = grid_sites(&domain, sim.nx, sim.ny).map_err(numerical("data"))?;
            let field = KernelField::isotropic(
                partition.clone(),
                &sim.kernel_diag,
                &sim.sigma,
                sim.nu,
            )
            .map_err(numerical("data"))?;
            let realization = simulate(&sites, &field, seed).map_err(numerical("data"))?;
            export::realization_csv(&out_dir, "realization.csv", &sites, &realization.values)?;
            artifacts.push("realization.csv".into());
            (
                SpatialDataset::new(sites, realization.values).map_err(numerical("data"))?,
                0usize,
            )
        }
        Mode::Ingest => {
            let ing = config.ingest.as_ref().expect("validated");
            let report = ingest_csv(&ing.path, ing)?;
            (report.data, report.n_dropped)
        }
    };
    log("data", &mut timings, t0);

    // transform + split
    let t0 = Instant::now();
    let (data, transform_meta) =
        apply_transforms(&raw_data, &config.transform.chain).map_err(numerical("transform"))?;
    let (train, test) = split(&data, seed, config.split.n_test).map_err(numerical("split"))?;
    log("transform-split", &mut timings, t0);

    let grid: Vec<Location> = if config.prediction.grid_nx > 0 {
        let bounds = config.prediction.grid_box.unwrap_or(config.domain.domain_box);
        let gbox = BoxRegion::from_bounds(&bounds).map_err(numerical("data"))?;
        grid_sites(&gbox, config.prediction.grid_nx, config.prediction.grid_ny)
            .map_err(numerical("data"))?
    } else {
        Vec::new()
    };

    let mut result = PipelineResult {
        out_dir: out_dir.clone(),
        seed,
        partition: partition.clone(),
        transform_meta,
        train,
        test,
        grid,
        n_dropped,
        duplicate_sites: false,
        regional_fits: Vec::new(),
        h_t: None,
        warps: Vec::new(),
        registration: None,
        psi_star: None,
        nmse_curve: Vec::new(),
        embedding: None,
        deformed_model: None,
        stationary_model: None,
        ns_predictions: Vec::new(),
        stat_predictions: Vec::new(),
        variance_clamps: 0,
        scores_stationary: None,
        scores_nonstationary: None,
        manifest: None,
    };
    if stop == StopAfter::Simulate {
        return Ok(result);
    }

    // regional fits
    let t0 = Instant::now();
    let fit_opts = FitOptions {
        fix_nu: config.fit.fix_nu,
        with_nugget: config.fit.with_nugget,
        min_sites: config.fit.min_sites,
        multistarts: config.fit.multistarts,
        ..Default::default()
    };
    let mut records = Vec::new();
    for region in 0..partition.k() {
        let sub = result
            .train
            .restrict_to_region(&partition, region)
            .map_err(numerical("fit-variograms"))?;
        let fit =
            fit_matern_mle(&sub.sites, &sub.values, &fit_opts).map_err(numerical("fit-variograms"))?;
        let max_dist = partition.regions()[region].diameter() / 2.0;
        let ev = empirical_variogram(&sub.sites, &sub.values, config.fit.n_bins, max_dist)
            .map_err(numerical("fit-variograms"))?;
        let name = format!("empirical_variogram_region_{region}.csv");
        export::empirical_variogram_csv(&out_dir, &name, &ev)?;
        artifacts.push(name);
        records.push(FittedModelRecord {
            region_id: region,
            sigma2: fit.model.sigma2,
            alpha: fit.model.alpha,
            nu: fit.model.nu,
            nugget: fit.model.nugget,
            loglik: fit.loglik,
        });
        result.regional_fits.push(fit);
    }
    export::write_json(&out_dir, "fitted_models.json", &records)?;
    artifacts.push("fitted_models.json".into());
    log("fit-variograms", &mut timings, t0);
    if stop == StopAfter::FitVariograms {
        return Ok(result);
    }

    // registration
    let t0 = Instant::now();
    let models: Vec<_> = result.regional_fits.iter().map(|f| f.model).collect();
    let h_t =
        determine_ht(&models, config.registration.ht_rel_tol).map_err(numerical("register"))?;
    let mut standardized = Vec::with_capacity(models.len());
    for model in &models {
        let sampled = sample_on_grid(model, h_t, config.registration.grid_m)
            .map_err(numerical("register"))?;
        let (curve, _, _) = standardize(&sampled).map_err(numerical("register"))?;
        standardized.push(curve);
    }
    let reg_opts = RegistrationOptions {
        max_step: config.registration.max_step,
        ..Default::default()
    };
    let reg = register_set(&standardized, &reg_opts).map_err(numerical("register"))?;
    let bandwidth = config.registration.bandwidth_frac * h_t;
    for (region, raw) in reg.warps.iter().enumerate() {
        let warp = smooth_and_extend(raw, bandwidth).map_err(numerical("register"))?;
        let name = format!("warp_region_{region}.csv");
        export::warp_csv(&out_dir, &name, &warp)?;
        artifacts.push(name);
        result.warps.push(warp);
    }
    let reg_record = RegistrationRecord {
        h_t,
        bandwidth,
        grid_m: config.registration.grid_m,
        iterations: reg.iterations,
        converged: reg.converged,
        regions: partition.k(),
    };
    export::write_json(&out_dir, "registration.json", &reg_record)?;
    artifacts.push("registration.json".into());
    result.h_t = Some(h_t);
    result.registration = Some(reg_record);
    log("register", &mut timings, t0);
    if stop == StopAfter::Register {
        return Ok(result);
    }

    // embedding
    let t0 = Instant::now();
    let mut all_sites: Vec<Location> = result.train.sites.clone();
    all_sites.extend(result.test.sites.iter().cloned());
    all_sites.extend(result.grid.iter().cloned());
    let dist = warped_distance_matrix(&all_sites, &partition, &result.warps)
        .map_err(numerical("embed"))?;
    result.duplicate_sites = dist.has_duplicates();
    let (psi_star, curve) =
        select_dimension(&dist, config.embedding.psi_max, config.embedding.epsilon)
            .map_err(numerical("embed"))?;
    let d_geo = all_sites[0].dim();
    let embedding = cmds(&dist, d_geo + psi_star).map_err(numerical("embed"))?;
    export::nmse_curve_csv(&out_dir, "nmse_curve.csv", &curve)?;
    artifacts.push("nmse_curve.csv".into());
    export::embedding_csv(&out_dir, "embedding.csv", &embedding, result.train.len())?;
    artifacts.push("embedding.csv".into());
    result.psi_star = Some(psi_star);
    result.nmse_curve = curve;
    result.embedding = Some(embedding);
    log("embed", &mut timings, t0);
    if stop == StopAfter::Embed {
        return Ok(result);
    }

    // kriging (needs something to predict)
    let t0 = Instant::now();
    let n_train = result.train.len();
    let target_sites: Vec<Location> = result
        .test
        .sites
        .iter()
        .chain(result.grid.iter())
        .cloned()
        .collect();
    if !target_sites.is_empty() {
        let emb = result.embedding.as_ref().expect("embed stage ran");
        let emb_train = emb.coords.rows(0, n_train).into_owned();
        let emb_targets = emb
            .coords
            .rows(n_train, target_sites.len())
            .into_owned();
        let deformed =
            fit_deformed(&emb_train, &result.train.values, &fit_opts).map_err(numerical("krige"))?;
        export::write_json(
            &out_dir,
            "deformed_model.json",
            &DeformedModelRecord {
                sigma2: deformed.base.sigma2,
                alpha: deformed.base.alpha,
                nu: deformed.base.nu,
                nugget: deformed.base.nugget,
                loglik: deformed.loglik,
                dim: deformed.dim,
            },
        )?;
        artifacts.push("deformed_model.json".into());

        let geo_train = locations_to_coords(&result.train.sites);
        let geo_targets = locations_to_coords(&target_sites);
        let stationary = fit_matern_mle(&result.train.sites, &result.train.values, &fit_opts)
            .map_err(numerical("krige"))?;
        export::write_json(
            &out_dir,
            "stationary_model.json",
            &FittedModelRecord {
                region_id: 0,
                sigma2: stationary.model.sigma2,
                alpha: stationary.model.alpha,
                nu: stationary.model.nu,
                nugget: stationary.model.nugget,
                loglik: stationary.loglik,
            },
        )?;
        artifacts.push("stationary_model.json".into());

        let ns_out = krige(
            &emb_train,
            &result.train.values,
            &emb_targets,
            &deformed.base,
            1e-10,
        )
        .map_err(numerical("krige"))?;
        let stat_out = krige(
            &geo_train,
            &result.train.values,
            &geo_targets,
            &stationary.model,
            1e-10,
        )
        .map_err(numerical("krige"))?;
        export::predictions_csv(
            &out_dir,
            "predictions_nonstationary.csv",
            &target_sites,
            n_train,
            &ns_out.predictions,
        )?;
        artifacts.push("predictions_nonstationary.csv".into());
        export::predictions_csv(
            &out_dir,
            "predictions_stationary.csv",
            &target_sites,
            n_train,
            &stat_out.predictions,
        )?;
        artifacts.push("predictions_stationary.csv".into());

        // correlation maps at configured anchors
        if !config.prediction.correlation_anchors.is_empty() {
            let map_sites: &[Location] = if result.grid.is_empty() {
                &all_sites
            } else {
                &result.grid
            };
            for (j, anchor) in config.prediction.correlation_anchors.iter().enumerate() {
                let a = Location::new_2d(anchor[0], anchor[1]);
                let rho = correlation_map(&a, map_sites, &result.warps, &partition, &deformed)
                    .map_err(numerical("krige"))?;
                let name = format!("correlation_map_{j}.csv");
                export::correlation_map_csv(&out_dir, &name, map_sites, &rho)?;
                artifacts.push(name);
            }
        }

        result.variance_clamps = ns_out.variance_clamps + stat_out.variance_clamps;
        result.deformed_model = Some(deformed);
        result.stationary_model = Some(stationary);
        result.ns_predictions = ns_out.predictions;
        result.stat_predictions = stat_out.predictions;
    }
    log("krige", &mut timings, t0);
    if stop == StopAfter::Krige {
        return Ok(result);
    }

    // scores over the held-out test set
    let t0 = Instant::now();
    if !result.test.is_empty() && !result.ns_predictions.is_empty() {
        let n_test = result.test.len();
        let take = |preds: &[Prediction]| -> (Vec<f64>, Vec<f64>) {
            (
                preds[..n_test].iter().map(|p| p.mean).collect(),
                preds[..n_test].iter().map(|p| p.sd).collect(),
            )
        };
        let (ns_mean, ns_sd) = take(&result.ns_predictions);
        let (st_mean, st_sd) = take(&result.stat_predictions);
        let ns_scores =
            score_report(&ns_mean, &ns_sd, &result.test.values).map_err(numerical("score"))?;
        let st_scores =
            score_report(&st_mean, &st_sd, &result.test.values).map_err(numerical("score"))?;
        export::scores_json(&out_dir, "scores.json", &st_scores, &ns_scores)?;
        artifacts.push("scores.json".into());
        result.scores_stationary = Some(st_scores);
        result.scores_nonstationary = Some(ns_scores);
    }
    log("score", &mut timings, t0);
    if stop == StopAfter::Score {
        return Ok(result);
    }

    // manifest
    let entries = artifacts
        .iter()
        .map(|name| artifact_entry(&out_dir, name))
        .collect::<Result<Vec<_>, _>>()?;
    let manifest = RunManifest {
        package: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sha256_hex(config_bytes),
        seed,
        created_unix_secs: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        n_sites: result.train.len() + result.test.len(),
        n_train: result.train.len(),
        n_test: result.test.len(),
        n_dropped_rows: result.n_dropped,
        duplicate_sites: result.duplicate_sites,
        h_t: result.h_t,
        psi_star: result.psi_star,
        variance_clamps: result.variance_clamps,
        artifacts: entries,
        timings,
    };
    export::write_json(&out_dir, "manifest.json", &manifest)?;
    result.manifest = Some(manifest);
    Ok(result)
}

/// Re-emit the score table of a finished run directory.
pub fn report(out_dir: &Path) -> Result<String, CliError> {
    let scores_path = out_dir.join("scores.json");
    let text = std::fs::read_to_string(&scores_path)
        .map_err(|e| CliError::Io(format!("read {}: {e}", scores_path.display())))?;
    let rows: Vec<serde_json::Value> =
        serde_json::from_str(&text).map_err(|e| CliError::Io(format!("parse scores: {e}")))?;
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:>10} {:>10} {:>10} {:>10}\n",
        "model", "MSPE", "MAE", "CRPS", "LogS"
    ));
    for row in rows {
        let g = |k: &str| row.get(k).and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
        out.push_str(&format!(
            "{:<16} {:>10.4} {:>10.4} {:>10.4} {:>10.4}\n",
            row.get("model").and_then(|v| v.as_str()).unwrap_or("?"),
            g("mspe"),
            g("mae"),
            g("crps"),
            g("logs")
        ));
    }
    if let Ok(mtext) = std::fs::read_to_string(out_dir.join("manifest.json")) {
        if let Ok(m) = serde_json::from_str::<serde_json::Value>(&mtext) {
            let seed = m.get("seed").and_then(|v| v.as_u64()).unwrap_or(0);
            let psi = m.get("psi_star").and_then(|v| v.as_u64());
            out.push_str(&format!("seed {seed}"));
            if let Some(p) = psi {
                out.push_str(&format!(", psi* = {p}"));
            }
            out.push('\n');
        }
    }
    Ok(out)
}
