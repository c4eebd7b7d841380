//! Artifact writers. Every file is CSV or JSON with headers; floats use the
//! shortest round-trip representation so identical runs produce identical
//! bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use variowarp::deformation::DeformedEmbedding;
use variowarp::geometry::Location;
use variowarp::kriging::Prediction;
use variowarp::registration::WarpingFunction;
use variowarp::scoring::ScoreReport;
use variowarp::variogram::EmpiricalVariogram;

use crate::CliError;

fn num(v: f64) -> String {
    format!("{v}")
}

pub fn write_text(dir: &Path, name: &str, content: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| CliError::Io(format!("write {name}: {e}")))?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serialize {name}: {e}")))?;
    text.push('\n');
    write_text(dir, name, &text)
}

pub fn realization_csv(
    dir: &Path,
    name: &str,
    sites: &[Location],
    values: &[f64],
) -> Result<PathBuf, CliError> {
    let mut out = String::from("x,y,value\n");
    for (s, v) in sites.iter().zip(values) {
        let _ = writeln!(out, "{},{},{}", num(s.coords()[0]), num(s.coords()[1]), num(*v));
    }
    write_text(dir, name, &out)
}

pub fn empirical_variogram_csv(
    dir: &Path,
    name: &str,
    ev: &EmpiricalVariogram,
) -> Result<PathBuf, CliError> {
    let mut out = String::from("bin_center,semivariance,count\n");
    for i in 0..ev.bin_centers.len() {
        let _ = writeln!(
            out,
            "{},{},{}",
            num(ev.bin_centers[i]),
            num(ev.semivariances[i]),
            ev.counts[i]
        );
    }
    write_text(dir, name, &out)
}

/// One warp, sampled at its knots: `h, phi_of_h`.
pub fn warp_csv(dir: &Path, name: &str, warp: &WarpingFunction) -> Result<PathBuf, CliError> {
    let mut out = String::from("h,phi_of_h\n");
    for j in 0..warp.knot_count() {
        let _ = writeln!(out, "{},{}", num(warp.knot(j)), num(warp.warped_values()[j]));
    }
    write_text(dir, name, &out)
}

pub fn embedding_csv(
    dir: &Path,
    name: &str,
    emb: &DeformedEmbedding,
    n_observed: usize,
) -> Result<PathBuf, CliError> {
    let d = emb.coords.ncols();
    let mut out = String::from("site_id");
    for k in 1..=d {
        let _ = write!(out, ",dim_{k}");
    }
    out.push_str(",is_observed\n");
    for i in 0..emb.coords.nrows() {
        let _ = write!(out, "{i}");
        for k in 0..d {
            let _ = write!(out, ",{}", num(emb.coords[(i, k)]));
        }
        let _ = writeln!(out, ",{}", if i < n_observed { 1 } else { 0 });
    }
    write_text(dir, name, &out)
}

pub fn nmse_curve_csv(dir: &Path, name: &str, curve: &[(usize, f64)]) -> Result<PathBuf, CliError> {
    let mut out = String::from("psi,nmse\n");
    for (psi, nmse) in curve {
        let _ = writeln!(out, "{psi},{}", num(*nmse));
    }
    write_text(dir, name, &out)
}

pub fn predictions_csv(
    dir: &Path,
    name: &str,
    sites: &[Location],
    site_id_offset: usize,
    preds: &[Prediction],
) -> Result<PathBuf, CliError> {
    let mut out = String::from("site_id,x,y,mean,sd\n");
    for (s, p) in sites.iter().zip(preds) {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            site_id_offset + p.site_id,
            num(s.coords()[0]),
            num(s.coords()[1]),
            num(p.mean),
            num(p.sd)
        );
    }
    write_text(dir, name, &out)
}

pub fn correlation_map_csv(
    dir: &Path,
    name: &str,
    sites: &[Location],
    rho: &[f64],
) -> Result<PathBuf, CliError> {
    let mut out = String::from("x,y,rho\n");
    for (s, r) in sites.iter().zip(rho) {
        let _ = writeln!(out, "{},{},{}", num(s.coords()[0]), num(s.coords()[1]), num(*r));
    }
    write_text(dir, name, &out)
}

/// Score reports for both models as a JSON array.
#[derive(Debug, Serialize)]
pub struct NamedScore<'a> {
    pub model: &'a str,
    pub mspe: f64,
    pub mae: f64,
    pub crps: f64,
    pub logs: f64,
    pub n_test: usize,
}

pub fn scores_json(
    dir: &Path,
    name: &str,
    stationary: &ScoreReport,
    nonstationary: &ScoreReport,
) -> Result<PathBuf, CliError> {
    let rows = vec![
        NamedScore {
            model: "stationary",
            mspe: stationary.mspe,
            mae: stationary.mae,
            crps: stationary.crps,
            logs: stationary.logs,
            n_test: stationary.n_test,
        },
        NamedScore {
            model: "nonstationary",
            mspe: nonstationary.mspe,
            mae: nonstationary.mae,
            crps: nonstationary.crps,
            logs: nonstationary.logs,
            n_test: nonstationary.n_test,
        },
    ];
    write_json(dir, name, &rows)
}
