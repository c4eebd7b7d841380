//! Run configuration: a single TOML document driving the whole pipeline.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use variowarp::dataset::Transform;
use variowarp::geometry::{BoxRegion, Partition};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    /// Output directory; `--out` overrides.
    pub out_dir: Option<PathBuf>,
    /// Seed for simulation and the train/test split; `--seed` overrides.
    pub seed: Option<u64>,
    pub domain: DomainSection,
    pub simulate: Option<SimulateSection>,
    pub ingest: Option<IngestSection>,
    #[serde(default)]
    pub transform: TransformSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub registration: RegistrationSection,
    #[serde(default)]
    pub embedding: EmbeddingSection,
    #[serde(default)]
    pub prediction: PredictionSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simulate,
    Ingest,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    /// Bounding box `[[xmin, xmax], [ymin, ymax]]`.
    #[serde(rename = "box")]
    pub domain_box: [[f64; 2]; 2],
    /// Subregion boxes in the same form, tiling the domain.
    pub regions: Vec<[[f64; 2]; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub nx: usize,
    pub ny: usize,
    pub nu: f64,
    /// Per-region standard deviations.
    pub sigma: Vec<f64>,
    /// Per-region isotropic kernel diagonal (squared length scale).
    pub kernel_diag: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSection {
    pub path: PathBuf,
    #[serde(default = "default_x_col")]
    pub x_col: String,
    #[serde(default = "default_y_col")]
    pub y_col: String,
    #[serde(default = "default_value_col")]
    pub value_col: String,
}

fn default_x_col() -> String {
    "x".into()
}
fn default_y_col() -> String {
    "y".into()
}
fn default_value_col() -> String {
    "value".into()
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSection {
    #[serde(default)]
    pub chain: Vec<Transform>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    /// Test-set size (0 keeps everything in training).
    #[serde(default)]
    pub n_test: usize,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self { n_test: 0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub fix_nu: Option<f64>,
    #[serde(default)]
    pub with_nugget: bool,
    #[serde(default = "default_n_bins")]
    pub n_bins: usize,
    #[serde(default = "default_min_sites")]
    pub min_sites: usize,
    #[serde(default = "default_multistarts")]
    pub multistarts: usize,
}

fn default_n_bins() -> usize {
    15
}
fn default_min_sites() -> usize {
    10
}
fn default_multistarts() -> usize {
    5
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            fix_nu: None,
            with_nugget: false,
            n_bins: default_n_bins(),
            min_sites: default_min_sites(),
            multistarts: default_multistarts(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistrationSection {
    #[serde(default = "default_grid_m")]
    pub grid_m: usize,
    /// Smoothing bandwidth as a fraction of `h_t`.
    #[serde(default = "default_bandwidth_frac")]
    pub bandwidth_frac: f64,
    #[serde(default = "default_ht_rel_tol")]
    pub ht_rel_tol: f64,
    /// DP lattice step bound.
    #[serde(default = "default_max_step")]
    pub max_step: usize,
}

fn default_grid_m() -> usize {
    512
}
fn default_bandwidth_frac() -> f64 {
    0.02
}
// The horizon is where every regional variogram is numerically constant;
// the default keeps residual correlation at the 1e-4 level so the warps act
// on the whole distance range rather than only on short lags.
fn default_ht_rel_tol() -> f64 {
    1e-4
}
fn default_max_step() -> usize {
    10
}

impl Default for RegistrationSection {
    fn default() -> Self {
        Self {
            grid_m: default_grid_m(),
            bandwidth_frac: default_bandwidth_frac(),
            ht_rel_tol: default_ht_rel_tol(),
            max_step: default_max_step(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSection {
    #[serde(default = "default_psi_max")]
    pub psi_max: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_psi_max() -> usize {
    10
}
fn default_epsilon() -> f64 {
    1e-3
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        Self {
            psi_max: default_psi_max(),
            epsilon: default_epsilon(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionSection {
    /// Extra prediction grid resolution (0 disables the grid).
    #[serde(default)]
    pub grid_nx: usize,
    #[serde(default)]
    pub grid_ny: usize,
    /// Bounds of the prediction grid; the domain box when absent.
    pub grid_box: Option<[[f64; 2]; 2]>,
    /// Anchor sites for correlation-map export.
    #[serde(default)]
    pub correlation_anchors: Vec<[f64; 2]>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| CliError::Config(format!("config is not UTF-8: {e}")))?;
        let config: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("config parse: {e}")))?;
        config.validate()?;
        Ok((config, bytes))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.partition()?;
        match self.mode {
            Mode::Simulate => {
                let sim = self.simulate.as_ref().ok_or_else(|| {
                    CliError::Config("mode = \"simulate\" needs a [simulate] section".into())
                })?;
                let k = self.domain.regions.len();
                if sim.sigma.len() != k || sim.kernel_diag.len() != k {
                    return Err(CliError::Config(format!(
                        "[simulate] needs {k} sigma and kernel_diag entries (one per region)"
                    )));
                }
                if sim.nx < 2 || sim.ny < 2 {
                    return Err(CliError::Config("[simulate] grid needs nx, ny >= 2".into()));
                }
                if !(sim.nu > 0.0) {
                    return Err(CliError::Config("[simulate] nu must be > 0".into()));
                }
            }
            Mode::Ingest => {
                let ing = self.ingest.as_ref().ok_or_else(|| {
                    CliError::Config("mode = \"ingest\" needs an [ingest] section".into())
                })?;
                if !ing.path.exists() {
                    return Err(CliError::Config(format!(
                        "input file {} does not exist",
                        ing.path.display()
                    )));
                }
            }
        }
        if self.registration.grid_m < 32 {
            return Err(CliError::Config("[registration] grid_m must be >= 32".into()));
        }
        if !(self.registration.bandwidth_frac > 0.0) {
            return Err(CliError::Config(
                "[registration] bandwidth_frac must be > 0".into(),
            ));
        }
        if !(self.registration.ht_rel_tol > 0.0 && self.registration.ht_rel_tol < 1.0) {
            return Err(CliError::Config(
                "[registration] ht_rel_tol must be in (0, 1)".into(),
            ));
        }
        if (self.prediction.grid_nx == 0) != (self.prediction.grid_ny == 0) {
            return Err(CliError::Config(
                "[prediction] grid_nx and grid_ny must be set together".into(),
            ));
        }
        Ok(())
    }

    /// The run seed after an optional command-line override. Mandatory in
    /// simulate mode.
    pub fn effective_seed(&self, override_seed: Option<u64>) -> Result<u64, CliError> {
        match override_seed.or(self.seed) {
            Some(s) => Ok(s),
            None if self.mode == Mode::Simulate => Err(CliError::Config(
                "simulate mode requires a seed (config `seed` or --seed)".into(),
            )),
            None => Ok(0),
        }
    }

    pub fn partition(&self) -> Result<Partition, CliError> {
        let regions = self
            .domain
            .regions
            .iter()
            .map(|b| BoxRegion::from_bounds(b))
            .collect::<variowarp::Result<Vec<_>>>()
            .map_err(|e| CliError::Config(format!("domain regions: {e}")))?;
        let part =
            Partition::new(regions).map_err(|e| CliError::Config(format!("partition: {e}")))?;
        let domain = BoxRegion::from_bounds(&self.domain.domain_box)
            .map_err(|e| CliError::Config(format!("domain box: {e}")))?;
        if part.domain() != &domain {
            return Err(CliError::Config(
                "domain box must equal the bounding box of the regions".into(),
            ));
        }
        Ok(part)
    }
}
