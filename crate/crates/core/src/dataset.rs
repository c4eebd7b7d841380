//! Spatial observations, value transforms and seeded train/test splits.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Location, Partition};

/// Sites with one observed value each.
#[derive(Debug, Clone)]
pub struct SpatialDataset {
    pub sites: Vec<Location>,
    pub values: Vec<f64>,
}

impl SpatialDataset {
    pub fn new(sites: Vec<Location>, values: Vec<f64>) -> Result<Self> {
        if sites.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} sites vs {} values",
                sites.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite observation".into()));
        }
        Ok(Self { sites, values })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// The subset of observations lying in one region of the partition.
    pub fn restrict_to_region(&self, part: &Partition, region: usize) -> Result<SpatialDataset> {
        let mut sites = Vec::new();
        let mut values = Vec::new();
        for (s, &v) in self.sites.iter().zip(&self.values) {
            if part.region_of(s)? == region {
                sites.push(s.clone());
                values.push(v);
            }
        }
        Ok(SpatialDataset { sites, values })
    }
}

/// Value transforms applied before modeling, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Log,
    ZScore,
}

/// What was applied, with enough detail to undo it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TransformStep {
    Log,
    ZScore { mean: f64, sd: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformMeta {
    pub steps: Vec<TransformStep>,
}

impl TransformMeta {
    /// Undo the chain on a single value (inverse steps in reverse order).
    pub fn inverse_value(&self, v: f64) -> f64 {
        let mut out = v;
        for step in self.steps.iter().rev() {
            out = match step {
                TransformStep::Log => out.exp(),
                TransformStep::ZScore { mean, sd } => out * sd + mean,
            };
        }
        out
    }

    /// Multiplicative scale the chain applied to spreads (for mapping
    /// predictive standard deviations back; the log step has no global
    /// inverse scale and is reported as-is).
    pub fn sd_scale(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| match s {
                TransformStep::Log => 1.0,
                TransformStep::ZScore { sd, .. } => 1.0 / sd,
            })
            .product::<f64>()
            .recip()
    }
}

/// Apply `log` and/or `z-score` in the configured order.
pub fn apply_transforms(
    data: &SpatialDataset,
    chain: &[Transform],
) -> Result<(SpatialDataset, TransformMeta)> {
    let mut values = data.values.clone();
    let mut meta = TransformMeta::default();
    for t in chain {
        match t {
            Transform::Log => {
                let bad: Vec<usize> = values
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v <= 0.0)
                    .map(|(i, _)| i)
                    .collect();
                if !bad.is_empty() {
                    return Err(Error::InvalidParameter(format!(
                        "log transform needs positive values; offending site indices {bad:?}"
                    )));
                }
                for v in &mut values {
                    *v = v.ln();
                }
                meta.steps.push(TransformStep::Log);
            }
            Transform::ZScore => {
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                let sd = var.sqrt();
                if !(sd > 0.0) {
                    return Err(Error::DegenerateStatistic(
                        "z-score of a constant field".into(),
                    ));
                }
                for v in &mut values {
                    *v = (*v - mean) / sd;
                }
                meta.steps.push(TransformStep::ZScore { mean, sd });
            }
        }
    }
    Ok((
        SpatialDataset {
            sites: data.sites.clone(),
            values,
        },
        meta,
    ))
}

/// Seeded uniform split without replacement: `n_test` sites become the test
/// set (in original site order), the rest the training set.
pub fn split(
    data: &SpatialDataset,
    seed: u64,
    n_test: usize,
) -> Result<(SpatialDataset, SpatialDataset)> {
    let n = data.len();
    if n_test >= n {
        return Err(Error::InvalidParameter(format!(
            "n_test = {n_test} must be smaller than n = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, n_test).into_vec();
    picked.sort_unstable();
    let mut is_test = vec![false; n];
    for &i in &picked {
        is_test[i] = true;
    }
    let take = |flag: bool| -> SpatialDataset {
        let mut sites = Vec::new();
        let mut values = Vec::new();
        for i in 0..n {
            if is_test[i] == flag {
                sites.push(data.sites[i].clone());
                values.push(data.values[i]);
            }
        }
        SpatialDataset { sites, values }
    };
    Ok((take(false), take(true)))
}
