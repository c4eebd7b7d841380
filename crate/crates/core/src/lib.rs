//! Nonstationary geostatistics via elastic alignment of regional variograms.
//!
//! A nonstationary field that is stationary within subregions can be made
//! globally stationary by warping inter-point distances: each region's
//! fitted variogram is elastically registered to a common template, the
//! per-region distance warps combine into a global distance function through
//! segment-length weights, the warped distances embed into a (possibly
//! higher-dimensional) deformed space by classical MDS, and kriging proceeds
//! with an isotropic Matérn model fitted there.
//!
//! Modules follow the pipeline order: [`geometry`] (partitions and segment
//! weights), [`variogram`] (Matérn evaluation and MLE), [`registration`]
//! (SRVF alignment and warp smoothing), [`deformation`] (global distances
//! and CMDS), [`gp`] (nonstationary simulation), [`kriging`] and
//! [`scoring`].

pub mod dataset;
pub mod deformation;
pub mod error;
pub mod geometry;
pub mod gp;
pub mod kriging;
pub mod numerics;
pub mod registration;
pub mod scoring;
pub mod variogram;

pub use error::{Error, Result};
