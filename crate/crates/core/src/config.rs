use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::RansacParams;

#[derive(Debug, Error, PartialEq)]
#[error("invalid configuration: {field} = {value} ({reason})")]
pub struct ConfigError {
    pub field: &'static str,
    pub value: String,
    pub reason: &'static str,
}

/// Every threshold and size used by the area-matching pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgamConfig {
    /// Maximum normalized Hamming distance for an object-area match.
    pub t_h: f64,
    /// Maximum L2 descriptor distance for an intersection-area match.
    pub t_l: f64,
    /// Candidates closer than this in descriptor distance are ambiguous.
    pub t_da: f64,
    /// Weight on the mean self-consistency in the rejection threshold.
    pub phi: f64,
    /// Size-proportion gate below which global matches are collected.
    pub t_sp: f64,
    /// Top-layer reduction of the semantic pyramid.
    pub pyramid_ratio: usize,
    pub multiscale_ratios: Vec<f64>,
    /// Same-label object areas with centers closer than this are fused (px).
    pub merge_distance: f64,
    /// Side of the square matcher input (px).
    pub default_area_size: u32,
    pub gp_enumeration_cap: usize,
    pub ransac: RansacParams,
    pub max_correspondences: usize,
    /// Components smaller than this fraction of the image are dropped.
    pub soa_min_fraction: f64,
    /// Minimum contiguous run for a label to count on an area side (px).
    pub boundary_run_min: usize,
    /// Minimum inside-area matches for a fundamental matrix.
    pub min_area_matches: usize,
    /// Estimate per-area fundamental matrices with RANSAC instead of plain 8-point.
    pub inside_area_ransac: bool,
    /// Estimate the pooled global-collection model with RANSAC.
    pub gmc_ransac: bool,
    /// Cross-area Sampson distance (px²) regarded as consistent; floors the
    /// rejection threshold.
    pub rejection_tolerance: f64,
    /// Floor (px²) of the global-collection threshold.
    pub collection_tolerance: f64,
    /// Detect intersection areas in addition to object areas.
    pub sia_enabled: bool,
}

impl Default for SgamConfig {
    fn default() -> Self {
        Self {
            t_h: 0.5,
            t_l: 0.75,
            t_da: 0.2,
            phi: 1.0,
            t_sp: 0.3,
            pyramid_ratio: 8,
            multiscale_ratios: vec![0.8, 1.2, 1.4],
            merge_distance: 100.0,
            default_area_size: 480,
            gp_enumeration_cap: 720,
            ransac: RansacParams::default(),
            max_correspondences: 500,
            soa_min_fraction: 0.01,
            boundary_run_min: 20,
            min_area_matches: 8,
            inside_area_ransac: false,
            gmc_ransac: true,
            rejection_tolerance: 16.0,
            collection_tolerance: 4.0,
            sia_enabled: true,
        }
    }
}

impl SgamConfig {
    /// Indoor preset: stricter rejection, higher collection gate, 256 px areas.
    pub fn indoor() -> Self {
        Self {
            phi: 0.5,
            t_sp: 0.6,
            default_area_size: 256,
            ..Self::default()
        }
    }

    /// Scales at which area descriptors are built: `{1.0} ∪ multiscale_ratios`.
    pub fn descriptor_scales(&self) -> Vec<f64> {
        let mut s = vec![1.0];
        for &r in &self.multiscale_ratios {
            if !s.iter().any(|x| (x - r).abs() < 1e-12) {
                s.push(r);
            }
        }
        s
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn bad(field: &'static str, value: impl ToString, reason: &'static str) -> ConfigError {
            ConfigError {
                field,
                value: value.to_string(),
                reason,
            }
        }
        let unit = |field: &'static str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(bad(field, v, "must lie in [0, 1]"))
            }
        };
        unit("t_h", self.t_h)?;
        unit("t_da", self.t_da)?;
        unit("t_sp", self.t_sp)?;
        unit("soa_min_fraction", self.soa_min_fraction)?;
        if !(self.t_l >= 0.0 && self.t_l <= 8f64.sqrt()) {
            return Err(bad("t_l", self.t_l, "must lie in [0, 2√2]"));
        }
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            return Err(bad("phi", self.phi, "must be positive"));
        }
        if self.pyramid_ratio == 0 {
            return Err(bad("pyramid_ratio", self.pyramid_ratio, "must be at least 1"));
        }
        if self.multiscale_ratios.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(bad("multiscale_ratios", format!("{:?}", self.multiscale_ratios), "ratios must be positive"));
        }
        if !(self.merge_distance >= 0.0) {
            return Err(bad("merge_distance", self.merge_distance, "must be non-negative"));
        }
        if !(16..=4096).contains(&self.default_area_size) {
            return Err(bad("default_area_size", self.default_area_size, "must lie in [16, 4096]"));
        }
        if self.gp_enumeration_cap == 0 {
            return Err(bad("gp_enumeration_cap", 0, "must be at least 1"));
        }
        if self.max_correspondences == 0 {
            return Err(bad("max_correspondences", 0, "must be at least 1"));
        }
        if self.min_area_matches < 8 {
            return Err(bad("min_area_matches", self.min_area_matches, "fundamental matrix needs 8"));
        }
        if !(self.ransac.inlier_threshold > 0.0) || self.ransac.max_iters == 0 {
            return Err(bad("ransac", format!("{:?}", self.ransac), "threshold and iterations must be positive"));
        }
        if !(self.ransac.confidence > 0.0 && self.ransac.confidence < 1.0) {
            return Err(bad("ransac.confidence", self.ransac.confidence, "must lie in (0, 1)"));
        }
        if !(self.rejection_tolerance >= 0.0 && self.rejection_tolerance.is_finite()) {
            return Err(bad("rejection_tolerance", self.rejection_tolerance, "must be non-negative"));
        }
        if !(self.collection_tolerance >= 0.0 && self.collection_tolerance.is_finite()) {
            return Err(bad("collection_tolerance", self.collection_tolerance, "must be non-negative"));
        }
        Ok(())
    }
}
