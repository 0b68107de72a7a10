use serde::{Deserialize, Serialize};

use super::{fit, AreaMatchEntry};
use crate::config::SgamConfig;
use crate::geometry::{sampson_set, sampson_single, FundamentalMatrix, MatchSet};
use crate::matcher::MatcherError;
use crate::sam::AreaMatchCandidate;

/// Fraction of each image covered by the union of matched areas, averaged
/// over the two images.
pub fn size_proportion(areas: &[AreaMatchCandidate], dims0: (usize, usize), dims1: (usize, usize)) -> f64 {
    if areas.is_empty() {
        return 0.0;
    }
    let cover = |(w, h): (usize, usize), side: usize| {
        if w == 0 || h == 0 {
            return 0.0;
        }
        let mut mask = vec![false; w * h];
        for m in areas {
            let b = if side == 0 { &m.a0.bbox } else { &m.a1.bbox };
            let (xs, ys) = b.pixel_range(w, h);
            for y in ys {
                mask[y * w + xs.start..y * w + xs.end].fill(true);
            }
        }
        mask.iter().filter(|&&c| c).count() as f64 / (w * h) as f64
    };
    0.5 * (cover(dims0, 0) + cover(dims1, 1))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GmcOutcome {
    pub size_proportion: f64,
    /// Whether full-image matches were gathered at all.
    pub ran: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fundamental: Option<FundamentalMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Full-image matches before filtering.
    pub candidates: usize,
    pub kept: MatchSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Collects full-image matches agreeing with the geometry of the kept areas
/// when those areas cover less than `config.t_sp` of the images.
///
/// The pooled inside-area matches give a model `F_a`; a global match is kept
/// when its Sampson distance under `F_a` is at most the mean over areas of
/// their mean Sampson distance, floored at `config.collection_tolerance`.
pub fn gmc_collect<F>(
    kept: &[AreaMatchEntry],
    dims0: (usize, usize),
    dims1: (usize, usize),
    global: F,
    config: &SgamConfig,
) -> GmcOutcome
where
    F: FnOnce() -> Result<MatchSet, MatcherError>,
{
    let candidates: Vec<AreaMatchCandidate> = kept.iter().map(|e| e.candidate.clone()).collect();
    let sp = size_proportion(&candidates, dims0, dims1);
    let mut out = GmcOutcome {
        size_proportion: sp,
        ..GmcOutcome::default()
    };
    if sp >= config.t_sp {
        return out;
    }
    let skip = |mut out: GmcOutcome, msg: String| {
        log::warn!("global match collection skipped: {msg}");
        out.warning = Some(msg);
        out
    };

    let pooled = MatchSet::new(kept.iter().flat_map(|e| e.matches.iter().copied()));
    let f = match fit(&pooled, config.gmc_ransac, &config.ransac) {
        Ok(f) => f,
        Err(e) => return skip(out, format!("pooled model: {e}")),
    };
    let means: Vec<f64> = kept
        .iter()
        .filter_map(|e| sampson_set(&f, &e.matches).ok())
        .map(|s| s.mean)
        .collect();
    if means.is_empty() {
        return skip(out, "no area could be evaluated under the pooled model".into());
    }
    let threshold = (means.iter().sum::<f64>() / means.len() as f64).max(config.collection_tolerance);
    out.fundamental = Some(f);
    out.threshold = Some(threshold);

    let global = match global() {
        Ok(m) => m,
        Err(e) => return skip(out, format!("full-image matching: {e}")),
    };
    out.ran = true;
    out.candidates = global.len();
    out.kept = global
        .iter()
        .filter(|c| sampson_single(&f, c).is_ok_and(|d| d <= threshold))
        .copied()
        .collect();
    out
}
