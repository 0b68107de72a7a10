use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fundamental::estimate_from_slice;
use super::sampson::sampson_single;
use super::{Correspondence, FundamentalMatrix, GeometryError, MatchSet};

const SAMPLE_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacParams {
    /// Inlier threshold on the Sampson distance, squared pixels.
    pub inlier_threshold: f64,
    pub max_iters: usize,
    /// Adaptive-termination confidence.
    pub confidence: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            inlier_threshold: 1.0,
            max_iters: 2000,
            confidence: 0.999,
            seed: 0,
        }
    }
}

/// Robust fundamental-matrix fit. Deterministic for a given seed.
pub fn ransac_fundamental(
    s: &MatchSet,
    inlier_threshold: f64,
    max_iters: usize,
    seed: u64,
) -> Result<(FundamentalMatrix, MatchSet), GeometryError> {
    ransac_with(
        s,
        &RansacParams {
            inlier_threshold,
            max_iters,
            seed,
            ..RansacParams::default()
        },
    )
}

pub fn ransac_with(
    s: &MatchSet,
    params: &RansacParams,
) -> Result<(FundamentalMatrix, MatchSet), GeometryError> {
    let data = &s.matches;
    let n = data.len();
    if n < SAMPLE_SIZE {
        return Err(GeometryError::InsufficientMatches {
            got: n,
            need: SAMPLE_SIZE,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut budget = params.max_iters;
    let mut iter = 0;
    let mut sample = Vec::with_capacity(SAMPLE_SIZE);

    while iter < budget {
        iter += 1;
        sample.clear();
        sample.extend(index::sample(&mut rng, n, SAMPLE_SIZE).iter().map(|i| data[i]));
        let Ok(model) = estimate_from_slice(&sample) else {
            continue;
        };
        let (inliers, score) = score_model(&model, data, params.inlier_threshold);
        let better = match &best {
            None => true,
            Some((b, bs)) => inliers.len() > b.len() || (inliers.len() == b.len() && score < *bs),
        };
        if better {
            let ratio = inliers.len() as f64 / n as f64;
            budget = budget.min(adaptive_iterations(ratio, params.confidence).max(iter));
            best = Some((inliers, score));
        }
    }

    let inliers = match best {
        Some((b, _)) if b.len() >= SAMPLE_SIZE => b,
        _ => return Err(GeometryError::NoConsensus),
    };
    let inlier_pts: Vec<Correspondence> = inliers.iter().map(|&i| data[i]).collect();
    let refined = estimate_from_slice(&inlier_pts)?;
    let (refit_inliers, _) = score_model(&refined, data, params.inlier_threshold);
    let chosen = if refit_inliers.len() >= SAMPLE_SIZE {
        refit_inliers
    } else {
        inliers
    };
    let out = MatchSet {
        matches: chosen.iter().map(|&i| data[i]).collect(),
        source_area: s.source_area,
    };
    Ok((refined, out))
}

fn score_model(model: &FundamentalMatrix, data: &[Correspondence], thr: f64) -> (Vec<usize>, f64) {
    let mut inliers = Vec::new();
    let mut score = 0.0;
    for (i, c) in data.iter().enumerate() {
        match sampson_single(model, c) {
            Ok(d) if d < thr => {
                inliers.push(i);
                score += d;
            }
            _ => {}
        }
    }
    (inliers, score)
}

fn adaptive_iterations(inlier_ratio: f64, confidence: f64) -> usize {
    let good = inlier_ratio.powi(SAMPLE_SIZE as i32);
    if good >= 1.0 {
        return 1;
    }
    if good <= 0.0 {
        return usize::MAX;
    }
    let k = (1.0 - confidence).ln() / (1.0 - good).ln();
    if k.is_finite() {
        k.ceil() as usize
    } else {
        usize::MAX
    }
}
