//! Evaluation metrics and protocols: AOR, AMP@t, MMA@i, pose AUC, and the
//! pair-list benchmark driver.

mod bench;
mod pairs;
mod truth;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bench::{run_benchmark, table_row, BenchmarkOptions, BenchmarkReport, LoadedPair, MatcherFactory, PairRecord};
pub use pairs::{load_pair_list, GroundTruthFile, GroundTruthSpec, PairEntry};
pub use truth::{DepthMap, DepthProjector, GroundTruth, HomographyProjector, Projector, RelativePose};

use crate::geometry::{pose_error, ransac_with, recover_pose, GeometryError, MatchSet, Point2, RansacParams};
use crate::sam::AreaMatchCandidate;

pub const DEFAULT_AOR_SAMPLES: usize = 2000;
pub const MMA_THRESHOLDS: [f64; 3] = [1.0, 2.0, 3.0];
pub const AUC_THRESHOLDS: [f64; 3] = [5.0, 10.0, 20.0];
pub const AMP_THRESHOLD: f64 = 0.7;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no sampled point of the area has a valid projection")]
    NoValidPoints,
    #[error("empty input")]
    Empty,
    #[error("no match has a valid ground-truth projection")]
    NoValidMatches,
    #[error("{0}")]
    Format(String),
    #[error("ground truth lacks {0}")]
    MissingTruth(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Area overlap ratio: the fraction of projectable points sampled in the
/// first area that land inside the second.
pub fn aor(m: &AreaMatchCandidate, gt: &GroundTruth, sample_n: usize, seed: u64) -> Result<f64, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = (&m.a0.bbox, &m.a1.bbox);
    let (mut valid, mut inside) = (0usize, 0usize);
    // the validity mask may cover only part of the box; bound the attempts
    for _ in 0..sample_n.saturating_mul(20) {
        if valid == sample_n {
            break;
        }
        let q = Point2::new(rng.random_range(a.min_x..a.max_x), rng.random_range(a.min_y..a.max_y));
        if let Some(p) = gt.project(&q) {
            valid += 1;
            inside += usize::from(b.contains(&p));
        }
    }
    if valid == 0 {
        return Err(EvalError::NoValidPoints);
    }
    Ok(inside as f64 / valid as f64)
}

/// Fraction of overlap ratios strictly above `t`.
pub fn amp(aors: &[f64], t: f64) -> Result<f64, EvalError> {
    if aors.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(aors.iter().filter(|&&r| r > t).count() as f64 / aors.len() as f64)
}

/// Mean matching accuracy at several pixel thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mma {
    pub thresholds: Vec<f64>,
    pub fractions: Vec<f64>,
    pub valid: usize,
    /// Matches without a ground-truth projection, excluded above.
    pub invalid: usize,
}

impl Mma {
    pub fn at(&self, threshold: f64) -> Option<f64> {
        self.thresholds.iter().position(|&t| t == threshold).map(|i| self.fractions[i])
    }
}

pub fn reprojection_errors(matches: &MatchSet, gt: &GroundTruth) -> (Vec<f64>, usize) {
    let mut errors = Vec::with_capacity(matches.len());
    let mut invalid = 0;
    for c in matches.iter() {
        match gt.project(&c.q) {
            Some(p) => errors.push(p.distance(&c.p)),
            None => invalid += 1,
        }
    }
    (errors, invalid)
}

pub fn mma(matches: &MatchSet, gt: &GroundTruth, thresholds: &[f64]) -> Result<Mma, EvalError> {
    if matches.is_empty() {
        return Err(EvalError::Empty);
    }
    let (errors, invalid) = reprojection_errors(matches, gt);
    if errors.is_empty() {
        return Err(EvalError::NoValidMatches);
    }
    let fractions = thresholds
        .iter()
        .map(|&t| errors.iter().filter(|&&e| e <= t).count() as f64 / errors.len() as f64)
        .collect();
    Ok(Mma {
        thresholds: thresholds.to_vec(),
        fractions,
        valid: errors.len(),
        invalid,
    })
}

/// Normalized area under the cumulative pose-accuracy curve up to each
/// threshold, integrated exactly: each pair contributes `max(0, 1 - e/θ)`.
/// Errors are `(rotation°, translation°)`; failures are encoded as infinity.
pub fn pose_auc(errors: &[(f64, f64)], thresholds: &[f64]) -> Vec<f64> {
    if errors.is_empty() {
        return vec![0.0; thresholds.len()];
    }
    thresholds
        .iter()
        .map(|&t| {
            errors
                .iter()
                .map(|&(r, tr)| {
                    let e = r.max(tr);
                    if e.is_nan() {
                        0.0
                    } else {
                        (1.0 - e / t).max(0.0)
                    }
                })
                .sum::<f64>()
                / errors.len() as f64
        })
        .collect()
}

/// Area of the convex hull of the points (monotone chain).
pub fn convex_hull_area(points: &[Point2]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.iter().filter(|p| p.is_finite()).map(|p| (p.x, p.y)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return 0.0;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    let n = hull.len();
    (0..n)
        .map(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum::<f64>()
        .abs()
        / 2.0
}

/// Relative pose from matches (robust fundamental matrix, then the
/// essential decomposition with the known intrinsics), compared with the
/// true pose as `(rotation°, translation°)`.
pub fn estimate_pose_error(matches: &MatchSet, gt: &GroundTruth, seed: u64) -> Result<(f64, f64), EvalError> {
    let (k0, k1) = gt.intrinsics().ok_or(EvalError::MissingTruth("intrinsics"))?;
    let truth = gt.pose.ok_or(EvalError::MissingTruth("pose"))?.estimate()?;
    let params = RansacParams {
        seed,
        ..RansacParams::default()
    };
    let (f, inliers) = ransac_with(matches, &params)?;
    let est = recover_pose(&f, &k0, &k1, &inliers)?;
    Ok(pose_error(&est, &truth))
}

fn key(v: f64) -> String {
    format!("{v}")
}

/// Per-pair raw measurements feeding [`MetricReport::aggregate`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub matches: usize,
    #[serde(skip)]
    pub reprojection_errors: Vec<f64>,
    pub invalid_projections: usize,
    pub aor: Vec<f64>,
    /// `(rotation°, translation°)`; `None` when pose estimation failed.
    pub pose_error: Option<(f64, f64)>,
}

/// Aggregated metrics over a benchmark sweep.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub pairs: usize,
    pub failed_pairs: usize,
    /// MMA over all pooled matches, keyed by pixel threshold.
    pub mma: BTreeMap<String, f64>,
    pub mma_invalid: usize,
    pub aor: Vec<f64>,
    pub amp: BTreeMap<String, f64>,
    pub pose_auc: BTreeMap<String, f64>,
    pub matches: usize,
    pub area_matches: usize,
}

impl MetricReport {
    /// Builds a report from per-pair outcomes; pair order does not matter
    /// beyond the order of the `aor` list.
    pub fn aggregate(outcomes: &[PairOutcome]) -> Self {
        let mut report = MetricReport {
            pairs: outcomes.len(),
            ..Default::default()
        };
        if outcomes.is_empty() {
            return report;
        }
        let mut errors = Vec::new();
        let mut pose_errors = Vec::new();
        for o in outcomes {
            report.failed_pairs += usize::from(o.error.is_some());
            errors.extend_from_slice(&o.reprojection_errors);
            report.mma_invalid += o.invalid_projections;
            report.aor.extend_from_slice(&o.aor);
            report.matches += o.matches;
            report.area_matches += o.aor.len();
            pose_errors.push(o.pose_error.unwrap_or((f64::INFINITY, f64::INFINITY)));
        }
        for &t in &MMA_THRESHOLDS {
            let frac = if errors.is_empty() {
                0.0
            } else {
                errors.iter().filter(|&&e| e <= t).count() as f64 / errors.len() as f64
            };
            report.mma.insert(key(t), frac);
        }
        if let Ok(v) = amp(&report.aor, AMP_THRESHOLD) {
            report.amp.insert(key(AMP_THRESHOLD), v);
        }
        for (t, v) in AUC_THRESHOLDS.iter().zip(pose_auc(&pose_errors, &AUC_THRESHOLDS)) {
            report.pose_auc.insert(key(*t), v);
        }
        report
    }

    pub fn mma_at(&self, t: f64) -> Option<f64> {
        self.mma.get(&key(t)).copied()
    }

    pub fn auc_at(&self, t: f64) -> Option<f64> {
        self.pose_auc.get(&key(t)).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::geometry::Correspondence;
    use crate::sam::{Area, AreaKind, MatchStatus};
    use crate::semantic::BBox;

    struct Shift(f64, f64);

    impl Projector for Shift {
        fn project(&self, q: &Point2) -> Option<Point2> {
            Some(Point2::new(q.x + self.0, q.y + self.1))
        }
    }

    fn gt(dx: f64, dy: f64) -> GroundTruth {
        GroundTruth {
            pose: None,
            k0: None,
            k1: None,
            projector: Arc::new(Shift(dx, dy)),
        }
    }

    fn candidate(a: BBox, b: BBox) -> AreaMatchCandidate {
        AreaMatchCandidate {
            a0: Area::new(0, a, AreaKind::Soa, Some(1)),
            a1: Area::new(0, b, AreaKind::Soa, Some(1)),
            kind: AreaKind::Soa,
            desc_distance: 0.0,
            status: MatchStatus::Accepted,
        }
    }

    #[test]
    fn aor_identity_and_disjoint() {
        let b = BBox::new(10.0, 10.0, 50.0, 40.0);
        assert_eq!(aor(&candidate(b, b), &gt(0.0, 0.0), 500, 1).unwrap(), 1.0);
        let far = BBox::new(200.0, 200.0, 240.0, 230.0);
        assert_eq!(aor(&candidate(b, far), &gt(0.0, 0.0), 500, 1).unwrap(), 0.0);
    }

    #[test]
    fn amp_is_strict() {
        assert_eq!(amp(&[0.9, 0.5], 0.7).unwrap(), 0.5);
        assert_eq!(amp(&[0.7], 0.7).unwrap(), 0.0);
        assert!(matches!(amp(&[], 0.7), Err(EvalError::Empty)));
    }

    #[test]
    fn mma_half_offset() {
        let ms = MatchSet::new((0..10).map(|i| {
            let q = Point2::new(i as f64, 0.0);
            let off = if i % 2 == 0 { 0.0 } else { 2.5 };
            Correspondence::new(q, Point2::new(q.x + off, 0.0))
        }));
        let m = mma(&ms, &gt(0.0, 0.0), &MMA_THRESHOLDS).unwrap();
        assert_eq!(m.fractions, vec![0.5, 0.5, 1.0]);
    }

    #[test]
    fn auc_closed_forms() {
        assert_eq!(pose_auc(&[(5.0, 1.0)], &[10.0]), vec![0.5]);
        assert_eq!(pose_auc(&[(0.0, 0.0); 3], &AUC_THRESHOLDS), vec![1.0; 3]);
        let inf = f64::INFINITY;
        assert_eq!(pose_auc(&[(inf, inf)], &AUC_THRESHOLDS), vec![0.0; 3]);
    }

    #[test]
    fn hull_of_square_with_interior_points() {
        let pts: Vec<Point2> = [(0.0, 0.0), (4.0, 0.0), (4.0, 3.0), (0.0, 3.0), (2.0, 1.0), (1.0, 2.0), (4.0, 1.5)]
            .iter()
            .map(|&(x, y)| Point2::new(x, y))
            .collect();
        assert_eq!(convex_hull_area(&pts), 12.0);
        assert_eq!(convex_hull_area(&pts[..2]), 0.0);
    }
}
