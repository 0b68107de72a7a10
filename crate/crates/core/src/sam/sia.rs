use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::assign::assign;
use super::{Area, AreaKind, AreaMatches, LabelSpace};
use crate::config::SgamConfig;
use crate::semantic::{
    downsample, filter_and_normalize, semantic_histogram, BBox, LabelIntegral, SemanticMap, IGNORE_LABEL,
};

/// Label proportions per quadrant, laid out `TL ‖ TR ‖ BL ‖ BR`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiaDescriptor {
    pub props: Vec<f64>,
}

impl SiaDescriptor {
    pub fn quadrant(&self, q: usize) -> &[f64] {
        let n = self.props.len() / 4;
        &self.props[q * n..(q + 1) * n]
    }

    pub fn l2(&self, other: &SiaDescriptor) -> f64 {
        assert_eq!(self.props.len(), other.props.len(), "descriptors from different label spaces");
        self.props
            .iter()
            .zip(&other.props)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Minimum number of distinct labels (after noise filtering) in an
/// intersection window.
const MIN_LABELS: usize = 4;

/// Square intersection areas of side `window` px where more than three
/// labels meet.
pub fn detect_sia(map: &SemanticMap, window: f64, config: &SgamConfig) -> Vec<Area> {
    let (w, h) = map.dims();
    let side = (window.round() as usize).clamp(1, w.min(h).max(1));
    if w == 0 || h == 0 {
        return Vec::new();
    }

    // top layer: coarse sliding window
    let r = config.pyramid_ratio.max(1);
    let top = downsample(map, r);
    let top_side = (side / r).max(1).min(top.width().min(top.height()));
    let stride = (top_side / 2).max(1);
    let top_integral = LabelIntegral::new(&top);
    let mut seeds = Vec::new();
    for ty in positions(top.height(), top_side, stride) {
        for tx in positions(top.width(), top_side, stride) {
            let counts = top_integral.counts(tx, ty, tx + top_side, ty + top_side);
            if label_count(counts, top_side * top_side) >= MIN_LABELS {
                seeds.push(((tx * r).min(w - side), (ty * r).min(h - side)));
            }
        }
    }
    if seeds.is_empty() {
        return Vec::new();
    }

    // bottom layer: variance-minimizing refinement at full resolution
    let integral = LabelIntegral::new(map);
    let n_labels = integral.labels().iter().filter(|&&l| l != IGNORE_LABEL).count();
    let mut refined: Vec<(f64, usize, usize)> = Vec::new();
    for (sx, sy) in seeds {
        let (x0, y0, var) = refine(&integral, n_labels, (sx, sy), side, (w, h));
        let counts = integral.counts(x0, y0, x0 + side, y0 + side);
        if label_count(counts, side * side) >= MIN_LABELS {
            refined.push((var, x0, y0));
        }
    }
    refined.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));
    refined.dedup_by(|a, b| a.1 == b.1 && a.2 == b.2);

    let mut kept: Vec<BBox> = Vec::new();
    for (_, x0, y0) in refined {
        let b = BBox::new(x0 as f64, y0 as f64, (x0 + side) as f64, (y0 + side) as f64);
        if kept.iter().all(|k| k.iou(&b) <= 0.5) {
            kept.push(b);
        }
    }
    kept.into_iter()
        .enumerate()
        .map(|(id, b)| Area::new(id, b, AreaKind::Sia, None))
        .collect()
}

/// Window origins covering `[0, len)` with the given stride; the last
/// window is flush with the far edge.
fn positions(len: usize, side: usize, stride: usize) -> Vec<usize> {
    if side > len {
        return Vec::new();
    }
    let mut p: Vec<usize> = (0..=len - side).step_by(stride).collect();
    if *p.last().unwrap() != len - side {
        p.push(len - side);
    }
    p
}

fn label_count(counts: impl Iterator<Item = (u16, usize)>, window_pixels: usize) -> usize {
    let nonzero = counts.filter(|&(l, _)| l != IGNORE_LABEL);
    filter_and_normalize(nonzero, window_pixels).len()
}

/// Variance of the label proportions over all `n_labels` map labels.
pub(crate) fn proportion_variance(counts: impl Iterator<Item = (u16, usize)>, n_labels: usize) -> f64 {
    let nonzero: Vec<usize> = counts.filter(|&(l, _)| l != IGNORE_LABEL).map(|(_, c)| c).collect();
    let total: usize = nonzero.iter().sum();
    if total == 0 || n_labels == 0 {
        return f64::INFINITY;
    }
    let n = n_labels as f64;
    let mean = 1.0 / n;
    let sum_sq: f64 = nonzero
        .iter()
        .map(|&c| {
            let p = c as f64 / total as f64;
            p * p
        })
        .sum();
    (sum_sq / n - mean * mean).max(0.0)
}

/// Exhaustive search of window origins within half a window of `seed`.
fn refine(
    integral: &LabelIntegral,
    n_labels: usize,
    seed: (usize, usize),
    side: usize,
    (w, h): (usize, usize),
) -> (usize, usize, f64) {
    let half = side / 2;
    let range = |s: usize, len: usize| s.saturating_sub(half)..=(s + half).min(len - side);
    let var_at = |x: usize, y: usize| proportion_variance(integral.counts(x, y, x + side, y + side), n_labels);

    let mut best = (seed.0, seed.1, var_at(seed.0, seed.1));
    let dist = |x: usize, y: usize| x.abs_diff(seed.0).pow(2) + y.abs_diff(seed.1).pow(2);
    for y in range(seed.1, h) {
        for x in range(seed.0, w) {
            let v = var_at(x, y);
            if v < best.2 || (v == best.2 && dist(x, y) < dist(best.0, best.1)) {
                best = (x, y, v);
            }
        }
    }
    best
}

/// Quadrant proportions averaged over descriptor scales; scales whose
/// quadrant holds no labeled pixel are left out of that quadrant's average.
pub fn describe_sia(map: &SemanticMap, area: &Area, config: &SgamConfig, space: &LabelSpace) -> SiaDescriptor {
    let n = space.len();
    let mut props = vec![0.0; 4 * n];
    let mut used = [0usize; 4];
    for s in config.descriptor_scales() {
        for (q, quad) in quadrants(&area.bbox.scaled(s)).iter().enumerate() {
            let hist: BTreeMap<u16, f64> = semantic_histogram(map, quad).unwrap_or_default();
            if hist.is_empty() {
                continue;
            }
            used[q] += 1;
            for (label, p) in hist {
                if let Some(k) = space.index(label) {
                    props[q * n + k] += p;
                }
            }
        }
    }
    for (q, &u) in used.iter().enumerate() {
        if u > 0 {
            for v in &mut props[q * n..(q + 1) * n] {
                *v /= u as f64;
            }
        }
    }
    SiaDescriptor { props }
}

fn quadrants(b: &BBox) -> [BBox; 4] {
    let c = b.center();
    [
        BBox::new(b.min_x, b.min_y, c.x, c.y),
        BBox::new(c.x, b.min_y, b.max_x, c.y),
        BBox::new(b.min_x, c.y, c.x, b.max_y),
        BBox::new(c.x, c.y, b.max_x, b.max_y),
    ]
}

/// Nearest neighbor by L2 over concatenated quadrant proportions.
pub fn match_sia(
    d0: &[(Area, SiaDescriptor)],
    d1: &[(Area, SiaDescriptor)],
    config: &SgamConfig,
) -> AreaMatches {
    let distances: Vec<Vec<Option<f64>>> = d0
        .iter()
        .map(|(_, a)| d1.iter().map(|(_, b)| Some(a.l2(b))).collect())
        .collect();
    let areas0: Vec<Area> = d0.iter().map(|(a, _)| a.clone()).collect();
    let areas1: Vec<Area> = d1.iter().map(|(a, _)| a.clone()).collect();
    assign(&areas0, &areas1, &distances, AreaKind::Sia, config.t_l, config.t_da)
}
