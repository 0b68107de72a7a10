//! Per-pixel semantic label maps: validation, connected components,
//! windowed label histograms and pyramid subsampling.
//!
//! Label `0` is reserved for unlabeled pixels and is ignored by every
//! operation here.

mod bbox;
mod io;

pub use bbox::BBox;
pub use io::{load_label_names, load_semantic_map, save_semantic_map_png};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point2;

pub const IGNORE_LABEL: u16 = 0;

/// Labels covering less than this fraction of a window are treated as noise.
pub const HISTOGRAM_NOISE_FRACTION: f64 = 1.0 / 64.0;

#[derive(Debug, Error)]
pub enum SemanticError {
    #[error("label buffer has {got} entries, expected {width}x{height}")]
    SizeMismatch { width: usize, height: usize, got: usize },
    #[error("window does not intersect the {width}x{height} map")]
    WindowOutOfBounds { width: usize, height: usize },
    #[error("semantic map is {got:?}, paired image is {expected:?}")]
    DimensionMismatch {
        got: (usize, usize),
        expected: (usize, usize),
    },
    #[error("unsupported semantic map format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Row-major grid of `u16` labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticMap {
    width: usize,
    height: usize,
    labels: Vec<u16>,
}

impl SemanticMap {
    pub fn new(width: usize, height: usize, labels: Vec<u16>) -> Result<Self, SemanticError> {
        if labels.len() != width * height {
            return Err(SemanticError::SizeMismatch {
                width,
                height,
                got: labels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: usize, height: usize, label: u16) -> Self {
        Self {
            width,
            height,
            labels: vec![label; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u16) -> Self {
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            labels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: u16) {
        self.labels[y * self.width + x] = label;
    }

    /// Fills every pixel whose center lies in `b`.
    pub fn fill_box(&mut self, b: &BBox, label: u16) {
        let (xs, ys) = b.pixel_range(self.width, self.height);
        for y in ys {
            for x in xs.clone() {
                self.set(x, y, label);
            }
        }
    }

    pub fn bounds(&self) -> BBox {
        BBox::new(0.0, 0.0, self.width as f64, self.height as f64)
    }

    /// Distinct nonzero labels, ascending.
    pub fn distinct_labels(&self) -> Vec<u16> {
        let mut seen = vec![false; u16::MAX as usize + 1];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        (1..=u16::MAX).filter(|&l| seen[l as usize]).collect()
    }

    pub fn check_dims(&self, expected: (usize, usize)) -> Result<(), SemanticError> {
        if self.dims() != expected {
            return Err(SemanticError::DimensionMismatch {
                got: self.dims(),
                expected,
            });
        }
        Ok(())
    }
}

/// One 4-connected component of a single nonzero label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRegion {
    pub label: u16,
    pub bbox: BBox,
    pub pixel_count: usize,
    pub centroid: Point2,
}

/// 4-connected components of every nonzero label, ordered by label, then
/// top edge, then left edge.
pub fn connected_components(map: &SemanticMap) -> Vec<LabelRegion> {
    let (w, h) = map.dims();
    let mut parent: Vec<u32> = (0..(w * h) as u32).collect();

    fn find(parent: &mut [u32], mut i: u32) -> u32 {
        while parent[i as usize] != i {
            let grand = parent[parent[i as usize] as usize];
            parent[i as usize] = grand;
            i = grand;
        }
        i
    }

    fn unite(parent: &mut [u32], a: u32, b: u32) {
        let (ra, rb) = (find(parent, a), find(parent, b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[hi as usize] = lo;
        }
    }

    for y in 0..h {
        for x in 0..w {
            let l = map.get(x, y);
            if l == IGNORE_LABEL {
                continue;
            }
            let i = (y * w + x) as u32;
            if x > 0 && map.get(x - 1, y) == l {
                unite(&mut parent, i, i - 1);
            }
            if y > 0 && map.get(x, y - 1) == l {
                unite(&mut parent, i, i - w as u32);
            }
        }
    }

    struct Acc {
        label: u16,
        min_x: usize,
        min_y: usize,
        max_x: usize,
        max_y: usize,
        count: usize,
        sx: f64,
        sy: f64,
    }

    let mut accs: BTreeMap<u32, Acc> = BTreeMap::new();
    for y in 0..h {
        for x in 0..w {
            let l = map.get(x, y);
            if l == IGNORE_LABEL {
                continue;
            }
            let root = find(&mut parent, (y * w + x) as u32);
            let a = accs.entry(root).or_insert(Acc {
                label: l,
                min_x: x,
                min_y: y,
                max_x: x,
                max_y: y,
                count: 0,
                sx: 0.0,
                sy: 0.0,
            });
            a.min_x = a.min_x.min(x);
            a.min_y = a.min_y.min(y);
            a.max_x = a.max_x.max(x);
            a.max_y = a.max_y.max(y);
            a.count += 1;
            a.sx += x as f64 + 0.5;
            a.sy += y as f64 + 0.5;
        }
    }

    let mut regions: Vec<LabelRegion> = accs
        .into_values()
        .map(|a| LabelRegion {
            label: a.label,
            bbox: BBox::new(
                a.min_x as f64,
                a.min_y as f64,
                (a.max_x + 1) as f64,
                (a.max_y + 1) as f64,
            ),
            pixel_count: a.count,
            centroid: Point2::new(a.sx / a.count as f64, a.sy / a.count as f64),
        })
        .collect();
    regions.sort_by(|a, b| {
        a.label
            .cmp(&b.label)
            .then(a.bbox.min_y.total_cmp(&b.bbox.min_y))
            .then(a.bbox.min_x.total_cmp(&b.bbox.min_x))
    });
    regions
}

/// Fraction of each label among the nonzero pixels of `window`, after
/// dropping labels that cover less than 1/64 of the (clipped) window.
pub fn semantic_histogram(
    map: &SemanticMap,
    window: &BBox,
) -> Result<BTreeMap<u16, f64>, SemanticError> {
    let (xs, ys) = window.pixel_range(map.width, map.height);
    if xs.is_empty() || ys.is_empty() {
        return Err(SemanticError::WindowOutOfBounds {
            width: map.width,
            height: map.height,
        });
    }
    let mut counts: BTreeMap<u16, usize> = BTreeMap::new();
    for y in ys.clone() {
        let row = &map.labels[y * map.width..(y + 1) * map.width];
        for &l in &row[xs.clone()] {
            if l != IGNORE_LABEL {
                *counts.entry(l).or_insert(0) += 1;
            }
        }
    }
    let window_pixels = xs.len() * ys.len();
    Ok(filter_and_normalize(counts, window_pixels))
}

/// Drops labels below the noise fraction of `window_pixels` and normalizes
/// the remaining counts to sum to one.
pub(crate) fn filter_and_normalize(
    counts: impl IntoIterator<Item = (u16, usize)>,
    window_pixels: usize,
) -> BTreeMap<u16, f64> {
    let kept: Vec<(u16, usize)> = counts
        .into_iter()
        .filter(|&(_, c)| c > 0 && (c as f64) >= window_pixels as f64 * HISTOGRAM_NOISE_FRACTION)
        .collect();
    let total: usize = kept.iter().map(|&(_, c)| c).sum();
    kept.into_iter()
        .map(|(l, c)| (l, c as f64 / total as f64))
        .collect()
}

/// Nearest-neighbor subsampling keeping the top-left pixel of each block.
pub fn downsample(map: &SemanticMap, ratio: usize) -> SemanticMap {
    let ratio = ratio.max(1);
    if ratio == 1 {
        return map.clone();
    }
    let w = map.width.div_ceil(ratio);
    let h = map.height.div_ceil(ratio);
    SemanticMap::from_fn(w, h, |x, y| map.get(x * ratio, y * ratio))
}

/// Per-label summed-area tables for O(1) window counts.
pub(crate) struct LabelIntegral {
    width: usize,
    height: usize,
    labels: Vec<u16>,
    /// one `(width+1) x (height+1)` table per label
    tables: Vec<Vec<u32>>,
}

impl LabelIntegral {
    pub(crate) fn new(map: &SemanticMap) -> Self {
        let labels = map.distinct_labels();
        let (w, h) = map.dims();
        let stride = w + 1;
        let mut tables = Vec::with_capacity(labels.len());
        for &l in &labels {
            let mut t = vec![0u32; stride * (h + 1)];
            for y in 0..h {
                let mut run = 0u32;
                for x in 0..w {
                    if map.get(x, y) == l {
                        run += 1;
                    }
                    t[(y + 1) * stride + x + 1] = t[y * stride + x + 1] + run;
                }
            }
            tables.push(t);
        }
        Self {
            width: w,
            height: h,
            labels,
            tables,
        }
    }

    pub(crate) fn labels(&self) -> &[u16] {
        &self.labels
    }

    /// Label counts inside the pixel rectangle `[x0, x1) x [y0, y1)`.
    pub(crate) fn counts(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> impl Iterator<Item = (u16, usize)> + '_ {
        let x1 = x1.min(self.width);
        let y1 = y1.min(self.height);
        let stride = self.width + 1;
        self.labels.iter().zip(&self.tables).map(move |(&l, t)| {
            let c = t[y1 * stride + x1] + t[y0 * stride + x0] - t[y0 * stride + x1] - t[y1 * stride + x0];
            (l, c as usize)
        })
    }
}
