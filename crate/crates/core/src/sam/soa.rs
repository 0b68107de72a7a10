use serde::{Deserialize, Serialize};

use super::assign::assign;
use super::{Area, AreaKind, AreaMatches, LabelSpace};
use crate::config::SgamConfig;
use crate::semantic::{connected_components, BBox, SemanticMap, IGNORE_LABEL};

/// Surrounding-label bits per side, laid out `top ‖ right ‖ bottom ‖ left`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoaDescriptor {
    pub bits: Vec<bool>,
}

impl SoaDescriptor {
    pub fn side(&self, side: usize) -> &[bool] {
        let n = self.bits.len() / 4;
        &self.bits[side * n..(side + 1) * n]
    }

    /// Fraction of differing bits.
    pub fn hamming(&self, other: &SoaDescriptor) -> f64 {
        assert_eq!(self.bits.len(), other.bits.len(), "descriptors from different label spaces");
        if self.bits.is_empty() {
            return 0.0;
        }
        let diff = self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count();
        diff as f64 / self.bits.len() as f64
    }
}

pub const SIDE_TOP: usize = 0;
pub const SIDE_RIGHT: usize = 1;
pub const SIDE_BOTTOM: usize = 2;
pub const SIDE_LEFT: usize = 3;

/// One object area per (merged) connected component.
pub fn detect_soa(map: &SemanticMap, config: &SgamConfig) -> Vec<Area> {
    let min_pixels = (map.width() * map.height()) as f64 * config.soa_min_fraction;
    let regions: Vec<_> = connected_components(map)
        .into_iter()
        .filter(|r| r.pixel_count as f64 >= min_pixels)
        .collect();

    // union-find over same-label components with close centers
    let mut parent: Vec<usize> = (0..regions.len()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..regions.len() {
        for j in (i + 1)..regions.len() {
            if regions[i].label != regions[j].label {
                continue;
            }
            let d = regions[i].bbox.center().distance(&regions[j].bbox.center());
            if d < config.merge_distance {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }

    let mut groups: Vec<(usize, BBox, u16)> = Vec::new();
    for i in 0..regions.len() {
        let root = find(&mut parent, i);
        match groups.iter_mut().find(|g| g.0 == root) {
            Some(g) => g.1 = g.1.union(&regions[i].bbox),
            None => groups.push((root, regions[i].bbox, regions[i].label)),
        }
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(id, (_, bbox, label))| Area::new(id, bbox, AreaKind::Soa, Some(label)))
        .collect()
}

/// Labels met along the four sides of the area's box at every descriptor
/// scale, keeping only runs of at least `boundary_run_min` pixels.
pub fn describe_soa(map: &SemanticMap, area: &Area, config: &SgamConfig, space: &LabelSpace) -> SoaDescriptor {
    let n = space.len();
    let mut bits = vec![false; 4 * n];
    for s in config.descriptor_scales() {
        let b = area.bbox.scaled(s);
        for side in 0..4 {
            for label in side_labels(map, &b, side, config.boundary_run_min) {
                if Some(label) == area.anchor_label {
                    continue;
                }
                if let Some(k) = space.index(label) {
                    bits[side * n + k] = true;
                }
            }
        }
    }
    SoaDescriptor { bits }
}

/// Labels owning a long-enough run on one side of `b`. Sides outside the
/// image contribute nothing; partially visible sides are walked where visible.
pub(crate) fn side_labels(map: &SemanticMap, b: &BBox, side: usize, run_min: usize) -> Vec<u16> {
    let (w, h) = (map.width() as i64, map.height() as i64);
    // first and last pixel rows/cols whose centers fall inside the box
    let x0 = (b.min_x - 0.5).ceil() as i64;
    let x1 = (b.max_x - 0.5).ceil() as i64 - 1;
    let y0 = (b.min_y - 0.5).ceil() as i64;
    let y1 = (b.max_y - 0.5).ceil() as i64 - 1;
    if x1 < x0 || y1 < y0 {
        return Vec::new();
    }
    let pixels: Vec<(i64, i64)> = match side {
        SIDE_TOP => (x0..=x1).map(|x| (x, y0)).collect(),
        SIDE_RIGHT => (y0..=y1).map(|y| (x1, y)).collect(),
        SIDE_BOTTOM => (x0..=x1).map(|x| (x, y1)).collect(),
        SIDE_LEFT => (y0..=y1).map(|y| (x0, y)).collect(),
        _ => unreachable!("four sides"),
    };

    let mut found = Vec::new();
    let mut run_label: Option<u16> = None;
    let mut run_len = 0usize;
    let flush = |label: Option<u16>, len: usize, found: &mut Vec<u16>| {
        if let Some(l) = label {
            if l != IGNORE_LABEL && len >= run_min && !found.contains(&l) {
                found.push(l);
            }
        }
    };
    for (x, y) in pixels {
        let label = (x >= 0 && x < w && y >= 0 && y < h).then(|| map.get(x as usize, y as usize));
        if label.is_some() && label == run_label {
            run_len += 1;
        } else {
            flush(run_label, run_len, &mut found);
            run_label = label;
            run_len = usize::from(label.is_some());
        }
    }
    flush(run_label, run_len, &mut found);
    found
}

/// Object areas pair only with same-label areas; distance is the normalized
/// Hamming distance between surrounding descriptors.
pub fn match_soa(
    d0: &[(Area, SoaDescriptor)],
    d1: &[(Area, SoaDescriptor)],
    config: &SgamConfig,
) -> AreaMatches {
    let distances: Vec<Vec<Option<f64>>> = d0
        .iter()
        .map(|(a, da)| {
            d1.iter()
                .map(|(b, db)| (a.anchor_label == b.anchor_label).then(|| da.hamming(db)))
                .collect()
        })
        .collect();
    let areas0: Vec<Area> = d0.iter().map(|(a, _)| a.clone()).collect();
    let areas1: Vec<Area> = d1.iter().map(|(a, _)| a.clone()).collect();
    assign(&areas0, &areas1, &distances, AreaKind::Soa, config.t_h, config.t_da)
}
