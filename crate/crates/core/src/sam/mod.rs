//! Semantic area matching.
//!
//! Object areas (SOA) are bounding boxes of labeled connected components,
//! described by which labels surround each side. Intersection areas (SIA)
//! are fixed-size windows where more than three labels meet, described by
//! per-quadrant label proportions. Both kinds are matched by nearest
//! neighbor over their descriptors; candidates that cannot be told apart
//! within `t_da` are set aside as doubtful for geometric resolution.

mod assign;
mod sia;
mod soa;

pub use sia::{describe_sia, detect_sia, match_sia, SiaDescriptor};
pub use soa::{describe_soa, detect_soa, match_soa, SoaDescriptor};

use std::hash::{DefaultHasher, Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::config::SgamConfig;
use crate::geometry::Point2;
use crate::pipeline::adjust_sia_scale;
use crate::semantic::{BBox, SemanticMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AreaKind {
    Soa,
    Sia,
}

/// A semantic area in original image coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Area {
    /// Index within its image, stable for one detection run.
    pub id: usize,
    pub bbox: BBox,
    pub kind: AreaKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_label: Option<u16>,
    pub center: Point2,
}

impl Area {
    pub fn new(id: usize, bbox: BBox, kind: AreaKind, anchor_label: Option<u16>) -> Self {
        Self {
            id,
            center: bbox.center(),
            bbox,
            kind,
            anchor_label,
        }
    }

    /// Identity derived from geometry and kind only, independent of list order.
    pub fn identity(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.kind.hash(&mut h);
        self.anchor_label.hash(&mut h);
        for v in [self.bbox.min_x, self.bbox.min_y, self.bbox.max_x, self.bbox.max_y] {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchStatus {
    Accepted,
    Doubtful,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaMatchCandidate {
    pub a0: Area,
    pub a1: Area,
    pub kind: AreaKind,
    /// Normalized Hamming distance (SOA) or L2 distance (SIA).
    pub desc_distance: f64,
    pub status: MatchStatus,
}

impl AreaMatchCandidate {
    /// Order-independent key of the pairing.
    pub fn pair_key(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.a0.identity().hash(&mut h);
        self.a1.identity().hash(&mut h);
        h.finish()
    }

    /// One JSON-lines record: `{kind, bbox0, bbox1, distance, status}`.
    pub fn dump_record(&self) -> serde_json::Value {
        let b = |b: &BBox| [b.min_x, b.min_y, b.max_x, b.max_y];
        serde_json::json!({
            "kind": self.kind,
            "bbox0": b(&self.a0.bbox),
            "bbox1": b(&self.a1.bbox),
            "distance": self.desc_distance,
            "status": self.status,
        })
    }
}

/// Union of the labels present in either map of a pair; fixes descriptor
/// layout for that pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    labels: Vec<u16>,
}

impl LabelSpace {
    pub fn from_pair(m0: &SemanticMap, m1: &SemanticMap) -> Self {
        let mut labels = m0.distinct_labels();
        labels.extend(m1.distinct_labels());
        labels.sort_unstable();
        labels.dedup();
        Self { labels }
    }

    pub fn from_labels(mut labels: Vec<u16>) -> Self {
        labels.retain(|&l| l != 0);
        labels.sort_unstable();
        labels.dedup();
        Self { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index(&self, label: u16) -> Option<usize> {
        self.labels.binary_search(&label).ok()
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }
}

/// Output of one matching stage: accepted pairs plus areas left ambiguous.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AreaMatches {
    pub accepted: Vec<AreaMatchCandidate>,
    /// Candidate pairings involved in an ambiguity, for reporting.
    pub doubtful_pairs: Vec<AreaMatchCandidate>,
    pub doubtful_a0: Vec<Area>,
    pub doubtful_a1: Vec<Area>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SamOutput {
    pub accepted: Vec<AreaMatchCandidate>,
    pub doubtful_a0: Vec<Area>,
    pub doubtful_a1: Vec<Area>,
    #[serde(default)]
    pub doubtful_pairs: Vec<AreaMatchCandidate>,
    /// Scale applied to the second image's intersection-area window.
    pub sia_scale: f64,
}

impl SamOutput {
    /// Candidates in dump order: accepted first, then doubtful pairings.
    pub fn dump_records(&self) -> Vec<serde_json::Value> {
        self.accepted
            .iter()
            .chain(&self.doubtful_pairs)
            .map(AreaMatchCandidate::dump_record)
            .collect()
    }
}

/// Object- and intersection-area matching between two semantic maps.
pub fn sam_pipeline(map0: &SemanticMap, map1: &SemanticMap, config: &SgamConfig) -> SamOutput {
    let space = LabelSpace::from_pair(map0, map1);

    let soa0 = detect_soa(map0, config);
    let soa1 = detect_soa(map1, config);
    let d0: Vec<_> = soa0.iter().map(|a| (a.clone(), describe_soa(map0, a, config, &space))).collect();
    let d1: Vec<_> = soa1.iter().map(|a| (a.clone(), describe_soa(map1, a, config, &space))).collect();
    let soa = match_soa(&d0, &d1, config);

    let (_, scale1) = adjust_sia_scale(&soa.accepted);
    let mut out = SamOutput {
        sia_scale: scale1,
        ..SamOutput::default()
    };
    absorb(&mut out, soa);

    if config.sia_enabled {
        let window0 = config.default_area_size as f64;
        let window1 = window0 * scale1;
        let mut sia0 = detect_sia(map0, window0, config);
        let mut sia1 = detect_sia(map1, window1, config);
        for (i, a) in sia0.iter_mut().enumerate() {
            a.id = soa0.len() + i;
        }
        for (i, a) in sia1.iter_mut().enumerate() {
            a.id = soa1.len() + i;
        }
        let e0: Vec<_> = sia0.iter().map(|a| (a.clone(), describe_sia(map0, a, config, &space))).collect();
        let e1: Vec<_> = sia1.iter().map(|a| (a.clone(), describe_sia(map1, a, config, &space))).collect();
        absorb(&mut out, match_sia(&e0, &e1, config));
    }
    out
}

fn absorb(out: &mut SamOutput, m: AreaMatches) {
    out.accepted.extend(m.accepted);
    out.doubtful_a0.extend(m.doubtful_a0);
    out.doubtful_a1.extend(m.doubtful_a1);
    out.doubtful_pairs.extend(m.doubtful_pairs);
}
