//! End-to-end orchestration: semantic area matching, doubtful-area
//! prediction, rejection, global collection, and final assembly.

mod export;
mod prepare;
mod sample;

pub use export::{read_matches_binary, rows_to_matches, write_matches_binary, BINARY_MAGIC};
pub use prepare::{full_image_request, prepare_area_pair};
pub use sample::{dedup_grid, uniform_sample, DEDUP_GRID};

use std::collections::BTreeMap;
use std::time::Instant;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, SgamConfig};
use crate::gam::{gmc_collect, gp_predict, gr_reject, AreaMatchEntry, GamError, GmcOutcome, GpOutcome, GrOutcome};
use crate::geometry::MatchSet;
use crate::matcher::{MatcherError, PointMatcher};
use crate::sam::{sam_pipeline, Area, AreaKind, AreaMatchCandidate, SamOutput};
use crate::semantic::{BBox, SemanticMap};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("area {0:?} has a zero-length side")]
    DegenerateArea(BBox),
    #[error("image {index} is {image:?} but its semantic map is {map:?}")]
    DimensionMismatch {
        index: usize,
        image: (usize, usize),
        map: (usize, usize),
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Matcher(#[from] MatcherError),
}

/// Wall-clock milliseconds per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub sam: f64,
    pub inside: f64,
    pub gp: f64,
    pub gr: f64,
    pub gmc: f64,
    pub total: f64,
}

/// A doubtful group resolved (or not) by the predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpGroup {
    pub kind: AreaKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u16>,
    pub doubtful0: Vec<Area>,
    pub doubtful1: Vec<Area>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<GpOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgamResult {
    pub sam: SamOutput,
    pub gp: Vec<GpGroup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gr: Option<GrOutcome>,
    /// Area matches that survived rejection, with their inside matches.
    pub area_matches: Vec<AreaMatchEntry>,
    pub gmc: GmcOutcome,
    /// Full-image matching replaced the area pipeline because no area
    /// match survived.
    pub degraded: bool,
    pub merged: MatchSet,
    #[serde(skip)]
    pub timings: Timings,
}

impl SgamResult {
    pub fn inside_matches(&self) -> impl Iterator<Item = &MatchSet> {
        self.area_matches.iter().map(|e| &e.matches)
    }

    pub fn global_matches(&self) -> &MatchSet {
        &self.gmc.kept
    }
}

/// Size change between matched object areas as the geometric mean of
/// `sqrt(area1 / area0)`. Returns `(1, s)`: only the second image's window
/// is rescaled. Without object matches the scale is `(1, 1)`.
pub fn adjust_sia_scale(soa_matches: &[AreaMatchCandidate]) -> (f64, f64) {
    let logs: Vec<f64> = soa_matches
        .iter()
        .filter(|m| m.a0.bbox.area() > 0.0 && m.a1.bbox.area() > 0.0)
        .map(|m| 0.5 * (m.a1.bbox.area() / m.a0.bbox.area()).ln())
        .collect();
    if logs.is_empty() {
        return (1.0, 1.0);
    }
    (1.0, (logs.iter().sum::<f64>() / logs.len() as f64).exp())
}

/// Matches one area pair and keeps the correspondences inside both boxes.
pub fn match_area_pair(
    a0: &Area,
    a1: &Area,
    images: [&RgbImage; 2],
    pm: &dyn PointMatcher,
    config: &SgamConfig,
) -> Result<MatchSet, PipelineError> {
    let req = prepare_area_pair(a0, a1, images[0], images[1], config.default_area_size, config.max_correspondences)?;
    let resp = pm.match_pair(&req)?;
    Ok(MatchSet::new(
        resp.matches
            .iter()
            .filter(|c| a0.bbox.contains(&c.q) && a1.bbox.contains(&c.p))
            .copied(),
    )
    .with_source(a0.id))
}

/// The bare point matcher on both full images.
pub fn match_full_images(images: [&RgbImage; 2], pm: &dyn PointMatcher, config: &SgamConfig) -> Result<MatchSet, PipelineError> {
    let req = full_image_request(images[0], images[1], config.default_area_size, config.max_correspondences)?;
    let bounds0 = BBox::new(0.0, 0.0, images[0].width() as f64, images[0].height() as f64);
    let bounds1 = BBox::new(0.0, 0.0, images[1].width() as f64, images[1].height() as f64);
    Ok(MatchSet::new(
        pm.match_pair(&req)?
            .matches
            .iter()
            .filter(|c| bounds0.contains(&c.q) && bounds1.contains(&c.p))
            .copied(),
    ))
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Semantic and geometric area matching followed by point matching inside
/// the surviving areas.
pub fn sgam(
    images: [&RgbImage; 2],
    maps: [&SemanticMap; 2],
    pm: &dyn PointMatcher,
    config: &SgamConfig,
) -> Result<SgamResult, PipelineError> {
    config.validate()?;
    for (index, (img, map)) in images.iter().zip(maps).enumerate() {
        let image = (img.width() as usize, img.height() as usize);
        if image != map.dims() {
            return Err(PipelineError::DimensionMismatch {
                index,
                image,
                map: map.dims(),
            });
        }
    }
    let dims0 = maps[0].dims();
    let dims1 = maps[1].dims();
    let start = Instant::now();
    let mut timings = Timings::default();

    let t = Instant::now();
    let sam = sam_pipeline(maps[0], maps[1], config);
    timings.sam = ms(t);

    let run = |a0: &Area, a1: &Area| match match_area_pair(a0, a1, images, pm, config) {
        Ok(m) => Some(m),
        Err(e) => {
            log::warn!("area pair {:?} / {:?} skipped: {e}", a0.bbox, a1.bbox);
            None
        }
    };

    let t = Instant::now();
    let mut entries: Vec<AreaMatchEntry> = sam
        .accepted
        .par_iter()
        .filter_map(|c| run(&c.a0, &c.a1).map(|m| AreaMatchEntry::new(c.clone(), m, config)))
        .collect();
    timings.inside = ms(t);

    let t = Instant::now();
    let mut gp = Vec::new();
    for ((kind, label), (d0, d1)) in doubtful_groups(&sam) {
        let mut group = GpGroup {
            kind,
            label,
            doubtful0: d0,
            doubtful1: d1,
            outcome: None,
            error: None,
        };
        if group.doubtful0.is_empty() || group.doubtful1.is_empty() {
            group.error = Some("no counterpart in the other image".into());
            gp.push(group);
            continue;
        }
        match gp_predict(&group.doubtful0, &group.doubtful1, run, config) {
            Ok(mut out) => {
                for e in &mut out.selected {
                    if let Some(d) = sam.doubtful_pairs.iter().find(|c| c.pair_key() == e.candidate.pair_key()) {
                        e.candidate.desc_distance = d.desc_distance;
                    }
                }
                entries.extend(out.selected.iter().cloned());
                group.outcome = Some(out);
            }
            Err(e) => {
                log::info!("doubtful {kind:?} group {label:?} dropped: {e}");
                group.error = Some(e.to_string());
            }
        }
        gp.push(group);
    }
    timings.gp = ms(t);

    let t = Instant::now();
    let gr = match gr_reject(entries, config) {
        Ok(out) => Some(out),
        Err(GamError::Empty) => None,
        Err(e) => unreachable!("rejector only fails on empty input: {e}"),
    };
    timings.gr = ms(t);
    let kept = gr.as_ref().map(|g| g.kept.clone()).unwrap_or_default();

    let t = Instant::now();
    let mut result = if kept.is_empty() {
        log::info!("no area match survived; matching full images");
        let merged = match_full_images(images, pm, config).unwrap_or_else(|e| {
            log::warn!("full-image matching failed: {e}");
            MatchSet::default()
        });
        SgamResult {
            sam,
            gp,
            gr,
            area_matches: Vec::new(),
            gmc: GmcOutcome::default(),
            degraded: true,
            merged,
            timings: Timings::default(),
        }
    } else {
        let gmc = gmc_collect(&kept, dims0, dims1, || match_full_images(images, pm, config).map_err(into_matcher), config);
        let merged = dedup_grid(
            kept.iter()
                .flat_map(|e| e.matches.iter().copied())
                .chain(gmc.kept.iter().copied()),
        );
        SgamResult {
            sam,
            gp,
            gr,
            area_matches: kept,
            gmc,
            degraded: false,
            merged,
            timings: Timings::default(),
        }
    };
    timings.gmc = ms(t);
    timings.total = ms(start);
    result.timings = timings;
    Ok(result)
}

fn into_matcher(e: PipelineError) -> MatcherError {
    match e {
        PipelineError::Matcher(m) => m,
        other => MatcherError::InvalidRequest(other.to_string()),
    }
}

type GroupKey = (AreaKind, Option<u16>);

/// Doubtful areas grouped by kind and anchor label, in key order.
fn doubtful_groups(sam: &SamOutput) -> BTreeMap<GroupKey, (Vec<Area>, Vec<Area>)> {
    let mut groups: BTreeMap<GroupKey, (Vec<Area>, Vec<Area>)> = BTreeMap::new();
    for a in &sam.doubtful_a0 {
        groups.entry((a.kind, a.anchor_label)).or_default().0.push(a.clone());
    }
    for a in &sam.doubtful_a1 {
        groups.entry((a.kind, a.anchor_label)).or_default().1.push(a.clone());
    }
    groups
}
