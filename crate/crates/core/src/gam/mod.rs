//! Geometry area matching: geometry consistency of area matches, the
//! predictor resolving doubtful areas, the rejector, and global match
//! collection.

mod collection;
mod consistency;
mod predictor;
mod rejector;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use collection::{gmc_collect, size_proportion, GmcOutcome};
pub use consistency::{geometry_consistency, ConsistencyReport};
pub use predictor::{gp_predict, GpAssignment, GpOutcome};
pub use rejector::{gr_reject, GrOutcome, GrRound};

use crate::config::SgamConfig;
use crate::geometry::{estimate_fundamental, ransac_with, FundamentalMatrix, GeometryError, MatchSet, RansacParams};
use crate::sam::AreaMatchCandidate;

#[derive(Debug, Error)]
pub enum GamError {
    #[error("no area match has enough inside matches for a fundamental matrix")]
    TooFewAreas,
    #[error("every candidate assignment contains a pairing without a valid geometry")]
    AllAssignmentsInvalid,
    #[error("empty input")]
    Empty,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// An area match with its inside-area correspondences and, when they
/// suffice, the fundamental matrix fitted to them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaMatchEntry {
    pub candidate: AreaMatchCandidate,
    pub matches: MatchSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fundamental: Option<FundamentalMatrix>,
}

impl AreaMatchEntry {
    /// Fits the per-area model when at least `config.min_area_matches`
    /// correspondences are available.
    pub fn new(candidate: AreaMatchCandidate, matches: MatchSet, config: &SgamConfig) -> Self {
        let fundamental = (matches.len() >= config.min_area_matches.max(8))
            .then(|| {
                let params = RansacParams {
                    seed: config.ransac.seed ^ candidate.pair_key(),
                    ..config.ransac
                };
                fit(&matches, config.inside_area_ransac, &params)
            })
            .and_then(|r| r.map_err(|e| log::debug!("area model failed: {e}")).ok());
        Self {
            candidate,
            matches,
            fundamental,
        }
    }

    pub fn is_certifiable(&self) -> bool {
        self.fundamental.is_some()
    }
}

pub(crate) fn fit(matches: &MatchSet, robust: bool, params: &RansacParams) -> Result<FundamentalMatrix, GeometryError> {
    if robust {
        ransac_with(matches, params).map(|(f, _)| f)
    } else {
        estimate_fundamental(matches)
    }
}
