//! Two-view epipolar geometry: Sampson distances, fundamental-matrix
//! estimation (plain and robust), relative pose recovery and pose errors.
//!
//! Convention throughout: `q` lives in the first image, `p` in the second,
//! and a fundamental matrix satisfies `pᵀ F q = 0`.

mod fundamental;
mod pose;
mod ransac;
mod sampson;
mod types;

pub use fundamental::estimate_fundamental;
pub use pose::{pose_error, recover_pose};
pub use ransac::{ransac_fundamental, ransac_with, RansacParams};
pub use sampson::{sampson_set, sampson_single, SampsonStats, DEGENERATE_DENOMINATOR};
pub use types::{CameraIntrinsics, Correspondence, FundamentalMatrix, MatchSet, Point2, PoseEstimate};

pub(crate) use types::{matrix_from_rows, rows3, vec3};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("need at least {need} correspondences, got {got}")]
    InsufficientMatches { got: usize, need: usize },
    #[error("degenerate point configuration")]
    DegenerateConfiguration,
    #[error("sampson denominator vanishes (point at an epipole)")]
    DegenerateDenominator,
    #[error("empty match set")]
    EmptySet,
    #[error("svd did not converge")]
    SvdFailed,
    #[error("ransac found no consensus set of at least 8 matches")]
    NoConsensus,
    #[error("no pose candidate has a strict majority of points in front of both cameras")]
    CheiralityTie,
    #[error("invalid camera intrinsics")]
    InvalidIntrinsics,
    #[error("matrix is not a proper rotation")]
    InvalidRotation,
    #[error("translation has zero length")]
    ZeroTranslation,
    #[error("non-finite matrix entries")]
    NonFinite,
}
