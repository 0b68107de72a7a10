//! Point matchers: the narrow interface every matcher implements, plus a
//! ground-truth oracle, a patch-correlation matcher, and a client for
//! external matchers speaking the line-delimited JSON protocol.

mod classical;
mod oracle;
mod subprocess;

use std::time::Duration;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classical::ClassicalMatcher;
pub use oracle::OracleMatcher;
pub use subprocess::{SubprocessMatcher, DEFAULT_TIMEOUT};

use crate::geometry::{Correspondence, MatchSet, Point2};
use crate::semantic::BBox;

#[derive(Debug, Error)]
pub enum MatcherError {
    #[error("only {found} co-visible points for {needed} requested matches")]
    InsufficientCovisibility { found: usize, needed: usize },
    #[error("matcher did not reply within {0:?}")]
    Timeout(Duration),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("matcher process exited: {0}")]
    ProcessExited(String),
    #[error("matcher reported: {0}")]
    Remote(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

/// Maps original-image pixels into a resized crop: `crop = (orig - offset) * scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaTransform {
    pub offset: Point2,
    pub scale_x: f64,
    pub scale_y: f64,
}

impl AreaTransform {
    pub fn new(offset: Point2, scale_x: f64, scale_y: f64) -> Result<Self, MatcherError> {
        if !(scale_x > 0.0 && scale_y > 0.0 && scale_x.is_finite() && scale_y.is_finite() && offset.is_finite()) {
            return Err(MatcherError::InvalidRequest(format!(
                "transform scales must be positive and finite, got ({scale_x}, {scale_y})"
            )));
        }
        Ok(Self { offset, scale_x, scale_y })
    }

    pub fn identity() -> Self {
        Self {
            offset: Point2::new(0.0, 0.0),
            scale_x: 1.0,
            scale_y: 1.0,
        }
    }

    pub fn to_crop(&self, p: &Point2) -> Point2 {
        Point2::new((p.x - self.offset.x) * self.scale_x, (p.y - self.offset.y) * self.scale_y)
    }

    pub fn to_original(&self, p: &Point2) -> Point2 {
        Point2::new(p.x / self.scale_x + self.offset.x, p.y / self.scale_y + self.offset.y)
    }

    /// Original-image rectangle covered by a crop of the given size.
    pub fn region(&self, crop_width: u32, crop_height: u32) -> BBox {
        let a = self.to_original(&Point2::new(0.0, 0.0));
        let b = self.to_original(&Point2::new(crop_width as f64, crop_height as f64));
        BBox::new(a.x, a.y, b.x, b.y)
    }

    fn key_bits(&self) -> [u64; 4] {
        [
            self.offset.x.to_bits(),
            self.offset.y.to_bits(),
            self.scale_x.to_bits(),
            self.scale_y.to_bits(),
        ]
    }
}

/// Two resized crops and the transforms relating them to the originals.
#[derive(Debug, Clone)]
pub struct MatcherRequest {
    pub image0: RgbImage,
    pub image1: RgbImage,
    pub transform0: AreaTransform,
    pub transform1: AreaTransform,
    pub max_matches: usize,
}

impl MatcherRequest {
    /// Stable identity of the crop pair, used to derive per-pairing seeds so
    /// that the same pairing is matched identically wherever it appears.
    pub fn key(&self) -> u64 {
        let mut h = 0x6a09_e667_f3bc_c908u64;
        let dims = [self.image0.width(), self.image0.height(), self.image1.width(), self.image1.height()];
        for v in self
            .transform0
            .key_bits()
            .into_iter()
            .chain(self.transform1.key_bits())
            .chain(dims.map(u64::from))
        {
            h = mix(h ^ v);
        }
        h
    }

    pub fn region0(&self) -> BBox {
        self.transform0.region(self.image0.width(), self.image0.height())
    }

    pub fn region1(&self) -> BBox {
        self.transform1.region(self.image1.width(), self.image1.height())
    }
}

/// splitmix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Matches in original image coordinates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatcherResponse {
    pub matches: MatchSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidences: Option<Vec<f64>>,
}

impl MatcherResponse {
    /// Maps crop-local pairs back to original coordinates. Exact duplicates
    /// are dropped together with their confidences.
    pub fn from_crop(
        pairs: &[[f64; 4]],
        confidences: Option<Vec<f64>>,
        t0: &AreaTransform,
        t1: &AreaTransform,
    ) -> Self {
        let corr: Vec<Correspondence> = pairs
            .iter()
            .map(|m| {
                Correspondence::new(
                    t0.to_original(&Point2::new(m[0], m[1])),
                    t1.to_original(&Point2::new(m[2], m[3])),
                )
            })
            .collect();
        let matches = MatchSet::new(corr.iter().copied());
        let confidences = confidences.map(|c| {
            if matches.len() == corr.len() {
                return c;
            }
            // align confidences with the surviving matches
            let mut kept = Vec::with_capacity(matches.len());
            let mut it = matches.iter().peekable();
            for (m, conf) in corr.iter().zip(c) {
                if it.peek().is_some_and(|k| *k == m) {
                    kept.push(conf);
                    it.next();
                }
            }
            kept
        });
        Self { matches, confidences }
    }
}

/// Anything that turns a crop pair into point correspondences.
pub trait PointMatcher: Send + Sync {
    fn match_pair(&self, req: &MatcherRequest) -> Result<MatcherResponse, MatcherError>;

    fn name(&self) -> String;
}
