use serde::{Deserialize, Serialize};

use super::{Correspondence, FundamentalMatrix, GeometryError, MatchSet};

/// Denominators below this are treated as a point sitting on an epipole.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-15;

/// First-order geometric error of `c` under `f`, in squared pixels.
pub fn sampson_single(f: &FundamentalMatrix, c: &Correspondence) -> Result<f64, GeometryError> {
    let m = f.matrix();
    let q = c.q.homogeneous();
    let p = c.p.homogeneous();
    let fq = m * q;
    let ftp = m.transpose() * p;
    let denom = fq.x * fq.x + fq.y * fq.y + ftp.x * ftp.x + ftp.y * ftp.y;
    if !(denom >= DEGENERATE_DENOMINATOR) {
        return Err(GeometryError::DegenerateDenominator);
    }
    let num = p.dot(&fq);
    Ok(num * num / denom)
}

/// Sum and mean of the single-match Sampson distances over a set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampsonStats {
    pub sum: f64,
    pub mean: f64,
    pub count: usize,
}

pub fn sampson_set(f: &FundamentalMatrix, s: &MatchSet) -> Result<SampsonStats, GeometryError> {
    if s.is_empty() {
        return Err(GeometryError::EmptySet);
    }
    let mut sum = 0.0;
    for c in s.iter() {
        sum += sampson_single(f, c)?;
    }
    Ok(SampsonStats {
        sum,
        mean: sum / s.len() as f64,
        count: s.len(),
    })
}
