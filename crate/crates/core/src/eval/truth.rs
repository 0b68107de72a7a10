use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::geometry::{rows3, vec3, CameraIntrinsics, GeometryError, Point2, PoseEstimate};

/// Maps a pixel of the first image to the second; `None` where the point
/// has no valid ground truth (no depth, occluded, or leaves the image).
pub trait Projector: Send + Sync {
    fn project(&self, q: &Point2) -> Option<Point2>;
}

/// Metric relative pose, `X1 = R X0 + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativePose {
    #[serde(rename = "R", with = "rows3")]
    pub rotation: Matrix3<f64>,
    #[serde(with = "vec3")]
    pub t: Vector3<f64>,
}

impl RelativePose {
    pub fn estimate(&self) -> Result<PoseEstimate, GeometryError> {
        PoseEstimate::new(self.rotation, self.t, 0)
    }

    /// Fundamental matrix `K1⁻ᵀ [t]ₓ R K0⁻¹`, unnormalized.
    pub fn fundamental(&self, k0: &CameraIntrinsics, k1: &CameraIntrinsics) -> Option<Matrix3<f64>> {
        let t = self.t;
        let tx = Matrix3::new(0.0, -t.z, t.y, t.z, 0.0, -t.x, -t.y, t.x, 0.0);
        let e = tx * self.rotation;
        Some(k1.matrix().try_inverse()?.transpose() * e * k0.matrix().try_inverse()?)
    }
}

#[derive(Clone)]
pub struct GroundTruth {
    pub pose: Option<RelativePose>,
    pub k0: Option<CameraIntrinsics>,
    pub k1: Option<CameraIntrinsics>,
    pub projector: Arc<dyn Projector>,
}

impl GroundTruth {
    pub fn project(&self, q: &Point2) -> Option<Point2> {
        self.projector.project(q)
    }

    pub fn intrinsics(&self) -> Option<(CameraIntrinsics, CameraIntrinsics)> {
        Some((self.k0?, self.k1?))
    }
}

impl std::fmt::Debug for GroundTruth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GroundTruth")
            .field("pose", &self.pose)
            .field("k0", &self.k0)
            .field("k1", &self.k1)
            .finish_non_exhaustive()
    }
}

pub struct HomographyProjector {
    pub h: Matrix3<f64>,
    /// Second image size; projections outside it are invalid.
    pub bounds: Option<(usize, usize)>,
}

impl Projector for HomographyProjector {
    fn project(&self, q: &Point2) -> Option<Point2> {
        let v = self.h * q.homogeneous();
        if v.z.abs() < 1e-15 {
            return None;
        }
        let p = Point2::new(v.x / v.z, v.y / v.z);
        in_bounds(&p, self.bounds).then_some(p)
    }
}

fn in_bounds(p: &Point2, bounds: Option<(usize, usize)>) -> bool {
    match bounds {
        Some((w, h)) => p.x >= 0.0 && p.y >= 0.0 && p.x < w as f64 && p.y < h as f64,
        None => p.is_finite(),
    }
}

/// Per-pixel z-depth in meters; zero marks a pixel without depth.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self, EvalError> {
        if data.len() != width * height {
            return Err(EvalError::Format(format!(
                "depth buffer holds {} values for {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Depth of the pixel containing `p`, if any.
    pub fn at(&self, p: &Point2) -> Option<f64> {
        if !(p.x >= 0.0 && p.y >= 0.0) {
            return None;
        }
        let (x, y) = (p.x as usize, p.y as usize);
        if x >= self.width || y >= self.height {
            return None;
        }
        let d = self.data[y * self.width + x] as f64;
        (d.is_finite() && d > 0.0).then_some(d)
    }

    /// Portable float map, grayscale, little-endian, bottom row first.
    pub fn write_pfm(&self, path: &Path) -> Result<(), EvalError> {
        let mut out = Vec::with_capacity(self.data.len() * 4 + 32);
        write!(out, "Pf\n{} {}\n-1.0\n", self.width, self.height)?;
        for y in (0..self.height).rev() {
            for v in &self.data[y * self.width..(y + 1) * self.width] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn read_pfm(path: &Path) -> Result<Self, EvalError> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut header = String::new();
        let bad = |what: &str| EvalError::Format(format!("{}: {what}", path.display()));
        r.read_line(&mut header)?;
        if header.trim() != "Pf" {
            return Err(bad("not a grayscale PFM"));
        }
        header.clear();
        r.read_line(&mut header)?;
        let dims: Vec<usize> = header.split_whitespace().filter_map(|s| s.parse().ok()).collect();
        let [w, h] = dims[..] else {
            return Err(bad("bad PFM dimensions"));
        };
        header.clear();
        r.read_line(&mut header)?;
        let scale: f64 = header.trim().parse().map_err(|_| bad("bad PFM scale"))?;
        let mut raw = vec![0u8; w * h * 4];
        r.read_exact(&mut raw)?;
        let word = |b: &[u8]| {
            let b = [b[0], b[1], b[2], b[3]];
            if scale < 0.0 {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        };
        let mut data = vec![0f32; w * h];
        for (row, chunk) in raw.chunks_exact(w * 4).enumerate() {
            let y = h - 1 - row;
            for (x, b) in chunk.chunks_exact(4).enumerate() {
                data[y * w + x] = word(b);
            }
        }
        Self::new(w, h, data)
    }
}

/// Back-projects through a first-image depth map and reprojects; with a
/// second depth map, points whose reprojected depth disagrees by more than
/// 1% are treated as occluded.
pub struct DepthProjector {
    pub depth0: DepthMap,
    pub depth1: Option<DepthMap>,
    pub k0: CameraIntrinsics,
    pub k1: CameraIntrinsics,
    pub pose: RelativePose,
    pub bounds: Option<(usize, usize)>,
}

impl Projector for DepthProjector {
    fn project(&self, q: &Point2) -> Option<Point2> {
        let z0 = self.depth0.at(q)?;
        let x0 = self.k0.unproject(q) * z0;
        let x1 = self.pose.rotation * x0 + self.pose.t;
        let p = self.k1.project(&x1)?;
        let bounds = self.bounds.or(self.depth1.as_ref().map(|d| (d.width, d.height)));
        if !in_bounds(&p, bounds) {
            return None;
        }
        if let Some(d1) = &self.depth1 {
            let z1 = d1.at(&p)?;
            if (z1 - x1.z).abs() > 0.01 * x1.z {
                return None;
            }
        }
        Some(p)
    }
}
