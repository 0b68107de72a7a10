use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// A point on the image plane, in pixels. Pixel `(i, j)` covers
/// `[i, i + 1) x [j, j + 1)`, so its center is at `(i + 0.5, j + 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn homogeneous(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, 1.0)
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A matched pair: `q` in the first image, `p` in the second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub q: Point2,
    pub p: Point2,
}

impl Correspondence {
    pub const fn new(q: Point2, p: Point2) -> Self {
        Self { q, p }
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.p.is_finite()
    }

    /// Bit pattern key used for exact-duplicate detection.
    fn key(&self) -> [u64; 4] {
        [
            self.q.x.to_bits(),
            self.q.y.to_bits(),
            self.p.x.to_bits(),
            self.p.y.to_bits(),
        ]
    }
}

/// An ordered set of point correspondences with no exact duplicates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchSet {
    pub matches: Vec<Correspondence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_area: Option<usize>,
}

impl MatchSet {
    /// Builds a set from `matches`, dropping non-finite pairs and exact
    /// duplicates while keeping first-occurrence order.
    pub fn new(matches: impl IntoIterator<Item = Correspondence>) -> Self {
        let mut seen = std::collections::HashSet::new();
        let matches = matches
            .into_iter()
            .filter(|c| c.is_finite() && seen.insert(c.key()))
            .collect();
        Self {
            matches,
            source_area: None,
        }
    }

    pub fn with_source(mut self, area: usize) -> Self {
        self.source_area = Some(area);
        self
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Correspondence> {
        self.matches.iter()
    }
}

impl FromIterator<Correspondence> for MatchSet {
    fn from_iter<T: IntoIterator<Item = Correspondence>>(iter: T) -> Self {
        MatchSet::new(iter)
    }
}

/// Fundamental matrix with `pᵀ F q = 0`, stored rank-2 with unit Frobenius
/// norm and a positive largest-magnitude entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct FundamentalMatrix(Matrix3<f64>);

impl FundamentalMatrix {
    /// Projects `m` onto rank 2 and normalizes its scale and sign.
    pub fn new(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let svd = m.svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => return Err(GeometryError::SvdFailed),
        };
        let mut s = svd.singular_values;
        // nalgebra sorts singular values in decreasing order.
        s[2] = 0.0;
        if s[1] <= 0.0 {
            return Err(GeometryError::DegenerateConfiguration);
        }
        let r2 = u * Matrix3::from_diagonal(&s) * v_t;
        Ok(Self(normalize_scale(r2)))
    }

    /// Wraps `m` after scale normalization only. `m` must already be rank 2.
    pub(crate) fn from_rank2(m: Matrix3<f64>) -> Self {
        Self(normalize_scale(m))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Rows of the matrix, for serialization.
    pub fn to_rows(&self) -> [[f64; 3]; 3] {
        let m = &self.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    /// Algebraic epipolar residual `pᵀ F q`.
    pub fn residual(&self, c: &Correspondence) -> f64 {
        c.p.homogeneous().dot(&(self.0 * c.q.homogeneous()))
    }

    /// Frobenius distance to `other` after aligning the sign ambiguity.
    pub fn distance(&self, other: &FundamentalMatrix) -> f64 {
        let plus = (self.0 - other.0).norm();
        let minus = (self.0 + other.0).norm();
        plus.min(minus)
    }
}

fn normalize_scale(m: Matrix3<f64>) -> Matrix3<f64> {
    let mut out = m / m.norm();
    let mut lead = 0.0f64;
    // row-major scan: first entry with the largest magnitude decides the sign
    for r in 0..3 {
        for c in 0..3 {
            if out[(r, c)].abs() > lead.abs() {
                lead = out[(r, c)];
            }
        }
    }
    if lead < 0.0 {
        out = -out;
    }
    out
}

impl TryFrom<[[f64; 3]; 3]> for FundamentalMatrix {
    type Error = GeometryError;

    /// Rows already in canonical form are kept bit for bit; anything else is
    /// projected with [`FundamentalMatrix::new`].
    fn try_from(rows: [[f64; 3]; 3]) -> Result<Self, Self::Error> {
        let m = matrix_from_rows(&rows);
        if m.iter().all(|v| v.is_finite()) && (m.norm() - 1.0).abs() < 1e-12 && m.determinant().abs() < 1e-12 {
            let canonical = normalize_scale(m);
            if (canonical - m).norm() < 1e-12 {
                return Ok(Self(m));
            }
        }
        FundamentalMatrix::new(m)
    }
}

impl From<FundamentalMatrix> for [[f64; 3]; 3] {
    fn from(f: FundamentalMatrix) -> Self {
        f.to_rows()
    }
}

pub(crate) fn matrix_from_rows(rows: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::new(
        rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0],
        rows[2][1], rows[2][2],
    )
}

/// Pinhole intrinsics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(default)]
    pub skew: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            skew: 0.0,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = [self.fx, self.fy, self.cx, self.cy, self.skew]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics);
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, self.skew, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0,
        )
    }

    /// Pixel to normalized camera coordinates (z = 1).
    pub fn unproject(&self, p: &Point2) -> Vector3<f64> {
        let y = (p.y - self.cy) / self.fy;
        let x = (p.x - self.cx - self.skew * y) / self.fx;
        Vector3::new(x, y, 1.0)
    }

    /// Camera-frame point to pixel. Returns `None` behind the camera.
    pub fn project(&self, x: &Vector3<f64>) -> Option<Point2> {
        if x.z <= 0.0 {
            return None;
        }
        let u = x.x / x.z;
        let v = x.y / x.z;
        Some(Point2::new(
            self.fx * u + self.skew * v + self.cx,
            self.fy * v + self.cy,
        ))
    }
}

/// Relative pose mapping first-camera coordinates into the second camera:
/// `X1 = R X0 + t`, with `t` stored as a unit direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    #[serde(with = "rows3")]
    pub rotation: Matrix3<f64>,
    #[serde(with = "vec3")]
    pub translation_dir: Vector3<f64>,
    pub inlier_count: usize,
}

impl PoseEstimate {
    pub fn new(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        inlier_count: usize,
    ) -> Result<Self, GeometryError> {
        let orth = (rotation * rotation.transpose() - Matrix3::identity()).norm();
        if !orth.is_finite() || orth > 1e-9 || rotation.determinant() < 0.0 {
            return Err(GeometryError::InvalidRotation);
        }
        let n = translation.norm();
        if !n.is_finite() || n < 1e-15 {
            return Err(GeometryError::ZeroTranslation);
        }
        Ok(Self {
            rotation,
            translation_dir: translation / n,
            inlier_count,
        })
    }
}

pub(crate) mod rows3 {
    use nalgebra::Matrix3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix3<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: [[f64; 3]; 3] = std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]));
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix3<f64>, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        Ok(super::matrix_from_rows(&rows))
    }
}

pub(crate) mod vec3 {
    use nalgebra::Vector3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector3<f64>, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector3<f64>, D::Error> {
        let a = <[f64; 3]>::deserialize(d)?;
        Ok(Vector3::new(a[0], a[1], a[2]))
    }
}
