use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::eval::RelativePose;
use crate::geometry::{rows3, vec3, CameraIntrinsics, Point2};

/// Pinhole camera with world-to-camera extrinsics `Xc = R Xw + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub k: CameraIntrinsics,
    #[serde(rename = "R", with = "rows3")]
    pub rotation: Matrix3<f64>,
    #[serde(with = "vec3")]
    pub t: Vector3<f64>,
}

impl Camera {
    /// Camera at `center` with the given world-to-camera rotation.
    pub fn looking(k: CameraIntrinsics, rotation: Matrix3<f64>, center: Vector3<f64>) -> Self {
        Self {
            k,
            rotation,
            t: -(rotation * center),
        }
    }

    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.t)
    }

    pub fn to_camera(&self, xw: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * xw + self.t
    }

    /// World-space ray direction through a pixel, scaled so its camera-frame
    /// z component is one (ray parameter equals z-depth).
    pub fn ray(&self, p: &Point2) -> Vector3<f64> {
        self.rotation.transpose() * self.k.unproject(p)
    }

    pub fn project(&self, xw: &Vector3<f64>) -> Option<Point2> {
        self.k.project(&self.to_camera(xw))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Shape {
    /// Axis-aligned box.
    Box { min: [f64; 3], max: [f64; 3] },
    /// Rectangle spanned by two orthogonal edges from `origin`.
    Quad { origin: [f64; 3], u: [f64; 3], v: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Object {
    pub shape: Shape,
    /// Semantic label; 0 renders geometry and texture but no label.
    pub label: u16,
    /// Texture identity; objects sharing it look the same.
    pub texture: u32,
}

/// Planar rectangular face with metric surface coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub origin: Vector3<f64>,
    pub u: Vector3<f64>,
    pub v: Vector3<f64>,
    pub u_len: f64,
    pub v_len: f64,
    pub normal: Vector3<f64>,
}

impl Face {
    fn new(origin: Vector3<f64>, u: Vector3<f64>, v: Vector3<f64>) -> Self {
        let (u_len, v_len) = (u.norm(), v.norm());
        let (u, v) = (u / u_len, v / v_len);
        Self {
            origin,
            u,
            v,
            u_len,
            v_len,
            normal: u.cross(&v).normalize(),
        }
    }

    /// Ray parameter of the plane hit, if in front of the origin.
    pub fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let denom = self.normal.dot(dir);
        if denom.abs() < 1e-12 {
            return None;
        }
        let lambda = self.normal.dot(&(self.origin - origin)) / denom;
        (lambda > 1e-9).then_some(lambda)
    }

    pub fn local(&self, x: &Vector3<f64>) -> (f64, f64) {
        let d = x - self.origin;
        (d.dot(&self.u), d.dot(&self.v))
    }

    pub fn contains_local(&self, s: f64, t: f64) -> bool {
        s >= 0.0 && t >= 0.0 && s <= self.u_len && t <= self.v_len
    }

    pub fn point(&self, s: f64, t: f64) -> Vector3<f64> {
        self.origin + self.u * s + self.v * t
    }

    pub fn corners(&self) -> [Vector3<f64>; 4] {
        let (a, b) = (self.u * self.u_len, self.v * self.v_len);
        [self.origin, self.origin + a, self.origin + a + b, self.origin + b]
    }
}

impl Shape {
    /// Faces in a fixed order, parametrized from the minimum corner so that
    /// equal-size boxes share surface coordinates.
    pub fn faces(&self) -> Vec<Face> {
        match self {
            Shape::Box { min, max } => {
                let m = Vector3::from(*min);
                let s = Vector3::from(*max) - m;
                let (ex, ey, ez) = (Vector3::x() * s.x, Vector3::y() * s.y, Vector3::z() * s.z);
                vec![
                    Face::new(m, ex, ey),
                    Face::new(m + ez, ex, ey),
                    Face::new(m, ez, ey),
                    Face::new(m + ex, ez, ey),
                    Face::new(m, ex, ez),
                    Face::new(m + ey, ex, ez),
                ]
            }
            Shape::Quad { origin, u, v } => {
                vec![Face::new(Vector3::from(*origin), Vector3::from(*u), Vector3::from(*v))]
            }
        }
    }
}

/// Two cameras observing textured, labeled primitives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub width: usize,
    pub height: usize,
    pub cameras: [Camera; 2],
    pub objects: Vec<Object>,
    pub texture_seed: u64,
}

impl Scene {
    pub fn relative_pose(&self) -> RelativePose {
        let [c0, c1] = &self.cameras;
        let rotation = c1.rotation * c0.rotation.transpose();
        RelativePose {
            rotation,
            t: c1.t - rotation * c0.t,
        }
    }

    pub fn faces(&self) -> Vec<Vec<Face>> {
        self.objects.iter().map(|o| o.shape.faces()).collect()
    }
}

/// World-space point from camera-frame coordinates of camera `c`.
pub fn camera_to_world(c: &Camera, xc: &Vector3<f64>) -> Vector3<f64> {
    c.rotation.transpose() * (xc - c.t)
}

