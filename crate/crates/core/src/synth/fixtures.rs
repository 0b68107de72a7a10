use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scene::{Camera, Object, Scene, Shape};
use crate::geometry::CameraIntrinsics;

pub const WIDTH: usize = 640;
pub const HEIGHT: usize = 480;
const FLOOR_Y: f64 = 1.4;
const CEILING_Y: f64 = -2.0;
const ROOM_HALF_WIDTH: f64 = 3.5;
const ROOM_NEAR: f64 = -1.0;
const ROOM_FAR: f64 = 7.0;

/// Catalogue of seeded scenes used throughout the test suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fixture {
    /// Six labeled boxes in a labeled room; two share a label.
    Room6,
    /// Two identical boxes with near-identical surroundings.
    Twins,
    /// One small labeled box in an unlabeled room.
    Sparse,
    /// Labeled patches on a single wall plane.
    Planar,
}

impl Fixture {
    pub const ALL: [Fixture; 4] = [Fixture::Room6, Fixture::Twins, Fixture::Sparse, Fixture::Planar];

    pub fn name(&self) -> &'static str {
        match self {
            Fixture::Room6 => "room6",
            Fixture::Twins => "twins",
            Fixture::Sparse => "sparse",
            Fixture::Planar => "planar",
        }
    }

    pub fn from_name(name: &str) -> Option<Fixture> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn scene(&self, seed: u64) -> Scene {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((*self as u64) << 56));
        let mut objects = Vec::new();
        let cameras = match self {
            Fixture::Room6 => {
                room(&mut objects, [1, 2, 3, 4, 5]);
                let boxes = [
                    (-1.7, 4.4, [0.9, 0.9, 0.9], 10),
                    (-0.5, 5.6, [0.8, 1.0, 0.8], 11),
                    (0.8, 4.7, [0.7, 0.6, 0.7], 12),
                    (2.0, 5.4, [0.8, 1.0, 0.8], 13),
                    (-0.2, 3.2, [0.5, 0.5, 0.5], 14),
                ];
                let mut placed = Vec::new();
                for (x, z, size, label) in boxes {
                    let (x, z) = (x + rng.random_range(-0.08..0.08), z + rng.random_range(-0.08..0.08));
                    placed.push((x, z));
                    objects.push(labeled(floor_box(x, z, size), label));
                }
                // twin of the last box, standing on box 12
                let (x, z) = placed[2];
                objects.push(labeled(cube_at(x, FLOOR_Y - 0.6 - 0.25, z, 0.5), 14));
                cameras(&mut rng, Vector3::new(0.4, -0.1, 0.2), -3.0)
            }
            Fixture::Twins => {
                room(&mut objects, [1, 2, 3, 4, 5]);
                let jitter = |rng: &mut ChaCha8Rng| rng.random_range(-0.06..0.06);
                let (ax, az) = (-1.4 + jitter(&mut rng), 4.0 + jitter(&mut rng));
                objects.push(labeled(floor_box(ax, az, [0.6, 0.6, 0.6]), 20));
                let (bx, bz) = (1.3 + jitter(&mut rng), 4.6 + jitter(&mut rng));
                objects.push(labeled(floor_box(bx, bz, [0.7, 0.8, 0.7]), 21));
                objects.push(labeled(cube_at(bx, FLOOR_Y - 0.8 - 0.3, bz, 0.6), 20));
                objects.push(labeled(floor_box(0.0, 5.8, [1.0, 0.7, 0.8]), 22));
                objects.push(labeled(floor_box(-2.4, 5.5, [0.7, 1.2, 0.7]), 23));
                cameras(&mut rng, Vector3::new(0.45, -0.05, 0.15), -2.0)
            }
            Fixture::Sparse => {
                room(&mut objects, [0; 5]);
                for (i, o) in objects.iter_mut().enumerate() {
                    o.texture = 100 + i as u32;
                }
                let (x, z) = (0.3 + rng.random_range(-0.1..0.1), 4.5 + rng.random_range(-0.1..0.1));
                objects.push(labeled(floor_box(x, z, [0.6, 0.6, 0.6]), 30));
                cameras(&mut rng, Vector3::new(0.4, -0.08, 0.2), -3.0)
            }
            Fixture::Planar => {
                let z = 3.0;
                let patches = [
                    (-1.5, -1.0, 1.0, 1.0, 10),
                    (0.3, -0.8, 1.0, 1.0, 11),
                    (-1.2, 0.4, 1.0, 0.8, 12),
                    (0.5, 0.5, 1.1, 0.8, 13),
                ];
                // patches first: coplanar ties go to the earlier object
                for (x, y, w, h, label) in patches {
                    let shape = Shape::Quad {
                        origin: [x, y, z],
                        u: [w, 0.0, 0.0],
                        v: [0.0, h, 0.0],
                    };
                    objects.push(labeled(shape, label));
                }
                let wall = Shape::Quad {
                    origin: [-4.0, -3.0, z],
                    u: [8.0, 0.0, 0.0],
                    v: [0.0, 6.0, 0.0],
                };
                objects.push(labeled(wall, 2));
                cameras(&mut rng, Vector3::new(0.3, 0.05, -0.1), 3.0)
            }
        };
        Scene {
            width: WIDTH,
            height: HEIGHT,
            cameras,
            objects,
            texture_seed: seed,
        }
    }
}

pub fn intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(500.0, 500.0, WIDTH as f64 / 2.0, HEIGHT as f64 / 2.0).expect("valid intrinsics")
}

fn labeled(shape: Shape, label: u16) -> Object {
    Object {
        shape,
        label,
        texture: label as u32,
    }
}

/// Floor, back wall, left wall, right wall, ceiling.
fn room(objects: &mut Vec<Object>, labels: [u16; 5]) {
    let (w, n, f) = (ROOM_HALF_WIDTH, ROOM_NEAR, ROOM_FAR);
    let height = FLOOR_Y - CEILING_Y;
    let quads = [
        ([-w, FLOOR_Y, n], [2.0 * w, 0.0, 0.0], [0.0, 0.0, f - n]),
        ([-w, CEILING_Y, f], [2.0 * w, 0.0, 0.0], [0.0, height, 0.0]),
        ([-w, CEILING_Y, n], [0.0, 0.0, f - n], [0.0, height, 0.0]),
        ([w, CEILING_Y, n], [0.0, 0.0, f - n], [0.0, height, 0.0]),
        ([-w, CEILING_Y, n], [2.0 * w, 0.0, 0.0], [0.0, 0.0, f - n]),
    ];
    for ((origin, u, v), label) in quads.into_iter().zip(labels) {
        objects.push(Object {
            shape: Shape::Quad { origin, u, v },
            label,
            texture: label as u32,
        });
    }
}

fn floor_box(x: f64, z: f64, [sx, sy, sz]: [f64; 3]) -> Shape {
    Shape::Box {
        min: [x - sx / 2.0, FLOOR_Y - sy, z - sz / 2.0],
        max: [x + sx / 2.0, FLOOR_Y, z + sz / 2.0],
    }
}

fn cube_at(x: f64, y: f64, z: f64, side: f64) -> Shape {
    let h = side / 2.0;
    Shape::Box {
        min: [x - h, y - h, z - h],
        max: [x + h, y + h, z + h],
    }
}

/// First camera at the origin looking down +z; the second displaced by
/// `baseline` and turned by `yaw_deg`, both jittered by the seed.
fn cameras(rng: &mut ChaCha8Rng, baseline: Vector3<f64>, yaw_deg: f64) -> [Camera; 2] {
    let k = intrinsics();
    let c0 = Camera::looking(k, nalgebra::Matrix3::identity(), Vector3::zeros());
    let jitter = Vector3::new(
        rng.random_range(-0.05..0.05),
        rng.random_range(-0.03..0.03),
        rng.random_range(-0.05..0.05),
    );
    let angles = (
        rng.random_range(-1.0f64..1.0).to_radians(),
        (yaw_deg + rng.random_range(-1.0..1.0)).to_radians(),
        rng.random_range(-1.0f64..1.0).to_radians(),
    );
    let r = Rotation3::from_euler_angles(angles.0, angles.1, angles.2).into_inner();
    [c0, Camera::looking(k, r, baseline + jitter)]
}
