//! Seeded synthetic indoor scenes with exact ground truth: rendered color
//! and label images, depth, relative pose, and an occlusion-aware oracle.

mod fixtures;
mod render;
mod scene;
mod texture;
mod truth;

use std::path::Path;
use std::sync::Arc;

use image::RgbImage;
use nalgebra::Matrix3;
use thiserror::Error;

pub use fixtures::{intrinsics, Fixture, HEIGHT, WIDTH};
pub use render::{rasterize, View};
pub use scene::{camera_to_world, Camera, Face, Object, Scene, Shape};
pub use truth::{SceneTruth, SurfacePoint};

use crate::eval::{DepthMap, EvalError, GroundTruth, GroundTruthFile};
use crate::semantic::{save_semantic_map_png, SemanticError, SemanticMap};

/// Scenes whose views share less than this fraction of pixels are rejected.
pub const MIN_COVISIBLE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("scene has no primitives")]
    Empty,
    #[error("views share only {:.1}% of their pixels", .0 * 100.0)]
    NoOverlap(f64),
    #[error("unknown fixture {0:?}")]
    UnknownFixture(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Semantic(#[from] SemanticError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Both views of a scene plus everything needed to score matches on them.
#[derive(Debug, Clone)]
pub struct RenderedPair {
    pub rgb: [RgbImage; 2],
    pub sem: [SemanticMap; 2],
    pub depth: [DepthMap; 2],
    /// Plane-induced homography when every primitive is coplanar.
    pub homography: Option<Matrix3<f64>>,
    pub truth: Arc<SceneTruth>,
}

impl RenderedPair {
    pub fn scene(&self) -> &Scene {
        self.truth.scene()
    }

    pub fn ground_truth(&self) -> GroundTruth {
        self.truth.ground_truth()
    }

    /// Writes `rgb{0,1}.png`, `sem{0,1}.png`, `depth{0,1}.pfm` and `gt.json`.
    pub fn write(&self, dir: &Path) -> Result<(), SynthError> {
        std::fs::create_dir_all(dir)?;
        for i in 0..2 {
            self.rgb[i].save(dir.join(format!("rgb{i}.png")))?;
            save_semantic_map_png(&self.sem[i], &dir.join(format!("sem{i}.png")))?;
            self.depth[i].write_pfm(&dir.join(format!("depth{i}.pfm")))?;
        }
        let scene = self.scene();
        let gt = GroundTruthFile {
            k0: Some(scene.cameras[0].k),
            k1: Some(scene.cameras[1].k),
            pose: Some(scene.relative_pose()),
            homography: self.homography,
            depth0: Some("depth0.pfm".into()),
            depth1: Some("depth1.pfm".into()),
            scene: Some(scene.clone()),
        };
        std::fs::write(dir.join("gt.json"), serde_json::to_string_pretty(&gt)?)?;
        Ok(())
    }
}

/// Renders both views of `scene`; textures are seeded by `scene.texture_seed`.
pub fn generate(scene: Scene) -> Result<RenderedPair, SynthError> {
    if scene.objects.is_empty() {
        return Err(SynthError::Empty);
    }
    let homography = plane_homography(&scene);
    let truth = Arc::new(SceneTruth::new(scene));
    let covisible = truth.covisible_fraction(0, 4);
    if covisible < MIN_COVISIBLE {
        return Err(SynthError::NoOverlap(covisible));
    }
    let scene = truth.scene();
    let faces = truth.faces();
    let rgb = [0, 1].map(|c| render::shade(scene, c, truth.view(c), faces));
    let sem = [0, 1].map(|c| render::semantic(scene, truth.view(c)));
    let depth = [0, 1].map(|c| {
        let v = truth.view(c);
        DepthMap::new(v.width, v.height, v.depth.iter().map(|&d| d as f32).collect()).expect("view-sized buffer")
    });
    Ok(RenderedPair {
        rgb,
        sem,
        depth,
        homography,
        truth,
    })
}

/// Renders a catalogue fixture.
pub fn generate_fixture(fixture: Fixture, seed: u64) -> Result<RenderedPair, SynthError> {
    generate(fixture.scene(seed))
}

/// `K1 (R + t nᵀ / d) K0⁻¹` for a scene made only of coplanar quads.
fn plane_homography(scene: &Scene) -> Option<Matrix3<f64>> {
    let faces: Vec<Face> = scene
        .objects
        .iter()
        .map(|o| match o.shape {
            Shape::Quad { .. } => o.shape.faces().into_iter().next(),
            Shape::Box { .. } => None,
        })
        .collect::<Option<_>>()?;
    let first = faces.first()?;
    let coplanar = faces.iter().all(|f| {
        f.normal.cross(&first.normal).norm() < 1e-12 && (f.origin - first.origin).dot(&first.normal).abs() < 1e-12
    });
    if !coplanar {
        return None;
    }
    let c0 = &scene.cameras[0];
    let n0 = c0.rotation * first.normal;
    let d0 = n0.dot(&c0.to_camera(&first.origin));
    if d0.abs() < 1e-12 {
        return None;
    }
    let pose = scene.relative_pose();
    let h = scene.cameras[1].k.matrix() * (pose.rotation + pose.t * n0.transpose() / d0) * c0.k.matrix().try_inverse()?;
    Some(h / h[(2, 2)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    #[test]
    fn fixtures_render_with_overlap() {
        for f in Fixture::ALL {
            let pair = generate_fixture(f, 3).unwrap();
            assert_eq!(pair.sem[0].dims(), (WIDTH, HEIGHT));
            assert!(pair.truth.covisible_fraction(0, 8) > 0.3, "{}", f.name());
        }
    }

    #[test]
    fn planar_homography_agrees_with_projection() {
        let pair = generate_fixture(Fixture::Planar, 1).unwrap();
        let h = pair.homography.unwrap();
        let gt = pair.ground_truth();
        let mut checked = 0;
        for y in (20..460).step_by(40) {
            for x in (20..620).step_by(40) {
                let q = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
                if let Some(p) = gt.project(&q) {
                    let v = h * q.homogeneous();
                    assert!(p.distance(&Point2::new(v.x / v.z, v.y / v.z)) < 1e-6);
                    checked += 1;
                }
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn boxes_have_no_homography() {
        assert!(generate_fixture(Fixture::Room6, 1).unwrap().homography.is_none());
    }
}
