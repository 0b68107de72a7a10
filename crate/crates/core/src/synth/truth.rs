use std::sync::Arc;

use nalgebra::Vector3;

use super::render::{rasterize, View};
use super::scene::{Face, Scene};
use crate::eval::{GroundTruth, Projector};
use crate::geometry::Point2;
use crate::semantic::BBox;

/// Surface point seen through a pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub object: usize,
    pub face: usize,
    pub s: f64,
    pub t: f64,
    pub world: Vector3<f64>,
}

/// Exact scene geometry behind a rendered pair: occlusion-aware projection
/// between the views and appearance lookups for the oracle matcher.
#[derive(Debug, Clone)]
pub struct SceneTruth {
    scene: Scene,
    faces: Vec<Vec<Face>>,
    views: [View; 2],
}

impl SceneTruth {
    pub fn new(scene: Scene) -> Self {
        let faces = scene.faces();
        let views = [rasterize(&scene, 0, &faces), rasterize(&scene, 1, &faces)];
        Self { scene, faces, views }
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn view(&self, cam: usize) -> &View {
        &self.views[cam]
    }

    pub(crate) fn faces(&self) -> &[Vec<Face>] {
        &self.faces
    }

    /// Exact surface point under a continuous pixel position.
    pub fn surface(&self, cam: usize, p: &Point2) -> Option<SurfacePoint> {
        let (object, face) = self.views[cam].hit_at(p)?;
        let camera = &self.scene.cameras[cam];
        let f = &self.faces[object][face];
        let origin = camera.center();
        let dir = camera.ray(p);
        let lambda = f.intersect(&origin, &dir)?;
        let world = origin + dir * lambda;
        let (s, t) = f.local(&world);
        Some(SurfacePoint {
            object,
            face,
            s,
            t,
            world,
        })
    }

    /// Pixel of `world` in camera `cam` if that pixel shows the same face.
    pub fn visible_in(&self, cam: usize, object: usize, face: usize, world: &Vector3<f64>) -> Option<Point2> {
        let p = self.scene.cameras[cam].project(world)?;
        (self.views[cam].hit_at(&p) == Some((object, face))).then_some(p)
    }

    /// Where a matcher looking only at appearance would place `q` inside
    /// `region1` of the second image: the true projection if it lies there,
    /// otherwise the same surface coordinates on another object sharing
    /// label and texture.
    pub fn appearance_match(&self, q: &Point2, region1: &BBox) -> Option<Point2> {
        let sp = self.surface(0, q)?;
        if let Some(p) = self.visible_in(1, sp.object, sp.face, &sp.world) {
            if region1.contains(&p) {
                return Some(p);
            }
        }
        let src = &self.scene.objects[sp.object];
        if src.label == 0 {
            return None;
        }
        for (oi, obj) in self.scene.objects.iter().enumerate() {
            if oi == sp.object || obj.label != src.label || obj.texture != src.texture {
                continue;
            }
            let Some(f) = self.faces[oi].get(sp.face) else {
                continue;
            };
            if !f.contains_local(sp.s, sp.t) {
                continue;
            }
            if let Some(p) = self.visible_in(1, oi, sp.face, &f.point(sp.s, sp.t)) {
                if region1.contains(&p) {
                    return Some(p);
                }
            }
        }
        None
    }

    /// Bounding box of an object's visible pixels.
    pub fn instance_bbox(&self, cam: usize, object: usize) -> Option<BBox> {
        let v = &self.views[cam];
        let mut b: Option<BBox> = None;
        for y in 0..v.height {
            for x in 0..v.width {
                if v.hit_at(&Point2::new(x as f64 + 0.5, y as f64 + 0.5)).map(|h| h.0) == Some(object) {
                    let px = BBox::new(x as f64, y as f64, x as f64 + 1.0, y as f64 + 1.0);
                    b = Some(b.map_or(px, |b| b.union(&px)));
                }
            }
        }
        b
    }

    /// Fraction of camera `from`'s pixels (sampled on a stride) visible in
    /// the other camera.
    pub fn covisible_fraction(&self, from: usize, stride: usize) -> f64 {
        let to = 1 - from;
        let v = &self.views[from];
        let (mut seen, mut total) = (0usize, 0usize);
        for y in (0..v.height).step_by(stride.max(1)) {
            for x in (0..v.width).step_by(stride.max(1)) {
                total += 1;
                let p = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
                if let Some(sp) = self.surface(from, &p) {
                    if self.visible_in(to, sp.object, sp.face, &sp.world).is_some() {
                        seen += 1;
                    }
                }
            }
        }
        seen as f64 / total.max(1) as f64
    }

    pub fn ground_truth(self: &Arc<Self>) -> GroundTruth {
        GroundTruth {
            pose: Some(self.scene.relative_pose()),
            k0: Some(self.scene.cameras[0].k),
            k1: Some(self.scene.cameras[1].k),
            projector: self.clone(),
        }
    }
}

impl Projector for SceneTruth {
    fn project(&self, q: &Point2) -> Option<Point2> {
        let sp = self.surface(0, q)?;
        self.visible_in(1, sp.object, sp.face, &sp.world)
    }
}
