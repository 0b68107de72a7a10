use image::{Rgb, RgbImage};
use nalgebra::Vector3;

use super::scene::{Face, Scene};
use super::texture;
use crate::geometry::Point2;
use crate::semantic::SemanticMap;

/// Encodes (object, face) as `object * 8 + face + 1`; zero is empty.
pub(crate) fn hit_code(object: usize, face: usize) -> u32 {
    (object * 8 + face + 1) as u32
}

pub(crate) fn decode_hit(code: u32) -> Option<(usize, usize)> {
    (code != 0).then(|| (((code - 1) / 8) as usize, ((code - 1) % 8) as usize))
}

/// Z-buffer of one camera: depth and the visible (object, face) per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub width: usize,
    pub height: usize,
    /// z-depth at pixel centers; 0 where nothing was hit
    pub depth: Vec<f64>,
    pub hits: Vec<u32>,
}

impl View {
    pub fn hit_at(&self, p: &Point2) -> Option<(usize, usize)> {
        if !(p.x >= 0.0 && p.y >= 0.0) {
            return None;
        }
        let (x, y) = (p.x as usize, p.y as usize);
        if x >= self.width || y >= self.height {
            return None;
        }
        decode_hit(self.hits[y * self.width + x])
    }
}

/// Rasterizes every face into camera `cam` with exact per-pixel ray-plane
/// depth. On exact depth ties the earlier object wins.
pub fn rasterize(scene: &Scene, cam: usize, faces: &[Vec<Face>]) -> View {
    let (w, h) = (scene.width, scene.height);
    let camera = &scene.cameras[cam];
    let center = camera.center();
    let mut depth = vec![f64::INFINITY; w * h];
    let mut hits = vec![0u32; w * h];

    for (oi, obj_faces) in faces.iter().enumerate() {
        for (fi, face) in obj_faces.iter().enumerate() {
            let Some((x0, y0, x1, y1)) = screen_bounds(scene, cam, face) else {
                continue;
            };
            let code = hit_code(oi, fi);
            for y in y0..y1 {
                for x in x0..x1 {
                    let dir = camera.ray(&Point2::new(x as f64 + 0.5, y as f64 + 0.5));
                    let Some(lambda) = face.intersect(&center, &dir) else {
                        continue;
                    };
                    let (s, t) = face.local(&(center + dir * lambda));
                    if !face.contains_local(s, t) {
                        continue;
                    }
                    let idx = y * w + x;
                    if lambda < depth[idx] {
                        depth[idx] = lambda;
                        hits[idx] = code;
                    }
                }
            }
        }
    }
    for d in &mut depth {
        if !d.is_finite() {
            *d = 0.0;
        }
    }
    View {
        width: w,
        height: h,
        depth,
        hits,
    }
}

/// Pixel rectangle covering the face's projection, or the whole image when
/// the face crosses the camera plane.
fn screen_bounds(scene: &Scene, cam: usize, face: &Face) -> Option<(usize, usize, usize, usize)> {
    let camera = &scene.cameras[cam];
    let corners = face.corners();
    let cam_pts: Vec<Vector3<f64>> = corners.iter().map(|c| camera.to_camera(c)).collect();
    if cam_pts.iter().all(|p| p.z <= 1e-9) {
        return None;
    }
    if cam_pts.iter().any(|p| p.z <= 1e-6) {
        return Some((0, 0, scene.width, scene.height));
    }
    let px: Vec<Point2> = cam_pts.iter().filter_map(|p| camera.k.project(p)).collect();
    let min_x = px.iter().map(|p| p.x).fold(f64::INFINITY, f64::min).floor() - 1.0;
    let max_x = px.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max).ceil() + 1.0;
    let min_y = px.iter().map(|p| p.y).fold(f64::INFINITY, f64::min).floor() - 1.0;
    let max_y = px.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max).ceil() + 1.0;
    let clip = |v: f64, hi: usize| v.clamp(0.0, hi as f64) as usize;
    let b = (
        clip(min_x, scene.width),
        clip(min_y, scene.height),
        clip(max_x, scene.width),
        clip(max_y, scene.height),
    );
    (b.0 < b.2 && b.1 < b.3).then_some(b)
}

pub fn semantic(scene: &Scene, view: &View) -> SemanticMap {
    SemanticMap::from_fn(view.width, view.height, |x, y| {
        decode_hit(view.hits[y * view.width + x]).map_or(0, |(o, _)| scene.objects[o].label)
    })
}

/// Textured color image; faces are shaded by orientation.
pub fn shade(scene: &Scene, cam: usize, view: &View, faces: &[Vec<Face>]) -> RgbImage {
    let camera = &scene.cameras[cam];
    let center = camera.center();
    let light = Vector3::new(0.3, -0.8, -0.5).normalize();
    RgbImage::from_fn(view.width as u32, view.height as u32, |x, y| {
        let idx = y as usize * view.width + x as usize;
        let Some((o, f)) = decode_hit(view.hits[idx]) else {
            return Rgb([0, 0, 0]);
        };
        let face = &faces[o][f];
        let dir = camera.ray(&Point2::new(x as f64 + 0.5, y as f64 + 0.5));
        let (s, t) = face.local(&(center + dir * view.depth[idx]));
        let tex = scene.objects[o].texture;
        let v = texture::intensity(scene.texture_seed, tex, f as u8, s, t);
        let lit = 0.65 + 0.35 * face.normal.dot(&light).abs();
        let tint = texture::tint(scene.texture_seed, tex);
        Rgb(std::array::from_fn(|k| (255.0 * (tint[k] * v * lit).clamp(0.0, 1.0)).round() as u8))
    })
}
