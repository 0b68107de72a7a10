use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use super::{CameraIntrinsics, FundamentalMatrix, GeometryError, MatchSet, PoseEstimate};

/// Relative pose from `F` and intrinsics, choosing among the four essential
/// matrix decompositions by cheirality voting over `s`.
pub fn recover_pose(
    f: &FundamentalMatrix,
    k0: &CameraIntrinsics,
    k1: &CameraIntrinsics,
    s: &MatchSet,
) -> Result<PoseEstimate, GeometryError> {
    if s.is_empty() {
        return Err(GeometryError::EmptySet);
    }
    k0.validate()?;
    k1.validate()?;
    let e = k1.matrix().transpose() * f.matrix() * k0.matrix();
    let svd = e.svd(true, true);
    let mut u = svd.u.ok_or(GeometryError::SvdFailed)?;
    let mut v_t = svd.v_t.ok_or(GeometryError::SvdFailed)?;
    if u.determinant() < 0.0 {
        u = -u;
    }
    if v_t.determinant() < 0.0 {
        v_t = -v_t;
    }
    // E ~ U diag(1,1,0) Vᵀ with both factors proper rotations
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let r_a = u * w * v_t;
    let r_b = u * w.transpose() * v_t;
    let t = u.column(2).into_owned();

    let rays: Vec<(Vector3<f64>, Vector3<f64>)> = s
        .iter()
        .map(|c| (k0.unproject(&c.q), k1.unproject(&c.p)))
        .collect();

    let candidates = [(r_a, t), (r_a, -t), (r_b, t), (r_b, -t)];
    let mut votes: Vec<(usize, usize)> = candidates
        .iter()
        .enumerate()
        .map(|(i, (r, t))| (i, count_in_front(r, t, &rays)))
        .collect();
    votes.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let (best, count) = votes[0];
    let runner_up = votes[1].1;
    if 2 * count <= rays.len() || count == runner_up {
        return Err(GeometryError::CheiralityTie);
    }
    let (r, t) = candidates[best];
    PoseEstimate::new(orthonormalize(&r), t, count)
}

fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => u * v_t,
        _ => *r,
    }
}

/// Number of rays whose two-view triangulation lies in front of both cameras.
fn count_in_front(r: &Matrix3<f64>, t: &Vector3<f64>, rays: &[(Vector3<f64>, Vector3<f64>)]) -> usize {
    rays.iter()
        .filter(|(x0, x1)| match triangulate_depths(r, t, x0, x1) {
            Some((z0, z1)) => z0 > 0.0 && z1 > 0.0,
            None => false,
        })
        .count()
}

/// Least-squares depths `(z0, z1)` with `z1 x1 ≈ R (z0 x0) + t`.
fn triangulate_depths(
    r: &Matrix3<f64>,
    t: &Vector3<f64>,
    x0: &Vector3<f64>,
    x1: &Vector3<f64>,
) -> Option<(f64, f64)> {
    let a = r * x0;
    let b = -x1;
    // normal equations of [a b] [z0 z1]ᵀ = -t
    let ata = Matrix2::new(a.dot(&a), a.dot(&b), b.dot(&a), b.dot(&b));
    let atb = Vector2::new(-a.dot(t), -b.dot(t));
    let z = ata.try_inverse()? * atb;
    // z1 is the depth in camera 1 only up to the ray scale (x1.z = 1)
    Some((z.x, z.y))
}

/// Angular rotation error and folded translation-direction error, degrees.
pub fn pose_error(est: &PoseEstimate, gt: &PoseEstimate) -> (f64, f64) {
    let rel = gt.rotation.transpose() * est.rotation;
    // atan2 form of arccos((tr - 1) / 2), accurate near zero
    let axis = Vector3::new(rel[(2, 1)] - rel[(1, 2)], rel[(0, 2)] - rel[(2, 0)], rel[(1, 0)] - rel[(0, 1)]);
    let rot = (0.5 * axis.norm()).atan2(0.5 * (rel.trace() - 1.0)).to_degrees();
    let (a, b) = (&est.translation_dir, &gt.translation_dir);
    let trans = a.cross(b).norm().atan2(a.dot(b).abs()).to_degrees();
    (rot, trans)
}
