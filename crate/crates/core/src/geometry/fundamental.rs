use nalgebra::{DMatrix, Matrix3};

use super::{Correspondence, FundamentalMatrix, GeometryError, MatchSet, Point2};

/// Relative threshold on the second-smallest singular value of the design
/// matrix below which the configuration has no unique solution.
const DEGENERACY_RATIO: f64 = 1e-10;

/// Normalized 8-point estimate of the fundamental matrix from all matches.
pub fn estimate_fundamental(s: &MatchSet) -> Result<FundamentalMatrix, GeometryError> {
    estimate_from_slice(&s.matches)
}

pub(crate) fn estimate_from_slice(
    matches: &[Correspondence],
) -> Result<FundamentalMatrix, GeometryError> {
    let n = matches.len();
    if n < 8 {
        return Err(GeometryError::InsufficientMatches { got: n, need: 8 });
    }
    let t0 = hartley_transform(matches.iter().map(|c| &c.q))?;
    let t1 = hartley_transform(matches.iter().map(|c| &c.p))?;

    // Pad to 9 rows so the SVD always exposes the full right null space.
    let rows = n.max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, c) in matches.iter().enumerate() {
        let q = t0 * c.q.homogeneous();
        let p = t1 * c.p.homogeneous();
        let (x, y) = (q.x / q.z, q.y / q.z);
        let (xp, yp) = (p.x / p.z, p.y / p.z);
        let row = [xp * x, xp * y, xp, yp * x, yp * y, yp, x, y, 1.0];
        for (j, v) in row.iter().enumerate() {
            a[(i, j)] = *v;
        }
    }

    // nalgebra's SVD can misconverge when singular vectors are requested, so
    // the null vector comes from the eigenvectors of RᵀR and the singular
    // values, computed without vectors, only gate degeneracy
    let r = a.qr().r();
    let sv = r.singular_values();
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
    let largest = sv[order[order.len() - 1]];
    if !(largest > 0.0) || sv[order[1]] < DEGENERACY_RATIO * largest {
        return Err(GeometryError::DegenerateConfiguration);
    }
    let eig = (r.transpose() * &r).symmetric_eigen();
    let smallest = eig.eigenvalues.imin();
    let f = eig.eigenvectors.column(smallest);
    let fn_ = Matrix3::new(f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7], f[8]);

    let rank2 = enforce_rank2(&fn_)?;
    let denorm = t1.transpose() * rank2 * t0;
    // denormalization preserves rank; only rescale
    Ok(FundamentalMatrix::from_rank2(denorm))
}

fn enforce_rank2(m: &Matrix3<f64>) -> Result<Matrix3<f64>, GeometryError> {
    let svd = m.svd(true, true);
    let u = svd.u.ok_or(GeometryError::SvdFailed)?;
    let v_t = svd.v_t.ok_or(GeometryError::SvdFailed)?;
    let mut s = svd.singular_values;
    s[2] = 0.0;
    Ok(u * Matrix3::from_diagonal(&s) * v_t)
}

/// Similarity taking the points to zero centroid and mean distance √2.
fn hartley_transform<'a>(
    points: impl Iterator<Item = &'a Point2> + Clone,
) -> Result<Matrix3<f64>, GeometryError> {
    let mut n = 0.0;
    let (mut sx, mut sy) = (0.0, 0.0);
    for p in points.clone() {
        sx += p.x;
        sy += p.y;
        n += 1.0;
    }
    let (cx, cy) = (sx / n, sy / n);
    let mean_dist = points.map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / n;
    if !(mean_dist > 0.0) || !mean_dist.is_finite() {
        return Err(GeometryError::DegenerateConfiguration);
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}
