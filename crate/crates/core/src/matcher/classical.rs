use image::RgbImage;

use super::{MatcherError, MatcherRequest, MatcherResponse, PointMatcher};

/// Normalized cross-correlation of square patches on a sparse grid, searched
/// around the same crop position in the second crop, with parabolic
/// subpixel refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalMatcher {
    pub patch: usize,
    pub grid_step: usize,
    pub search_radius: usize,
    pub min_ncc: f64,
}

impl Default for ClassicalMatcher {
    fn default() -> Self {
        Self {
            patch: 16,
            grid_step: 16,
            search_radius: 16,
            min_ncc: 0.8,
        }
    }
}

struct Gray {
    w: usize,
    h: usize,
    v: Vec<f64>,
}

impl Gray {
    fn new(img: &RgbImage) -> Self {
        let v = img
            .pixels()
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect();
        Self {
            w: img.width() as usize,
            h: img.height() as usize,
            v,
        }
    }

    /// Zero-mean, unit-norm patch with top-left corner (x, y); `None` for
    /// flat patches.
    fn patch(&self, x: usize, y: usize, n: usize) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(n * n);
        for row in y..y + n {
            out.extend_from_slice(&self.v[row * self.w + x..row * self.w + x + n]);
        }
        let mean = out.iter().sum::<f64>() / out.len() as f64;
        out.iter_mut().for_each(|v| *v -= mean);
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-6 * out.len() as f64 {
            return None;
        }
        out.iter_mut().for_each(|v| *v /= norm);
        Some(out)
    }
}

/// Vertex offset of the parabola through three samples, in [-0.5, 0.5].
fn parabola(l: f64, c: f64, r: f64) -> f64 {
    let denom = l - 2.0 * c + r;
    if denom.abs() < 1e-12 {
        return 0.0;
    }
    (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
}

impl PointMatcher for ClassicalMatcher {
    fn match_pair(&self, req: &MatcherRequest) -> Result<MatcherResponse, MatcherError> {
        let (g0, g1) = (Gray::new(&req.image0), Gray::new(&req.image1));
        let n = self.patch.max(2);
        let half = n / 2;
        let rad = self.search_radius as isize;
        let mut pairs = Vec::new();
        let mut confs = Vec::new();

        let mut y = 0;
        while y + n <= g0.h {
            let mut x = 0;
            while x + n <= g0.w {
                if let Some(p0) = g0.patch(x, y, n) {
                    let score = |dx: isize, dy: isize| -> Option<f64> {
                        let (x1, y1) = (x as isize + dx, y as isize + dy);
                        if x1 < 0 || y1 < 0 || x1 as usize + n > g1.w || y1 as usize + n > g1.h {
                            return None;
                        }
                        let p1 = g1.patch(x1 as usize, y1 as usize, n)?;
                        Some(p0.iter().zip(&p1).map(|(a, b)| a * b).sum())
                    };
                    let mut best: Option<(f64, isize, isize)> = None;
                    for dy in -rad..=rad {
                        for dx in -rad..=rad {
                            if let Some(s) = score(dx, dy) {
                                if best.is_none_or(|b| s > b.0) {
                                    best = Some((s, dx, dy));
                                }
                            }
                        }
                    }
                    if let Some((s, dx, dy)) = best.filter(|b| b.0 > self.min_ncc) {
                        let around = |ddx: isize, ddy: isize| score(dx + ddx, dy + ddy).unwrap_or(s);
                        let sx = parabola(around(-1, 0), s, around(1, 0));
                        let sy = parabola(around(0, -1), s, around(0, 1));
                        let (cx, cy) = ((x + half) as f64, (y + half) as f64);
                        pairs.push([cx, cy, cx + dx as f64 + sx, cy + dy as f64 + sy]);
                        confs.push(s.clamp(0.0, 1.0));
                    }
                }
                x += self.grid_step.max(1);
            }
            y += self.grid_step.max(1);
        }

        // strongest correlations first when capped
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.sort_by(|&a, &b| confs[b].total_cmp(&confs[a]).then(a.cmp(&b)));
        order.truncate(req.max_matches);
        order.sort_unstable();
        let pairs: Vec<[f64; 4]> = order.iter().map(|&i| pairs[i]).collect();
        let confs: Vec<f64> = order.iter().map(|&i| confs[i]).collect();
        Ok(MatcherResponse::from_crop(&pairs, Some(confs), &req.transform0, &req.transform1))
    }

    fn name(&self) -> String {
        "classical-ncc".into()
    }
}
