use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{mix, MatcherError, MatcherRequest, MatcherResponse, PointMatcher};
use crate::geometry::{Correspondence, MatchSet, Point2};
use crate::synth::SceneTruth;

/// Ground-truth matcher for synthetic scenes.
///
/// Points are sampled in the first crop and matched by appearance: to their
/// true projection when it lies in the second crop, otherwise to the same
/// surface coordinates on an identical-looking object that does. Noise is
/// Gaussian in crop pixels, so coarser crops yield coarser matches, and a
/// Bernoulli fraction of matches is replaced by uniform points in the
/// second crop.
#[derive(Debug, Clone)]
pub struct OracleMatcher {
    pub truth: Arc<SceneTruth>,
    pub noise_sigma: f64,
    pub outlier_rate: f64,
    pub n_matches: usize,
    pub seed: u64,
}

impl OracleMatcher {
    pub fn new(truth: Arc<SceneTruth>) -> Self {
        Self {
            truth,
            noise_sigma: 0.0,
            outlier_rate: 0.0,
            n_matches: 500,
            seed: 0,
        }
    }

    pub fn with_noise(mut self, sigma: f64, outlier_rate: f64) -> Self {
        self.noise_sigma = sigma;
        self.outlier_rate = outlier_rate;
        self
    }

    pub fn with_matches(mut self, n: usize) -> Self {
        self.n_matches = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

impl PointMatcher for OracleMatcher {
    fn match_pair(&self, req: &MatcherRequest) -> Result<MatcherResponse, MatcherError> {
        if !(self.noise_sigma >= 0.0 && (0.0..=1.0).contains(&self.outlier_rate)) {
            return Err(MatcherError::InvalidRequest(format!(
                "oracle noise {} / outlier rate {} out of range",
                self.noise_sigma, self.outlier_rate
            )));
        }
        let needed = self.n_matches.min(req.max_matches);
        if needed == 0 {
            return Ok(MatcherResponse::default());
        }
        let scene = self.truth.scene();
        let bounds0 = crate::semantic::BBox::new(0.0, 0.0, scene.width as f64, scene.height as f64);
        let region1 = req.region1().intersection(&bounds0);
        let Some(region1) = region1 else {
            return Err(MatcherError::InsufficientCovisibility { found: 0, needed });
        };

        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed ^ mix(req.key())));
        let (w0, h0) = (req.image0.width() as usize, req.image0.height() as usize);
        let mut order: Vec<u32> = (0..(w0 * h0) as u32).collect();
        order.shuffle(&mut rng);

        let mut found = Vec::with_capacity(needed);
        for idx in order {
            let (x, y) = ((idx as usize % w0) as f64, (idx as usize / w0) as f64);
            let c = Point2::new(x + rng.random::<f64>(), y + rng.random::<f64>());
            let q = req.transform0.to_original(&c);
            if !bounds0.contains(&q) {
                continue;
            }
            if let Some(p) = self.truth.appearance_match(&q, &region1) {
                found.push(Correspondence::new(q, p));
                if found.len() == needed {
                    break;
                }
            }
        }
        if found.len() < needed {
            return Err(MatcherError::InsufficientCovisibility {
                found: found.len(),
                needed,
            });
        }

        let noise = Normal::new(0.0, self.noise_sigma.max(0.0)).expect("finite sigma");
        let (w1, h1) = (req.image1.width() as f64, req.image1.height() as f64);
        let t1 = &req.transform1;
        for c in &mut found {
            let crop = if rng.random::<f64>() < self.outlier_rate {
                Point2::new(rng.random_range(0.0..w1), rng.random_range(0.0..h1))
            } else if self.noise_sigma > 0.0 {
                let p = t1.to_crop(&c.p);
                Point2::new(p.x + noise.sample(&mut rng), p.y + noise.sample(&mut rng))
            } else {
                continue;
            };
            c.p = t1.to_original(&crop);
        }
        Ok(MatcherResponse {
            matches: MatchSet::new(found),
            confidences: None,
        })
    }

    fn name(&self) -> String {
        format!("oracle(sigma={}, outliers={})", self.noise_sigma, self.outlier_rate)
    }
}
