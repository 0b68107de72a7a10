use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Correspondence, MatchSet};

/// Grid step (px) under which two correspondences count as the same.
pub const DEDUP_GRID: f64 = 0.5;

/// Keeps the first of every group of correspondences falling in the same
/// `DEDUP_GRID` cell in both images.
pub fn dedup_grid(matches: impl IntoIterator<Item = Correspondence>) -> MatchSet {
    let cell = |v: f64| (v / DEDUP_GRID).round() as i64;
    let mut seen = HashSet::new();
    MatchSet::new(
        matches
            .into_iter()
            .filter(|c| c.is_finite() && seen.insert([cell(c.q.x), cell(c.q.y), cell(c.p.x), cell(c.p.y)])),
    )
}

/// Spreads at most `cap` matches over the first image.
///
/// The image is cut into a `⌈√cap⌉ × ⌈√cap⌉` grid and cells are visited
/// round-robin, taking one match (in seeded random order) from each
/// non-empty cell per round.
pub fn uniform_sample(s: &MatchSet, dims: (usize, usize), cap: usize, seed: u64) -> MatchSet {
    let s = MatchSet::new(s.iter().copied());
    if s.len() <= cap {
        return s;
    }
    let g = (cap as f64).sqrt().ceil() as usize;
    let (w, h) = (dims.0.max(1) as f64, dims.1.max(1) as f64);
    let mut cells: Vec<Vec<Correspondence>> = vec![Vec::new(); g * g];
    for c in s.iter() {
        let cx = ((c.q.x / w * g as f64).floor().max(0.0) as usize).min(g - 1);
        let cy = ((c.q.y / h * g as f64).floor().max(0.0) as usize).min(g - 1);
        cells[cy * g + cx].push(*c);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for cell in &mut cells {
        cell.shuffle(&mut rng);
    }
    let mut out = Vec::with_capacity(cap);
    let mut round = 0;
    while out.len() < cap {
        let before = out.len();
        for cell in &cells {
            if let Some(c) = cell.get(round) {
                out.push(*c);
                if out.len() == cap {
                    break;
                }
            }
        }
        if out.len() == before {
            break;
        }
        round += 1;
    }
    MatchSet::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    fn c(x: f64, y: f64) -> Correspondence {
        Correspondence::new(Point2::new(x, y), Point2::new(x + 1.0, y))
    }

    #[test]
    fn small_sets_pass_through() {
        let s = MatchSet::new((0..10).map(|i| c(i as f64, 1.0)));
        assert_eq!(uniform_sample(&s, (100, 100), 10, 0), s);
    }

    #[test]
    fn spread_matches_survive_a_cluster() {
        let mut v: Vec<Correspondence> = (0..10_000).map(|i| c(1.0 + (i % 100) as f64 * 0.001, 1.0 + (i / 100) as f64 * 0.001)).collect();
        let spread: Vec<Correspondence> = (0..400).map(|i| c(30.0 + (i % 20) as f64 * 30.0, 30.0 + (i / 20) as f64 * 22.0)).collect();
        v.extend(&spread);
        let out = uniform_sample(&MatchSet::new(v), (640, 480), 500, 3);
        assert_eq!(out.len(), 500);
        assert!(spread.iter().all(|m| out.matches.contains(m)));
    }

    #[test]
    fn same_seed_same_output() {
        let s = MatchSet::new((0..2000).map(|i| c((i * 37 % 640) as f64, (i * 11 % 480) as f64)));
        assert_eq!(uniform_sample(&s, (640, 480), 100, 9), uniform_sample(&s, (640, 480), 100, 9));
    }

    #[test]
    fn grid_dedup_merges_near_duplicates() {
        let s = dedup_grid([c(1.0, 1.0), c(1.1, 1.05), c(2.0, 1.0)]);
        assert_eq!(s.len(), 2);
    }
}
