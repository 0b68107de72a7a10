use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{geometry_consistency, AreaMatchEntry, GamError};
use crate::config::SgamConfig;
use crate::geometry::MatchSet;
use crate::sam::{Area, AreaMatchCandidate, MatchStatus};

/// One injective assignment between the doubtful areas of both images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpAssignment {
    /// `(index into doubtful0, index into doubtful1)` pairs.
    pub pairs: Vec<(usize, usize)>,
    /// Set consistency; absent when some pairing could not be certified.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    /// `exp(-g)`, zero for invalid assignments.
    pub probability: f64,
}

impl GpAssignment {
    /// Log-probability `-g`, which keeps resolution where `exp(-g)` underflows.
    pub fn log_probability(&self) -> f64 {
        self.g.map_or(f64::NEG_INFINITY, |g| -g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpOutcome {
    pub selected: Vec<AreaMatchEntry>,
    /// Every enumerated assignment in enumeration order; empty under the
    /// greedy fallback.
    pub assignments: Vec<GpAssignment>,
    pub greedy: bool,
}

/// Resolves doubtful areas of one group by geometry consistency.
///
/// Every pairing is matched once through `match_pair` (in parallel); each
/// injective assignment from the smaller side into the larger is then scored
/// by the consistency of its pairings, and the most probable one returned.
/// When the number of assignments exceeds `config.gp_enumeration_cap`, the
/// assignment is built greedily, adding the pairing that keeps the set most
/// consistent.
pub fn gp_predict<F>(doubtful0: &[Area], doubtful1: &[Area], match_pair: F, config: &SgamConfig) -> Result<GpOutcome, GamError>
where
    F: Fn(&Area, &Area) -> Option<MatchSet> + Sync,
{
    if doubtful0.is_empty() || doubtful1.is_empty() {
        return Err(GamError::Empty);
    }
    let cells: Vec<(usize, usize)> = (0..doubtful0.len())
        .flat_map(|i| (0..doubtful1.len()).map(move |j| (i, j)))
        .collect();
    let table: Vec<AreaMatchEntry> = cells
        .par_iter()
        .map(|&(i, j)| {
            let (a0, a1) = (&doubtful0[i], &doubtful1[j]);
            let candidate = AreaMatchCandidate {
                a0: a0.clone(),
                a1: a1.clone(),
                kind: a0.kind,
                desc_distance: 0.0,
                status: MatchStatus::Accepted,
            };
            let matches = match_pair(a0, a1).unwrap_or_default();
            AreaMatchEntry::new(candidate, matches, config)
        })
        .collect();
    let entry = |(i, j): (usize, usize)| &table[i * doubtful1.len() + j];

    let transpose = doubtful0.len() > doubtful1.len();
    let (small, big) = if transpose {
        (doubtful1.len(), doubtful0.len())
    } else {
        (doubtful0.len(), doubtful1.len())
    };
    let orient = |s: usize, b: usize| if transpose { (b, s) } else { (s, b) };

    if permutations(big, small).is_some_and(|l| l <= config.gp_enumeration_cap) {
        let mut maps = Vec::new();
        injective_maps(small, big, &mut Vec::new(), &mut vec![false; big], &mut maps);
        let assignments: Vec<GpAssignment> = maps
            .par_iter()
            .map(|m| {
                let pairs: Vec<(usize, usize)> = m.iter().enumerate().map(|(s, &b)| orient(s, b)).collect();
                let g = set_g(pairs.iter().map(|&p| entry(p)));
                GpAssignment {
                    probability: g.map_or(0.0, |g| (-g).exp()),
                    pairs,
                    g,
                }
            })
            .collect();
        let best = assignments
            .iter()
            .enumerate()
            .filter(|(_, a)| a.g.is_some())
            .max_by(|x, y| x.1.log_probability().total_cmp(&y.1.log_probability()).then(y.0.cmp(&x.0)))
            .map(|(k, _)| k)
            .ok_or(GamError::AllAssignmentsInvalid)?;
        let selected = assignments[best].pairs.iter().map(|&p| entry(p).clone()).collect();
        return Ok(GpOutcome {
            selected,
            assignments,
            greedy: false,
        });
    }

    let mut chosen: Vec<(usize, usize)> = Vec::new();
    let (mut used0, mut used1) = (vec![false; doubtful0.len()], vec![false; doubtful1.len()]);
    while chosen.len() < small {
        let best = cells
            .iter()
            .filter(|&&(i, j)| !used0[i] && !used1[j] && entry((i, j)).fundamental.is_some())
            .filter_map(|&p| {
                let g = set_g(chosen.iter().chain(std::iter::once(&p)).map(|&q| entry(q)))?;
                Some((p, g))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some(((i, j), _)) = best else { break };
        used0[i] = true;
        used1[j] = true;
        chosen.push((i, j));
    }
    if chosen.is_empty() {
        return Err(GamError::AllAssignmentsInvalid);
    }
    Ok(GpOutcome {
        selected: chosen.iter().map(|&p| entry(p).clone()).collect(),
        assignments: Vec::new(),
        greedy: true,
    })
}

fn set_g<'a>(entries: impl Iterator<Item = &'a AreaMatchEntry>) -> Option<f64> {
    let entries: Vec<AreaMatchEntry> = entries.cloned().collect();
    if entries.iter().any(|e| e.fundamental.is_none()) {
        return None;
    }
    geometry_consistency(&entries).ok().map(|r| r.set_g)
}

/// `n! / (n - k)!`, or `None` on overflow.
fn permutations(n: usize, k: usize) -> Option<usize> {
    (n - k + 1..=n).try_fold(1usize, |acc, v| acc.checked_mul(v))
}

fn injective_maps(k: usize, n: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for b in 0..n {
        if !used[b] {
            used[b] = true;
            cur.push(b);
            injective_maps(k, n, cur, used, out);
            cur.pop();
            used[b] = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::gam::test_support::{area_matches, true_motion};
    use crate::sam::AreaKind;
    use crate::semantic::BBox;

    fn area(id: usize, b: BBox) -> Area {
        Area::new(id, b, AreaKind::Soa, Some(7))
    }

    /// Two look-alike areas per image at swapped list positions; only the
    /// true pairings produce matches consistent with the scene motion.
    fn fixture(seed: u64) -> (Vec<Area>, Vec<Area>, impl Fn(&Area, &Area) -> Option<MatchSet> + Sync) {
        let b = [
            BBox::new(40.0, 60.0, 240.0, 260.0),
            BBox::new(380.0, 200.0, 600.0, 420.0),
            BBox::new(250.0, 20.0, 370.0, 140.0),
        ];
        let d0 = vec![area(0, b[0]), area(1, b[1]), area(2, b[2])];
        let d1 = vec![area(0, b[1]), area(1, b[0])];
        let (r, t) = true_motion();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cache = HashMap::new();
        for a in &d0 {
            cache.insert(a.id, area_matches(&mut rng, a.bbox, &r, &t, 150, 0.5));
        }
        let matcher = move |a0: &Area, a1: &Area| {
            let m = &cache[&a0.id];
            if a0.bbox == a1.bbox {
                return Some(m.clone());
            }
            if a0.id == 2 {
                return None;
            }
            // a wrong pairing: points of a0 land on the shifted area a1
            let (dx, dy) = (a1.bbox.min_x - a0.bbox.min_x, a1.bbox.min_y - a0.bbox.min_y);
            Some(MatchSet::new(m.iter().map(|c| {
                let mut c = *c;
                c.p.x += dx + 0.01 * c.q.y;
                c.p.y += dy - 0.02 * c.q.x;
                c
            })))
        };
        (d0, d1, matcher)
    }

    #[test]
    fn true_assignment_is_selected() {
        for seed in 0..4 {
            let (d0, d1, m) = fixture(seed);
            let out = gp_predict(&d0, &d1, &m, &SgamConfig::default()).unwrap();
            assert!(!out.greedy);
            assert_eq!(out.assignments.len(), 6);
            for e in &out.selected {
                assert_eq!(e.candidate.a0.bbox, e.candidate.a1.bbox, "seed {seed}");
            }
            let argmin = out
                .assignments
                .iter()
                .filter(|a| a.g.is_some())
                .min_by(|a, b| a.g.unwrap().total_cmp(&b.g.unwrap()))
                .unwrap();
            let best = out.assignments.iter().max_by(|a, b| a.probability.total_cmp(&b.probability)).unwrap();
            assert_eq!(argmin.pairs, best.pairs);
        }
    }

    #[test]
    fn greedy_fallback_agrees() {
        let (d0, d1, m) = fixture(9);
        let config = SgamConfig {
            gp_enumeration_cap: 1,
            ..SgamConfig::default()
        };
        let out = gp_predict(&d0, &d1, &m, &config).unwrap();
        assert!(out.greedy);
        assert_eq!(out.selected.len(), 2);
        for e in &out.selected {
            assert_eq!(e.candidate.a0.bbox, e.candidate.a1.bbox);
        }
    }

    #[test]
    fn permuting_inputs_permutes_output() {
        let (d0, d1, m) = fixture(3);
        let a = gp_predict(&d0, &d1, &m, &SgamConfig::default()).unwrap();
        let r0: Vec<Area> = d0.iter().rev().cloned().collect();
        let r1: Vec<Area> = d1.iter().rev().cloned().collect();
        let b = gp_predict(&r0, &r1, &m, &SgamConfig::default()).unwrap();
        let key = |o: &GpOutcome| {
            let mut v: Vec<u64> = o.selected.iter().map(|e| e.candidate.pair_key()).collect();
            v.sort_unstable();
            v
        };
        assert_eq!(key(&a), key(&b));
    }

    #[test]
    fn single_pairing_is_returned() {
        let (d0, d1, m) = fixture(1);
        let out = gp_predict(&d0[..1], &d1[1..], &m, &SgamConfig::default()).unwrap();
        assert_eq!(out.selected.len(), 1);
        assert_eq!(out.assignments.len(), 1);
    }

    #[test]
    fn all_invalid_is_reported() {
        let (d0, d1, _) = fixture(1);
        let none = |_: &Area, _: &Area| None;
        assert!(matches!(
            gp_predict(&d0, &d1, none, &SgamConfig::default()),
            Err(GamError::AllAssignmentsInvalid)
        ));
    }

    #[test]
    fn permutation_count() {
        assert_eq!(permutations(6, 6), Some(720));
        assert_eq!(permutations(5, 2), Some(20));
        assert_eq!(permutations(3, 0), Some(1));
        assert_eq!(permutations(40, 30), None);
    }
}
