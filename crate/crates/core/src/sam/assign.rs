//! Nearest-neighbor area assignment with ambiguity flagging, shared by
//! object and intersection areas.

use std::collections::BTreeSet;

use super::{Area, AreaKind, AreaMatchCandidate, AreaMatches, MatchStatus};

/// `distances[i][j]` is `None` when `j` is not an admissible candidate for `i`.
pub(crate) fn assign(
    areas0: &[Area],
    areas1: &[Area],
    distances: &[Vec<Option<f64>>],
    kind: AreaKind,
    max_distance: f64,
    ambiguity_gap: f64,
) -> AreaMatches {
    let mut doubt0 = BTreeSet::new();
    let mut doubt1 = BTreeSet::new();
    let mut doubtful_pairs = Vec::new();
    // (i, j, d) proposals from the first image's side
    let mut proposals: Vec<(usize, usize, f64)> = Vec::new();

    for (i, row) in distances.iter().enumerate() {
        let mut cands: Vec<(usize, f64)> = row
            .iter()
            .enumerate()
            .filter_map(|(j, d)| d.map(|d| (j, d)))
            .collect();
        if cands.is_empty() {
            continue;
        }
        cands.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let (best_j, best_d) = cands[0];
        let rivals: Vec<(usize, f64)> = cands[1..]
            .iter()
            .copied()
            .filter(|&(_, d)| d - best_d < ambiguity_gap)
            .collect();
        if rivals.is_empty() {
            proposals.push((i, best_j, best_d));
        } else {
            doubt0.insert(i);
            for &(j, d) in std::iter::once(&(best_j, best_d)).chain(&rivals) {
                doubt1.insert(j);
                doubtful_pairs.push((i, j, d));
            }
        }
    }

    // proposals that compete for the same target
    let mut by_target: Vec<Vec<(usize, f64)>> = vec![Vec::new(); areas1.len()];
    for &(i, j, d) in &proposals {
        by_target[j].push((i, d));
    }
    let mut accepted = Vec::new();
    for (j, mut sources) in by_target.into_iter().enumerate() {
        if sources.is_empty() {
            continue;
        }
        sources.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let (best_i, best_d) = sources[0];
        let rivals: Vec<(usize, f64)> = sources[1..]
            .iter()
            .copied()
            .filter(|&(_, d)| d - best_d < ambiguity_gap)
            .collect();
        if rivals.is_empty() {
            accepted.push((best_i, j, best_d));
        } else {
            doubt1.insert(j);
            for &(i, d) in std::iter::once(&(best_i, best_d)).chain(&rivals) {
                doubt0.insert(i);
                doubtful_pairs.push((i, j, d));
            }
        }
    }

    // a clean proposal onto an already ambiguous target joins the ambiguity
    for &(i, j, d) in &accepted {
        if doubt1.contains(&j) && !doubt0.contains(&i) {
            doubt0.insert(i);
            doubtful_pairs.push((i, j, d));
        }
    }

    let candidate = |i: usize, j: usize, d: f64, status| AreaMatchCandidate {
        a0: areas0[i].clone(),
        a1: areas1[j].clone(),
        kind,
        desc_distance: d,
        status,
    };

    let accepted: Vec<AreaMatchCandidate> = accepted
        .into_iter()
        .filter(|&(i, j, d)| d <= max_distance && !doubt0.contains(&i) && !doubt1.contains(&j))
        .map(|(i, j, d)| candidate(i, j, d, MatchStatus::Accepted))
        .collect();
    doubtful_pairs.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    doubtful_pairs.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);

    AreaMatches {
        accepted,
        doubtful_pairs: doubtful_pairs
            .into_iter()
            .map(|(i, j, d)| candidate(i, j, d, MatchStatus::Doubtful))
            .collect(),
        doubtful_a0: doubt0.into_iter().map(|i| areas0[i].clone()).collect(),
        doubtful_a1: doubt1.into_iter().map(|j| areas1[j].clone()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantic::BBox;

    fn areas(n: usize) -> Vec<Area> {
        (0..n)
            .map(|i| Area::new(i, BBox::new(i as f64 * 10.0, 0.0, i as f64 * 10.0 + 5.0, 5.0), AreaKind::Soa, Some(1)))
            .collect()
    }

    #[test]
    fn close_rivals_make_everything_doubtful() {
        let out = assign(&areas(1), &areas(2), &[vec![Some(0.10), Some(0.25)]], AreaKind::Soa, 0.5, 0.2);
        assert!(out.accepted.is_empty());
        assert_eq!(out.doubtful_a0.len(), 1);
        assert_eq!(out.doubtful_a1.len(), 2);
        assert_eq!(out.doubtful_pairs.len(), 2);
    }

    #[test]
    fn unique_candidate_over_threshold_is_dropped_not_doubtful() {
        let out = assign(&areas(1), &areas(1), &[vec![Some(0.6)]], AreaKind::Soa, 0.5, 0.2);
        assert!(out.accepted.is_empty());
        assert!(out.doubtful_a0.is_empty() && out.doubtful_a1.is_empty());
    }

    #[test]
    fn well_separated_rival_keeps_best() {
        let out = assign(&areas(1), &areas(2), &[vec![Some(0.05), Some(0.4)]], AreaKind::Soa, 0.5, 0.2);
        assert_eq!(out.accepted.len(), 1);
        assert_eq!(out.accepted[0].a1.id, 0);
    }

    #[test]
    fn two_sources_racing_for_one_target() {
        let d = vec![vec![Some(0.1)], vec![Some(0.15)]];
        let out = assign(&areas(2), &areas(1), &d, AreaKind::Soa, 0.5, 0.2);
        assert!(out.accepted.is_empty());
        assert_eq!(out.doubtful_a0.len(), 2);
        assert_eq!(out.doubtful_a1.len(), 1);

        let d = vec![vec![Some(0.0)], vec![Some(0.45)]];
        let out = assign(&areas(2), &areas(1), &d, AreaKind::Soa, 0.5, 0.2);
        assert_eq!(out.accepted.len(), 1);
        assert_eq!(out.accepted[0].a0.id, 0);
    }
}
