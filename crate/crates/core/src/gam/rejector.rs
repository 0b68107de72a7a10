use serde::{Deserialize, Serialize};

use super::{geometry_consistency, AreaMatchEntry, ConsistencyReport, GamError};
use crate::config::SgamConfig;

/// One pass of the rejector: the consistency of the surviving set, the
/// threshold derived from it, and the entry removed (an index into the
/// original input), if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrRound {
    pub report: ConsistencyReport,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removed: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrOutcome {
    pub kept: Vec<AreaMatchEntry>,
    pub rejected: Vec<AreaMatchEntry>,
    /// Entries with too few inside matches to be checked at all.
    pub uncertified: Vec<AreaMatchEntry>,
    pub rounds: Vec<GrRound>,
    /// Nothing survived; the caller should fall back to full-image matching.
    pub all_rejected: bool,
}

impl GrOutcome {
    /// Threshold of the final round, which every kept entry satisfies.
    pub fn final_threshold(&self) -> Option<f64> {
        self.rounds.last().map(|r| r.threshold)
    }

    /// `{areas, cross, g, threshold, verdicts}` for the final round.
    pub fn dump(&self) -> serde_json::Value {
        let verdicts: Vec<_> = self
            .kept
            .iter()
            .map(|e| (e, "kept"))
            .chain(self.rejected.iter().map(|e| (e, "rejected")))
            .chain(self.uncertified.iter().map(|e| (e, "uncertified")))
            .map(|(e, v)| {
                let b = |b: &crate::semantic::BBox| [b.min_x, b.min_y, b.max_x, b.max_y];
                serde_json::json!({
                    "kind": e.candidate.kind,
                    "bbox0": b(&e.candidate.a0.bbox),
                    "bbox1": b(&e.candidate.a1.bbox),
                    "matches": e.matches.len(),
                    "verdict": v,
                })
            })
            .collect();
        serde_json::json!({
            "rounds": self.rounds,
            "threshold": self.final_threshold(),
            "verdicts": verdicts,
        })
    }
}

/// Rejects area matches whose geometry consistency exceeds
/// `max(phi * mean self term, rejection_tolerance)`.
///
/// While any entry exceeds the threshold, entries are removed one at a time:
/// the one whose removal leaves the most consistent set goes first, and the
/// consistency of the survivors is recomputed. A single wrong
/// pairing inflates every other entry's consistency through its column, so
/// removing all offenders at once would discard correct entries too. Ties
/// keep.
pub fn gr_reject(entries: Vec<AreaMatchEntry>, config: &SgamConfig) -> Result<GrOutcome, GamError> {
    if entries.is_empty() {
        return Err(GamError::Empty);
    }
    let (mut active, uncertified): (Vec<usize>, Vec<usize>) =
        (0..entries.len()).partition(|&i| entries[i].fundamental.is_some() && !entries[i].matches.is_empty());
    let mut rounds = Vec::new();
    let mut rejected = Vec::new();

    while !active.is_empty() {
        let subset: Vec<AreaMatchEntry> = active.iter().map(|&i| entries[i].clone()).collect();
        let report = geometry_consistency(&subset)?;
        let threshold = (config.phi * report.mean_self()).max(config.rejection_tolerance);
        let n = report.areas.len();
        let total: f64 = report.cross.iter().flatten().sum();
        // set consistency of the survivors if area k were dropped
        let without = |k: usize| {
            if n == 1 {
                return 0.0;
            }
            let row: f64 = report.cross[k].iter().sum();
            let col: f64 = report.cross.iter().map(|r| r[k]).sum();
            (total - row - col + report.cross[k][k]) / ((n - 1) * (n - 1)) as f64
        };
        let offending = report.g.iter().any(|&g| g > threshold || g.is_nan());
        let worst = (0..n)
            .filter(|_| offending)
            .map(|k| (k, without(k)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(k, _)| active[report.areas[k]]);
        rounds.push(GrRound {
            report,
            threshold,
            removed: worst,
        });
        match worst {
            Some(i) => {
                active.retain(|&j| j != i);
                rejected.push(i);
            }
            None => break,
        }
    }

    let mut slots: Vec<Option<AreaMatchEntry>> = entries.into_iter().map(Some).collect();
    let mut take = |idx: &[usize]| -> Vec<AreaMatchEntry> { idx.iter().filter_map(|&i| slots[i].take()).collect() };
    let kept = take(&active);
    let rejected = take(&rejected);
    let uncertified = take(&uncertified);
    Ok(GrOutcome {
        all_rejected: kept.is_empty(),
        kept,
        rejected,
        uncertified,
        rounds,
    })
}
