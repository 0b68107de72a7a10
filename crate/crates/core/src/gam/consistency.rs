use serde::{Deserialize, Serialize};

use super::{AreaMatchEntry, GamError};
use crate::geometry::sampson_set;

/// Self and cross Sampson terms of a set of area matches.
///
/// `cross[i][j]` is the mean Sampson distance of area `j`'s matches under
/// area `i`'s fundamental matrix; `g[i]` is the row mean including the
/// diagonal. Indices refer to `areas`, which lists the entries of the input
/// that could be certified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub areas: Vec<usize>,
    /// Entries left out for lack of a fundamental matrix.
    pub excluded: Vec<usize>,
    pub cross: Vec<Vec<f64>>,
    pub g: Vec<f64>,
    /// Mean of `g` over the set.
    pub set_g: f64,
}

impl ConsistencyReport {
    pub fn self_term(&self, k: usize) -> f64 {
        self.cross[k][k]
    }

    pub fn mean_self(&self) -> f64 {
        (0..self.areas.len()).map(|k| self.self_term(k)).sum::<f64>() / self.areas.len() as f64
    }
}

/// Geometry consistency of every certifiable entry against all others.
/// Sampson evaluations that fail (degenerate denominators) count as
/// infinitely inconsistent.
pub fn geometry_consistency(entries: &[AreaMatchEntry]) -> Result<ConsistencyReport, GamError> {
    let (areas, excluded): (Vec<usize>, Vec<usize>) =
        (0..entries.len()).partition(|&i| entries[i].fundamental.is_some() && !entries[i].matches.is_empty());
    if areas.is_empty() {
        return Err(GamError::TooFewAreas);
    }
    let cross: Vec<Vec<f64>> = areas
        .iter()
        .map(|&i| {
            let f = entries[i].fundamental.as_ref().expect("partitioned on model presence");
            areas
                .iter()
                .map(|&j| sampson_set(f, &entries[j].matches).map_or(f64::INFINITY, |s| s.mean))
                .collect()
        })
        .collect();
    let n = areas.len() as f64;
    let g: Vec<f64> = cross.iter().map(|row| row.iter().sum::<f64>() / n).collect();
    let set_g = g.iter().sum::<f64>() / n;
    Ok(ConsistencyReport {
        areas,
        excluded,
        cross,
        g,
        set_g,
    })
}
