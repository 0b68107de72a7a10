use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    aor, estimate_pose_error, reprojection_errors, EvalError, GroundTruth, MetricReport, PairEntry, PairOutcome,
    AMP_THRESHOLD, AUC_THRESHOLDS, DEFAULT_AOR_SAMPLES, MMA_THRESHOLDS,
};
use crate::config::SgamConfig;
use crate::geometry::MatchSet;
use crate::matcher::{mix, MatcherError, PointMatcher};
use crate::pipeline::{match_full_images, sgam, uniform_sample};
use crate::semantic::{load_semantic_map, SemanticMap};
use crate::synth::SceneTruth;

/// A pair with its images, maps and ground truth in memory.
pub struct LoadedPair {
    pub name: String,
    pub images: [RgbImage; 2],
    pub maps: [SemanticMap; 2],
    pub gt: GroundTruth,
    /// Present when the ground truth embeds a synthetic scene.
    pub scene: Option<Arc<SceneTruth>>,
}

impl LoadedPair {
    pub fn load(entry: &PairEntry) -> Result<Self, EvalError> {
        let open = |p: &Path| {
            image::open(p)
                .map(|i| i.to_rgb8())
                .map_err(|e| EvalError::Format(format!("{}: {e}", p.display())))
        };
        let sem = |p: &Path| load_semantic_map(p).map_err(|e| EvalError::Format(format!("{}: {e}", p.display())));
        let images = [open(&entry.image0)?, open(&entry.image1)?];
        let maps = [sem(&entry.sem0)?, sem(&entry.sem1)?];
        let (file, base) = entry.truth_file()?;
        let scene = file.scene.clone().map(|s| Arc::new(SceneTruth::new(s)));
        let gt = match &scene {
            Some(t) => t.ground_truth(),
            None => file.resolve(&base, Some((images[1].width() as usize, images[1].height() as usize)))?,
        };
        Ok(Self {
            name: entry.display_name(),
            images,
            maps,
            gt,
            scene,
        })
    }
}

/// Builds the point matcher for one pair from its data and a per-pair seed.
pub type MatcherFactory<'a> = dyn Fn(&LoadedPair, u64) -> Result<Box<dyn PointMatcher>, MatcherError> + Sync + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOptions {
    pub config: SgamConfig,
    pub seed: u64,
    /// Worker threads; `None` uses every logical core.
    pub workers: Option<usize>,
    pub compare_bare: bool,
    pub aor_samples: usize,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self {
            config: SgamConfig::default(),
            seed: 0,
            workers: None,
            compare_bare: false,
            aor_samples: DEFAULT_AOR_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub name: String,
    pub sgam: PairOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bare: Option<PairOutcome>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub sgam: MetricReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bare: Option<MetricReport>,
    /// SGAM minus bare per table column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<BTreeMap<String, f64>>,
    /// Relative improvement over bare in percent, where bare is nonzero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub improvement_pct: Option<BTreeMap<String, f64>>,
    pub pairs: Vec<PairRecord>,
}

/// Table columns: MMA@1/2/3, AUC@5/10/20, AMP@0.7.
pub fn table_row(r: &MetricReport) -> BTreeMap<String, f64> {
    let mut row = BTreeMap::new();
    for t in MMA_THRESHOLDS {
        row.insert(format!("MMA@{t}"), r.mma_at(t).unwrap_or(0.0));
    }
    for t in AUC_THRESHOLDS {
        row.insert(format!("AUC@{t}"), r.auc_at(t).unwrap_or(0.0));
    }
    row.insert(format!("AMP@{AMP_THRESHOLD}"), r.amp.get(&format!("{AMP_THRESHOLD}")).copied().unwrap_or(0.0));
    row
}

fn columns() -> Vec<String> {
    let mut c: Vec<String> = MMA_THRESHOLDS.iter().map(|t| format!("MMA@{t}")).collect();
    c.extend(AUC_THRESHOLDS.iter().map(|t| format!("AUC@{t}")));
    c.push(format!("AMP@{AMP_THRESHOLD}"));
    c
}

impl BenchmarkReport {
    /// CSV with one row per method (and a delta row when compared).
    pub fn to_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let cols = columns();
        let mut header = vec!["method".to_string(), "pairs".into(), "failed".into()];
        header.extend(cols.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        let mut emit = |name: &str, pairs: usize, failed: usize, row: &BTreeMap<String, f64>| {
            let mut rec = vec![name.to_string(), pairs.to_string(), failed.to_string()];
            rec.extend(cols.iter().map(|c| format!("{:.6}", row.get(c).copied().unwrap_or(0.0))));
            w.write_record(&rec).map_err(csv_err)
        };
        emit("sgam", self.sgam.pairs, self.sgam.failed_pairs, &table_row(&self.sgam))?;
        if let Some(b) = &self.bare {
            emit("bare", b.pairs, b.failed_pairs, &table_row(b))?;
        }
        if let Some(d) = &self.delta {
            emit("delta", self.sgam.pairs, 0, d)?;
        }
        let bytes = w.into_inner().map_err(|e| EvalError::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| EvalError::Format(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> EvalError {
    EvalError::Format(e.to_string())
}

fn measure(
    name: &str,
    matches: &MatchSet,
    dims: (usize, usize),
    gt: &GroundTruth,
    cap: usize,
    seed: u64,
) -> PairOutcome {
    let sampled = uniform_sample(matches, dims, cap, seed);
    let (reprojection_errors, invalid_projections) = reprojection_errors(&sampled, gt);
    let pose_error = match estimate_pose_error(&sampled, gt, seed) {
        Ok(e) => Some(e),
        Err(e) => {
            log::warn!("{name}: pose estimation failed: {e}");
            None
        }
    };
    PairOutcome {
        name: name.to_string(),
        error: None,
        matches: sampled.len(),
        reprojection_errors,
        invalid_projections,
        aor: Vec::new(),
        pose_error,
    }
}

fn failed(name: &str, e: impl std::fmt::Display) -> PairOutcome {
    log::warn!("{name}: {e}");
    PairOutcome {
        name: name.to_string(),
        error: Some(e.to_string()),
        ..Default::default()
    }
}

fn run_pair(entry: &PairEntry, index: usize, factory: &MatcherFactory, options: &BenchmarkOptions) -> PairRecord {
    let name = entry.display_name();
    let seed = mix(options.seed ^ mix(index as u64));
    let bare_failed = |e: &dyn std::fmt::Display| options.compare_bare.then(|| failed(&name, e));
    let pair = match LoadedPair::load(entry) {
        Ok(p) => p,
        Err(e) => {
            return PairRecord {
                sgam: failed(&name, &e),
                bare: bare_failed(&e),
                name,
            }
        }
    };
    let pm = match factory(&pair, seed) {
        Ok(pm) => pm,
        Err(e) => {
            return PairRecord {
                sgam: failed(&name, &e),
                bare: bare_failed(&e),
                name,
            }
        }
    };
    let cfg = &options.config;
    let dims = (pair.images[1].width() as usize, pair.images[1].height() as usize);
    let images = [&pair.images[0], &pair.images[1]];
    let sgam_outcome = match sgam(images, [&pair.maps[0], &pair.maps[1]], pm.as_ref(), cfg) {
        Ok(r) => {
            let mut o = measure(&name, &r.merged, dims, &pair.gt, cfg.max_correspondences, seed);
            o.aor = r
                .area_matches
                .iter()
                .filter_map(|e| aor(&e.candidate, &pair.gt, options.aor_samples, seed).ok())
                .collect();
            o
        }
        Err(e) => failed(&name, e),
    };
    let bare = options.compare_bare.then(|| match match_full_images(images, pm.as_ref(), cfg) {
        Ok(m) => measure(&name, &m, dims, &pair.gt, cfg.max_correspondences, seed),
        Err(e) => failed(&name, e),
    });
    log::info!("{name}: {} matches", sgam_outcome.matches);
    PairRecord {
        name,
        sgam: sgam_outcome,
        bare,
    }
}

/// Runs SGAM (and optionally the bare matcher) over every pair and
/// aggregates the metrics. Per-pair failures are recorded, never fatal.
pub fn run_benchmark(
    pairs: &[PairEntry],
    factory: &MatcherFactory,
    options: &BenchmarkOptions,
) -> Result<BenchmarkReport, EvalError> {
    options
        .config
        .validate()
        .map_err(|e| EvalError::Format(e.to_string()))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = options.workers {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| EvalError::Format(e.to_string()))?;
    let records: Vec<PairRecord> = pool.install(|| {
        pairs
            .par_iter()
            .enumerate()
            .map(|(i, e)| run_pair(e, i, factory, options))
            .collect()
    });

    let sgam: Vec<PairOutcome> = records.iter().map(|r| r.sgam.clone()).collect();
    let mut report = BenchmarkReport {
        sgam: MetricReport::aggregate(&sgam),
        ..Default::default()
    };
    if options.compare_bare {
        let bare: Vec<PairOutcome> = records.iter().filter_map(|r| r.bare.clone()).collect();
        let bare = MetricReport::aggregate(&bare);
        let (s, b) = (table_row(&report.sgam), table_row(&bare));
        report.delta = Some(s.iter().map(|(k, v)| (k.clone(), v - b[k])).collect());
        report.improvement_pct = Some(
            s.iter()
                .filter(|(k, _)| b[*k] > 0.0)
                .map(|(k, v)| (k.clone(), 100.0 * (v - b[k]) / b[k]))
                .collect(),
        );
        report.bare = Some(bare);
    }
    report.pairs = records;
    Ok(report)
}
