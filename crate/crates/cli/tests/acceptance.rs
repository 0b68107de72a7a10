//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use a2pm::config::SgamConfig;
use a2pm::eval::{amp, aor, convex_hull_area, estimate_pose_error, mma, pose_auc, GroundTruth, HomographyProjector};
use a2pm::gam::{gr_reject, AreaMatchEntry};
use a2pm::geometry::{
    estimate_fundamental, pose_error, recover_pose, sampson_set, sampson_single, CameraIntrinsics, Correspondence,
    FundamentalMatrix, MatchSet, Point2, PoseEstimate,
};
use a2pm::matcher::{MatcherError, MatcherRequest, MatcherResponse, OracleMatcher, PointMatcher};
use a2pm::pipeline::{match_area_pair, match_full_images, sgam, uniform_sample};
use a2pm::sam::{detect_soa, sam_pipeline, AreaKind, AreaMatchCandidate, MatchStatus};
use a2pm::synth::{generate, generate_fixture, Fixture, HEIGHT, WIDTH};
use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

/// Sampson distance evaluated entry by entry, without nalgebra.
fn sampson_reference(f: &[[f64; 3]; 3], c: &Correspondence) -> f64 {
    let q = [c.q.x, c.q.y, 1.0];
    let p = [c.p.x, c.p.y, 1.0];
    let fq: Vec<f64> = (0..3).map(|i| (0..3).map(|j| f[i][j] * q[j]).sum()).collect();
    let ftp: Vec<f64> = (0..3).map(|j| (0..3).map(|i| f[i][j] * p[i]).sum()).collect();
    let r: f64 = (0..3).map(|i| p[i] * fq[i]).sum();
    r * r / (fq[0] * fq[0] + fq[1] * fq[1] + ftp[0] * ftp[0] + ftp[1] * ftp[1])
}

fn sampson_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let f = FundamentalMatrix::new(Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0))).unwrap();
        let rows = f.to_rows();
        let set: Vec<Correspondence> = (0..3)
            .map(|_| {
                Correspondence::new(
                    Point2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)),
                    Point2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)),
                )
            })
            .collect();
        let mut sum = 0.0;
        for c in &set {
            let want = sampson_reference(&rows, c);
            let got = sampson_single(&f, c).unwrap();
            worst = worst.max((got - want).abs() / want.abs().max(f64::MIN_POSITIVE));
            sum += want;
        }
        let stats = sampson_set(&f, &MatchSet::new(set)).unwrap();
        worst = worst.max((stats.mean - sum / 3.0).abs() / (sum / 3.0));
    }
    let t = start.elapsed();
    verdict(worst <= 1e-12 && t < Duration::from_secs(1), format!("max rel err {worst:.1e}, {t:.2?}"))
}

fn synthetic_pair(seed: u64, n: usize, sigma: f64) -> (CameraIntrinsics, PoseEstimate, MatchSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap();
    let r = Rotation3::from_euler_angles(
        rng.random_range(-0.15..0.15),
        rng.random_range(-0.15..0.15),
        rng.random_range(-0.15..0.15),
    )
    .into_inner();
    let t = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
    let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).unwrap();
    let mut out = Vec::new();
    while out.len() < n {
        let x0 = Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-2.0..2.0), rng.random_range(4.0..10.0));
        let x1 = r * x0 + t;
        let (Some(q), Some(p)) = (k.project(&x0), k.project(&x1)) else {
            continue;
        };
        if !(0.0..640.0).contains(&p.x) || !(0.0..480.0).contains(&p.y) {
            continue;
        }
        let p = if sigma > 0.0 {
            Point2::new(p.x + noise.sample(&mut rng), p.y + noise.sample(&mut rng))
        } else {
            p
        };
        out.push(Correspondence::new(q, p));
    }
    (k, PoseEstimate::new(r, t, 0).unwrap(), MatchSet::new(out))
}

fn invert(seed: u64, sigma: f64) -> (f64, f64) {
    let (k, truth, m) = synthetic_pair(seed, 200, sigma);
    estimate_fundamental(&m)
        .and_then(|f| recover_pose(&f, &k, &k, &m))
        .map_or((f64::INFINITY, f64::INFINITY), |est| pose_error(&est, &truth))
}

fn geometry_inversion() -> Verdict {
    let start = Instant::now();
    let worst = (0..100).map(|s| invert(s, 0.0)).fold(0.0f64, |w, (r, t)| w.max(r).max(t));
    let mut rot: Vec<f64> = (0..100).map(|s| invert(1000 + s, 1.0).0).collect();
    rot.sort_by(f64::total_cmp);
    let median = (rot[49] + rot[50]) / 2.0;
    let t = start.elapsed();
    verdict(
        worst < 0.01 && median < 2.0 && t < Duration::from_secs(30),
        format!("noiseless max {worst:.2e} deg, sigma=1 median rotation {median:.3} deg, {t:.2?}"),
    )
}

fn gr_efficacy() -> Verdict {
    let mut cfg = SgamConfig::indoor();
    cfg.phi = 1.0;
    let mut ok = 0;
    for seed in 0..100 {
        let p = generate_fixture(Fixture::Room6, seed).unwrap();
        let sam = sam_pipeline(&p.sem[0], &p.sem[1], &cfg);
        let mut set: Vec<_> = sam
            .accepted
            .iter()
            .filter(|c| c.kind == AreaKind::Soa && c.a0.anchor_label.is_some_and(|l| (10..=13).contains(&l)))
            .take(4)
            .cloned()
            .collect();
        // the two label-14 cubes, paired the wrong way round
        let cubes = |m| {
            let mut v: Vec<_> = detect_soa(m, &cfg).into_iter().filter(|a| a.anchor_label == Some(14)).collect();
            v.sort_by(|a, b| a.center.x.total_cmp(&b.center.x));
            v
        };
        let (l0, l1) = (cubes(&p.sem[0]), cubes(&p.sem[1]));
        if set.len() != 4 || l0.len() != 2 || l1.len() != 2 {
            continue;
        }
        let mut bad = set[0].clone();
        bad.a0 = l0[0].clone();
        bad.a1 = l1[1].clone();
        set.push(bad.clone());
        let pm = OracleMatcher::new(p.truth.clone()).with_noise(1.0, 0.0).with_seed(seed);
        let entries: Vec<_> = set
            .iter()
            .map(|c| {
                let m = match_area_pair(&c.a0, &c.a1, [&p.rgb[0], &p.rgb[1]], &pm, &cfg).unwrap_or_default();
                AreaMatchEntry::new(c.clone(), m, &cfg)
            })
            .collect();
        let Ok(out) = gr_reject(entries, &cfg) else {
            continue;
        };
        ok += usize::from(out.rejected.len() == 1 && out.rejected[0].candidate == bad && out.uncertified.is_empty());
    }
    verdict(ok >= 98, format!("{ok}/100 seeds reject exactly the corrupted match"))
}

fn gp_efficacy() -> Verdict {
    let cfg = SgamConfig::indoor();
    let (mut ok, mut both, mut ordered) = (0, 0, 0);
    for seed in 0..100 {
        let p = generate_fixture(Fixture::Twins, seed).unwrap();
        let gt = p.ground_truth();
        let pm = OracleMatcher::new(p.truth.clone()).with_noise(1.0, 0.0).with_seed(seed);
        let r = sgam([&p.rgb[0], &p.rgb[1]], [&p.sem[0], &p.sem[1]], &pm, &cfg).unwrap();
        let Some(g) = r.gp.iter().find(|g| g.label == Some(20)) else {
            continue;
        };
        let Some(o) = &g.outcome else {
            continue;
        };
        let overlaps = |c: &AreaMatchCandidate| aor(c, &gt, 500, 0).unwrap_or(0.0) > 0.5;
        ok += usize::from(!o.selected.is_empty() && o.selected.iter().all(|e| overlaps(&e.candidate)));
        let truth = o.assignments.iter().position(|a| {
            a.pairs.iter().all(|&(i, j)| {
                overlaps(&AreaMatchCandidate {
                    a0: g.doubtful0[i].clone(),
                    a1: g.doubtful1[j].clone(),
                    kind: AreaKind::Soa,
                    desc_distance: 0.0,
                    status: MatchStatus::Accepted,
                })
            })
        });
        let Some(t) = truth else {
            continue;
        };
        if o.assignments.iter().filter(|a| a.g.is_some()).count() >= 2 && o.assignments[t].g.is_some() {
            both += 1;
            let pt = o.assignments[t].log_probability();
            ordered += usize::from(
                o.assignments.iter().enumerate().all(|(k, a)| k == t || a.g.is_none() || pt > a.log_probability()),
            );
        }
    }
    verdict(
        ok >= 95 && ordered == both,
        format!("{ok}/100 true assignments selected; P(true) > P(swapped) in {ordered}/{both} with both valid"),
    )
}

/// Serves full-image requests from a contaminated oracle and area crops
/// from a clean one.
struct ContaminatedFull {
    areas: OracleMatcher,
    full: OracleMatcher,
}

impl PointMatcher for ContaminatedFull {
    fn match_pair(&self, r: &MatcherRequest) -> Result<MatcherResponse, MatcherError> {
        if r.transform0.offset.x == 0.0 && r.region0().width() >= WIDTH as f64 {
            self.full.match_pair(r)
        } else {
            self.areas.match_pair(r)
        }
    }

    fn name(&self) -> String {
        "contaminated-full".into()
    }
}

fn gmc_efficacy() -> Verdict {
    let cfg = SgamConfig::indoor();
    let (mut worst, mut covered, mut seeds) = (0.0f64, 0, 0);
    for seed in 0..20 {
        let p = generate_fixture(Fixture::Sparse, seed).unwrap();
        let gt = p.ground_truth();
        let pm = ContaminatedFull {
            areas: OracleMatcher::new(p.truth.clone()).with_noise(0.0, 0.0).with_seed(seed),
            full: OracleMatcher::new(p.truth.clone()).with_noise(0.0, 0.3).with_seed(seed),
        };
        let r = sgam([&p.rgb[0], &p.rgb[1]], [&p.sem[0], &p.sem[1]], &pm, &cfg).unwrap();
        seeds += 1;
        let errors: Vec<f64> = r.gmc.kept.iter().filter_map(|c| gt.project(&c.q).map(|x| x.distance(&c.p))).collect();
        let outliers = errors.iter().filter(|&&e| e > 2.0).count() + (r.gmc.kept.len() - errors.len());
        worst = worst.max(outliers as f64 / r.gmc.kept.len().max(1) as f64);
        let hull = |s: &MatchSet| convex_hull_area(&s.iter().map(|c| c.q).collect::<Vec<_>>());
        let inside = MatchSet::new(r.inside_matches().flat_map(|m| m.iter().copied()));
        covered += usize::from(hull(&r.merged) > hull(&inside));
    }
    verdict(
        worst <= 0.01 && covered == seeds,
        format!("worst kept outlier rate {:.2}%, hull grows in {covered}/{seeds} seeds", worst * 100.0),
    )
}

fn end_to_end() -> Verdict {
    let start = Instant::now();
    let cfg = SgamConfig::indoor();
    let fixtures = [Fixture::Room6, Fixture::Twins, Fixture::Sparse];
    let (mut wins, mut es, mut eb) = (0, Vec::new(), Vec::new());
    for k in 0..50u64 {
        let seed = k / 3;
        let p = generate_fixture(fixtures[k as usize % 3], seed).unwrap();
        let gt = p.ground_truth();
        let pm = OracleMatcher::new(p.truth.clone()).with_noise(2.0, 0.0).with_seed(seed);
        let r = sgam([&p.rgb[0], &p.rgb[1]], [&p.sem[0], &p.sem[1]], &pm, &cfg).unwrap();
        let bare = match_full_images([&p.rgb[0], &p.rgb[1]], &pm, &cfg).unwrap_or_default();
        let s = uniform_sample(&r.merged, (WIDTH, HEIGHT), cfg.max_correspondences, seed);
        let b = uniform_sample(&bare, (WIDTH, HEIGHT), cfg.max_correspondences, seed);
        let mma1 = |m: &MatchSet| mma(m, &gt, &[1.0]).map_or(0.0, |m| m.fractions[0]);
        wins += usize::from(mma1(&s) >= mma1(&b));
        let pe = |m: &MatchSet| estimate_pose_error(m, &gt, seed).unwrap_or((f64::INFINITY, f64::INFINITY));
        es.push(pe(&s));
        eb.push(pe(&b));
    }
    let (auc_s, auc_b) = (pose_auc(&es, &[5.0])[0], pose_auc(&eb, &[5.0])[0]);
    let t = start.elapsed();
    verdict(
        wins == 50 && auc_s >= auc_b && t < Duration::from_secs(300),
        format!("MMA@1 sgam >= bare on {wins}/50 pairs, AUC@5 {auc_s:.4} vs {auc_b:.4}, {t:.1?}"),
    )
}

fn riemann_auc(errors: &[(f64, f64)], theta: f64) -> f64 {
    let e: Vec<f64> = errors.iter().map(|(r, t)| r.max(*t)).collect();
    let n = (theta / 0.01).round() as usize;
    (0..n)
        .map(|i| e.iter().filter(|&&v| v <= (i as f64 + 0.5) * 0.01).count() as f64 / e.len() as f64)
        .sum::<f64>()
        / n as f64
}

fn metric_consistency() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut problems = Vec::new();
    let identity = GroundTruth {
        pose: None,
        k0: None,
        k1: None,
        projector: std::sync::Arc::new(HomographyProjector {
            h: Matrix3::identity(),
            bounds: None,
        }),
    };
    for _ in 0..200 {
        let aors: Vec<f64> = (0..rng.random_range(1..30)).map(|_| rng.random()).collect();
        let a: Vec<f64> = [0.0, 0.25, 0.5, 0.7, 0.9, 1.0].iter().map(|&t| amp(&aors, t).unwrap()).collect();
        if a.windows(2).any(|w| w[0] < w[1]) {
            problems.push("AMP increased");
        }
        let m: MatchSet = (0..rng.random_range(1..50))
            .map(|i| {
                let q = Point2::new(i as f64, rng.random_range(0.0..480.0));
                Correspondence::new(q, Point2::new(q.x + rng.random_range(-6.0..6.0), q.y))
            })
            .collect();
        let f = mma(&m, &identity, &[1.0, 2.0, 3.0, 5.0, 10.0]).unwrap().fractions;
        if f.windows(2).any(|w| w[0] > w[1]) {
            problems.push("MMA decreased");
        }
        let errors: Vec<(f64, f64)> = (0..rng.random_range(1..40))
            .map(|_| (rng.random_range(0.0..30.0), rng.random_range(0.0..30.0)))
            .collect();
        for (got, theta) in pose_auc(&errors, &[5.0, 10.0, 20.0]).into_iter().zip([5.0, 10.0, 20.0]) {
            if (got - riemann_auc(&errors, theta)).abs() > 1e-3 {
                problems.push("AUC differs from Riemann sum");
            }
        }
    }
    let mut scene = Fixture::Room6.scene(0);
    scene.cameras[1] = scene.cameras[0];
    let pair = generate(scene).unwrap();
    let gt = pair.ground_truth();
    let sam = sam_pipeline(&pair.sem[0], &pair.sem[1], &SgamConfig::indoor());
    let identity_aor: Vec<f64> = sam.accepted.iter().map(|c| aor(c, &gt, 1000, 0).unwrap()).collect();
    if identity_aor.is_empty() || identity_aor.iter().any(|&v| v != 1.0) {
        problems.push("AOR below 1 on an identity pair");
    }
    problems.dedup();
    let detail = if problems.is_empty() {
        format!("monotone AMP/MMA, AUC within 1e-3 of Riemann, {} identity AORs = 1", identity_aor.len())
    } else {
        problems.join("; ")
    };
    verdict(problems.is_empty(), detail)
}

fn tree_hash(root: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let name = path.strip_prefix(root).unwrap().display().to_string();
                let digest = Sha256::digest(std::fs::read(&path).unwrap());
                out.insert(name, digest.iter().map(|b| format!("{b:02x}")).collect());
            }
        }
    }
    out
}

fn determinism() -> Verdict {
    let work = tempfile::tempdir().unwrap();
    let w = work.path();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let run = |args: Vec<String>| {
        let o = Command::new(env!("CARGO_BIN_EXE_a2pm")).args(&args).env("RUST_LOG", "error").output().unwrap();
        o.status.success()
    };
    // inputs for the commands that read a pair
    if !run(vec!["synth".into(), "--fixture".into(), "twins".into(), "--seed".into(), "3".into(), "--out".into(), s(&w.join("pair"))])
        || !run(vec!["synth".into(), "--fixture".into(), "room6".into(), "--count".into(), "4".into(), "--out".into(), s(&w.join("set"))])
    {
        return verdict(false, "could not synthesize inputs");
    }
    let pair = s(&w.join("pair"));
    let list = s(&w.join("set").join("pairs.jsonl"));
    let commands: Vec<(&str, Vec<String>)> = vec![
        ("synth", vec!["synth", "--fixture", "sparse", "--seed", "11"].into_iter().map(String::from).collect()),
        ("synth --count", ["synth", "--fixture", "planar", "--count", "2"].map(String::from).to_vec()),
        (
            "match",
            ["match", "--pair", &pair, "--noise", "1", "--outliers", "0.1", "--seed", "5", "--dump-consistency", "--binary", "--overlay"]
                .map(String::from)
                .to_vec(),
        ),
        ("match classical", ["match", "--pair", &pair, "--matcher", "classical"].map(String::from).to_vec()),
        ("areas", ["areas", "--pair", &pair].map(String::from).to_vec()),
        (
            "eval",
            ["eval", "--pairs", &list, "--noise", "2", "--compare-bare", "--workers", "3"].map(String::from).to_vec(),
        ),
    ];
    let mut differing = Vec::new();
    for (i, (name, args)) in commands.iter().enumerate() {
        let hashes: Vec<_> = (0..2)
            .map(|k| {
                let out = w.join(format!("out{i}_{k}"));
                let mut a = args.clone();
                a.extend(["--out".to_string(), s(&out)]);
                run(a).then(|| tree_hash(&out))
            })
            .collect();
        if hashes[0].is_none() || hashes[0] != hashes[1] || hashes[0].as_ref().is_some_and(BTreeMap::is_empty) {
            differing.push(*name);
        }
    }
    let detail = if differing.is_empty() {
        format!("{} commands hash-identical across two runs", commands.len())
    } else {
        format!("differs or failed: {}", differing.join(", "))
    };
    verdict(differing.is_empty(), detail)
}

fn main() {
    env_logger::Builder::new().filter_level(log::LevelFilter::Error).init();
    let criteria: [Criterion; 8] = [
        ("Sampson oracle equivalence", sampson_oracle),
        ("Geometry inversion", geometry_inversion),
        ("GR efficacy", gr_efficacy),
        ("GP efficacy", gp_efficacy),
        ("GMC efficacy", gmc_efficacy),
        ("End-to-end directional claim", end_to_end),
        ("Metric self-consistency", metric_consistency),
        ("Determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let v = check();
        failed += usize::from(!v.pass);
        println!("{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
