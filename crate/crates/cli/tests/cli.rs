use std::path::Path;
use std::process::{Command, Output};

fn a2pm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_a2pm"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("run a2pm")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, fixture: &str, seed: u64) -> std::path::PathBuf {
    let out = dir.join(format!("{fixture}_{seed}"));
    let o = a2pm(&["synth", "--fixture", fixture, "--seed", &seed.to_string(), "--out", arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn match_room6_finds_areas() {
    let dir = tempfile::tempdir().unwrap();
    let pair = synth(dir.path(), "room6", 0);
    let out = dir.path().join("result");
    let o = a2pm(&[
        "match", "--pair", arg(&pair), "--noise", "1", "--out", arg(&out), "--dump-consistency", "--binary", "--overlay",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("result.json"));
    assert!(r["area_matches"].as_array().unwrap().len() >= 3);
    assert_eq!(r["degraded"], false);
    let consistency = json(&out.join("consistency.json"));
    assert!(consistency.is_object() || consistency.is_array());
    let merged = r["merged"]["matches"].as_array().map_or(0, Vec::len);
    assert_eq!(std::fs::metadata(out.join("matches.bin")).unwrap().len() as usize, 9 + 16 * merged);
    let overlay = image::open(out.join("overlay.png")).unwrap();
    assert_eq!((overlay.width(), overlay.height()), (1280, 480));
}

#[test]
fn missing_semantic_map_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let pair = synth(dir.path(), "room6", 1);
    std::fs::remove_file(pair.join("sem1.png")).unwrap();
    let out = dir.path().join("result");
    let o = a2pm(&["match", "--pair", arg(&pair), "--out", arg(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    assert!(!out.exists());
}

#[test]
fn bad_configuration_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let pair = synth(dir.path(), "sparse", 0);
    let out = dir.path().join("result");
    let o = a2pm(&["match", "--pair", arg(&pair), "--t-sp", "1.5", "--out", arg(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unstartable_matcher_exits_with_matcher_code() {
    let dir = tempfile::tempdir().unwrap();
    let pair = synth(dir.path(), "sparse", 0);
    let out = dir.path().join("result");
    let o = a2pm(&["match", "--pair", arg(&pair), "--matcher", "subprocess:no-such-matcher-bin", "--out", arg(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn synth_writes_seven_files_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = a2pm(&["synth", "--fixture", "twins", "--seed", "7", "--out", arg(out)]);
        assert!(o.status.success());
    }
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 7);
    for n in names {
        assert_eq!(std::fs::read(a.join(&n)).unwrap(), std::fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn synth_rejects_unknown_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = a2pm(&["synth", "--fixture", "kitchen", "--out", arg(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn eval_empty_list_gives_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let list = dir.path().join("pairs.jsonl");
    std::fs::write(&list, "").unwrap();
    let out = dir.path().join("report");
    let o = a2pm(&["eval", "--pairs", arg(&list), "--out", arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&out.join("report.json"))["sgam"]["pairs"], 0);
}

#[test]
fn eval_compare_bare_reports_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let set = dir.path().join("set");
    let o = a2pm(&["synth", "--fixture", "room6", "--count", "3", "--out", arg(&set)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("report");
    let o = a2pm(&[
        "eval",
        "--pairs",
        arg(&set.join("pairs.jsonl")),
        "--noise",
        "2",
        "--compare-bare",
        "--out",
        arg(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0][..4], ["method", "pairs", "failed", "MMA@1"]);
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), ["method", "sgam", "bare", "delta"]);
    let delta_mma1: f64 = rows[3][3].parse().unwrap();
    assert!(delta_mma1 >= 0.0, "{csv}");
    assert_eq!(rows[1][1], "3");
}

#[test]
fn areas_writes_sam_output() {
    let dir = tempfile::tempdir().unwrap();
    let pair = synth(dir.path(), "twins", 2);
    let out = dir.path().join("areas");
    let o = a2pm(&["areas", "--pair", arg(&pair), "--out", arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sam = json(&out.join("areas.json"));
    assert!(!sam["accepted"].as_array().unwrap().is_empty());
    assert!(!sam["doubtful_a0"].as_array().unwrap().is_empty());
}
