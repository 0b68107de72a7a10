mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use a2pm::config::SgamConfig;
use a2pm::eval::{load_pair_list, run_benchmark, BenchmarkOptions, GroundTruthFile, LoadedPair, PairEntry};
use a2pm::matcher::{ClassicalMatcher, MatcherError, OracleMatcher, PointMatcher, SubprocessMatcher, DEFAULT_TIMEOUT};
use a2pm::pipeline::{sgam, write_matches_binary, PipelineError};
use a2pm::sam::sam_pipeline;
use a2pm::semantic::{load_semantic_map, SemanticMap};
use a2pm::synth::{generate, generate_fixture, Fixture, Scene, SceneTruth};
use clap::{Args, Parser, Subcommand, ValueEnum};
use image::RgbImage;

use output::Outputs;

const EXIT_VALIDATION: u8 = 2;
const EXIT_MATCHER: u8 = 3;

/// Area-to-point matching: semantic area matching certified by epipolar
/// geometry consistency.
///
/// Exit codes: 0 success, 2 invalid input or configuration, 3 matcher failure.
#[derive(Parser, Debug)]
#[command(name = "a2pm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Match one image pair and write the SGAM result.
    Match(MatchArgs),
    /// Run the benchmark over a JSON-lines pair list.
    Eval(EvalArgs),
    /// Render a synthetic fixture (images, semantic maps, depth, ground truth).
    Synth(SynthArgs),
    /// Detect and match semantic areas only.
    Areas(AreasArgs),
}

#[derive(Args, Debug, Clone)]
struct PairArgs {
    /// Directory with rgb0.png, rgb1.png, sem0.png, sem1.png and gt.json.
    #[arg(long)]
    pair: Option<PathBuf>,
    #[arg(long, requires_all = ["image1", "sem0", "sem1"], conflicts_with = "pair")]
    image0: Option<PathBuf>,
    #[arg(long)]
    image1: Option<PathBuf>,
    #[arg(long)]
    sem0: Option<PathBuf>,
    #[arg(long)]
    sem1: Option<PathBuf>,
    /// Ground-truth JSON (needed by the oracle matcher).
    #[arg(long)]
    gt: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    Default,
    Indoor,
}

#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    #[arg(long, value_enum, default_value = "indoor")]
    preset: Preset,
    /// Full configuration as JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long = "t-sp")]
    t_sp: Option<f64>,
    #[arg(long = "t-h")]
    t_h: Option<f64>,
    #[arg(long = "t-l")]
    t_l: Option<f64>,
    #[arg(long = "t-da")]
    t_da: Option<f64>,
    #[arg(long = "area-size")]
    area_size: Option<u32>,
    /// Matches requested per matcher call and kept after sampling.
    #[arg(long = "max-matches")]
    max_matches: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ConfigArgs {
    fn build(&self) -> anyhow::Result<SgamConfig> {
        let mut c = match &self.config {
            Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
            None => match self.preset {
                Preset::Default => SgamConfig::default(),
                Preset::Indoor => SgamConfig::indoor(),
            },
        };
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut c.phi, self.phi);
        set(&mut c.t_sp, self.t_sp);
        set(&mut c.t_h, self.t_h);
        set(&mut c.t_l, self.t_l);
        set(&mut c.t_da, self.t_da);
        if let Some(v) = self.area_size {
            c.default_area_size = v;
        }
        if let Some(v) = self.max_matches {
            c.max_correspondences = v;
        }
        c.ransac.seed = self.seed;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args, Debug, Clone)]
struct MatcherArgs {
    /// `oracle`, `classical`, or `subprocess:<command line>`.
    #[arg(long, default_value = "oracle")]
    matcher: String,
    /// Oracle noise in crop pixels.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Oracle outlier fraction.
    #[arg(long, default_value_t = 0.0)]
    outliers: f64,
    /// Subprocess reply timeout in seconds.
    #[arg(long, default_value_t = DEFAULT_TIMEOUT.as_secs_f64())]
    timeout: f64,
}

#[derive(Debug, Clone)]
enum MatcherKind {
    Oracle,
    Classical,
    Subprocess(String),
}

impl MatcherArgs {
    fn kind(&self) -> anyhow::Result<MatcherKind> {
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            anyhow::bail!("--noise must be a non-negative number");
        }
        if !(0.0..=1.0).contains(&self.outliers) {
            anyhow::bail!("--outliers must lie in [0, 1]");
        }
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            anyhow::bail!("--timeout must be positive");
        }
        match self.matcher.as_str() {
            "oracle" => Ok(MatcherKind::Oracle),
            "classical" => Ok(MatcherKind::Classical),
            s => match s.strip_prefix("subprocess:") {
                Some(cmd) if !cmd.trim().is_empty() => Ok(MatcherKind::Subprocess(cmd.to_string())),
                _ => anyhow::bail!("unknown matcher {s:?}; expected oracle, classical or subprocess:<cmd>"),
            },
        }
    }

    fn build(&self, kind: &MatcherKind, scene: Option<&Arc<SceneTruth>>, seed: u64) -> Result<Box<dyn PointMatcher>, MatcherError> {
        Ok(match kind {
            MatcherKind::Oracle => {
                let truth = scene.ok_or_else(|| MatcherError::InvalidRequest("the oracle matcher needs a scene in the ground truth".into()))?;
                Box::new(
                    OracleMatcher::new(truth.clone())
                        .with_noise(self.noise, self.outliers)
                        .with_seed(seed),
                )
            }
            MatcherKind::Classical => Box::new(ClassicalMatcher::default()),
            MatcherKind::Subprocess(cmd) => Box::new(SubprocessMatcher::spawn(cmd, Duration::from_secs_f64(self.timeout))?),
        })
    }
}

#[derive(Args, Debug)]
struct MatchArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    matcher: MatcherArgs,
    #[arg(long, short)]
    out: PathBuf,
    /// Write the rejector's consistency matrices to consistency.json.
    #[arg(long = "dump-consistency")]
    dump_consistency: bool,
    /// Also write merged matches in the binary format to matches.bin.
    #[arg(long)]
    binary: bool,
    /// Also write overlay.png with matched area boxes.
    #[arg(long)]
    overlay: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// JSON-lines pair list.
    #[arg(long)]
    pairs: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    matcher: MatcherArgs,
    #[arg(long, short)]
    out: PathBuf,
    /// Worker threads (default: logical cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Run the bare matcher on full images alongside SGAM and report deltas.
    #[arg(long = "compare-bare")]
    compare_bare: bool,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// room6, twins, sparse or planar.
    #[arg(long, required_unless_present = "scene", conflicts_with = "scene")]
    fixture: Option<String>,
    /// Scene description JSON instead of a catalogue fixture.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Render this many consecutive seeds into subdirectories and write pairs.jsonl.
    #[arg(long)]
    count: Option<u64>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AreasArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, short)]
    out: PathBuf,
}

enum Failure {
    Validation(anyhow::Error),
    Matcher(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Validation(e)
    }
}

type CmdResult = Result<(), Failure>;

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Validation(e.into())
}

struct PairData {
    images: [RgbImage; 2],
    maps: [SemanticMap; 2],
    scene: Option<Arc<SceneTruth>>,
}

fn load_pair(args: &PairArgs) -> anyhow::Result<PairData> {
    let (paths, gt) = match (&args.pair, &args.image0) {
        (Some(dir), _) => {
            let e = PairEntry::from_dir(dir);
            let gt = args.gt.clone().or_else(|| Some(dir.join("gt.json")).filter(|p| p.exists()));
            ([e.image0, e.image1, e.sem0, e.sem1], gt)
        }
        (None, Some(i0)) => (
            [
                i0.clone(),
                args.image1.clone().expect("clap requires image1"),
                args.sem0.clone().expect("clap requires sem0"),
                args.sem1.clone().expect("clap requires sem1"),
            ],
            args.gt.clone(),
        ),
        (None, None) => anyhow::bail!("either --pair or --image0/--image1/--sem0/--sem1 is required"),
    };
    let open = |p: &Path| -> anyhow::Result<RgbImage> {
        Ok(image::open(p).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?.to_rgb8())
    };
    let sem = |p: &Path| -> anyhow::Result<SemanticMap> {
        load_semantic_map(p).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))
    };
    let images = [open(&paths[0])?, open(&paths[1])?];
    let maps = [sem(&paths[2])?, sem(&paths[3])?];
    let scene = match gt {
        Some(p) => GroundTruthFile::load(&p)
            .map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?
            .scene
            .map(|s| Arc::new(SceneTruth::new(s))),
        None => None,
    };
    Ok(PairData { images, maps, scene })
}

fn cmd_match(args: &MatchArgs) -> CmdResult {
    let config = args.config.build()?;
    let kind = args.matcher.kind()?;
    let pair = load_pair(&args.pair)?;
    if matches!(kind, MatcherKind::Oracle) && pair.scene.is_none() {
        return Err(invalid(anyhow::anyhow!("the oracle matcher needs a ground truth with an embedded scene (--gt)")));
    }
    let pm = args
        .matcher
        .build(&kind, pair.scene.as_ref(), args.config.seed)
        .map_err(|e| Failure::Matcher(e.into()))?;
    let images = [&pair.images[0], &pair.images[1]];
    let result = match sgam(images, [&pair.maps[0], &pair.maps[1]], pm.as_ref(), &config) {
        Ok(r) => r,
        Err(e @ PipelineError::Matcher(_)) => return Err(Failure::Matcher(e.into())),
        Err(e) => return Err(invalid(e)),
    };
    log::info!(
        "{} area matches, {} merged matches{}",
        result.area_matches.len(),
        result.merged.len(),
        if result.degraded { " (degraded)" } else { "" }
    );

    let mut out = Outputs::new(&args.out);
    out.json("result.json", &serde_json::to_value(&result).map_err(invalid)?)?;
    if args.dump_consistency {
        let dump = result.gr.as_ref().map_or(serde_json::Value::Null, |g| g.dump());
        out.json("consistency.json", &dump)?;
    }
    if args.binary {
        let mut buf = Vec::new();
        write_matches_binary(&mut buf, &result.merged).map_err(invalid)?;
        out.bytes("matches.bin", buf);
    }
    if args.overlay {
        out.bytes("overlay.png", output::overlay(&pair.images, &result)?);
    }
    out.commit()?;
    Ok(())
}

fn cmd_areas(args: &AreasArgs) -> CmdResult {
    let config = args.config.build()?;
    let pair = load_pair(&args.pair)?;
    for (i, (img, map)) in pair.images.iter().zip(&pair.maps).enumerate() {
        if (img.width() as usize, img.height() as usize) != map.dims() {
            return Err(invalid(anyhow::anyhow!(
                "semantic map {i} is {:?} but image {i} is {}x{}",
                map.dims(),
                img.width(),
                img.height()
            )));
        }
    }
    let sam = sam_pipeline(&pair.maps[0], &pair.maps[1], &config);
    let mut out = Outputs::new(&args.out);
    out.json("areas.json", &serde_json::to_value(&sam).map_err(invalid)?)?;
    out.commit()?;
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> CmdResult {
    let config = args.config.build()?;
    let kind = args.matcher.kind()?;
    if args.workers == Some(0) {
        return Err(invalid(anyhow::anyhow!("--workers must be at least 1")));
    }
    let pairs = load_pair_list(&args.pairs).map_err(invalid)?;
    let factory = |p: &LoadedPair, seed: u64| args.matcher.build(&kind, p.scene.as_ref(), seed);
    let options = BenchmarkOptions {
        config,
        seed: args.config.seed,
        workers: args.workers,
        compare_bare: args.compare_bare,
        ..Default::default()
    };
    let report = run_benchmark(&pairs, &factory, &options).map_err(invalid)?;
    log::info!("{} pairs, {} failed", report.sgam.pairs, report.sgam.failed_pairs);
    let mut out = Outputs::new(&args.out);
    out.json("report.json", &serde_json::to_value(&report).map_err(invalid)?)?;
    out.bytes("report.csv", report.to_csv().map_err(invalid)?.into_bytes());
    out.commit()?;
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> CmdResult {
    let scene_file: Option<Scene> = match &args.scene {
        Some(p) => Some(
            serde_json::from_str(&std::fs::read_to_string(p).map_err(invalid)?)
                .map_err(|e| invalid(anyhow::anyhow!("{}: {e}", p.display())))?,
        ),
        None => None,
    };
    let fixture = match &args.fixture {
        Some(name) => Some(Fixture::from_name(name).ok_or_else(|| {
            invalid(anyhow::anyhow!("unknown fixture {name:?}; expected room6, twins, sparse or planar"))
        })?),
        None => None,
    };
    let render = |seed: u64| -> anyhow::Result<a2pm::synth::RenderedPair> {
        Ok(match (&fixture, &scene_file) {
            (Some(f), _) => generate_fixture(*f, seed)?,
            (None, Some(s)) => generate(s.clone())?,
            (None, None) => unreachable!("clap requires --fixture or --scene"),
        })
    };
    let name = fixture.map_or("scene", |f| f.name());
    let staging = output::staging_dir(&args.out)?;
    match args.count {
        None => render(args.seed)?.write(staging.path()).map_err(invalid)?,
        Some(n) => {
            let mut list = String::new();
            for seed in args.seed..args.seed + n {
                let sub = format!("{name}_{seed}");
                render(seed)?.write(&staging.path().join(&sub)).map_err(invalid)?;
                let entry = PairEntry {
                    name: Some(sub.clone()),
                    ..PairEntry::from_dir(Path::new(&sub))
                };
                list.push_str(&serde_json::to_string(&entry).map_err(invalid)?);
                list.push('\n');
            }
            std::fs::write(staging.path().join("pairs.jsonl"), list).map_err(invalid)?;
        }
    }
    output::publish(staging, &args.out)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Match(a) => cmd_match(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Areas(a) => cmd_areas(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Matcher(e)) => {
            eprintln!("matcher failure: {e:#}");
            ExitCode::from(EXIT_MATCHER)
        }
    }
}
