//! `scanpose`: simulate scenes, run the minimal solvers and RANSAC, run
//! benchmarks and enumerate minimal problems.

mod render;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scanline_pose::enumeration::{enumerate_and_check, format_report};
use scanline_pose::io::{load_observations, GroundTruthFile, Intrinsics, LoadedObservations, ObservationFile};
use scanline_pose::robust::{chirality_filter, ransac, RansacConfig};
use scanline_pose::solvers::{solve, solve_d37_with, D37Options, SolverId};
use scanline_pose::synthetic::{
    add_noise, run_benchmark, sample_scene, write_benchmark_csv, BenchmarkConfig, NoiseConfig, SceneConfig,
};
use scanline_pose::{mix_seed, Error, Setting};

#[derive(Parser, Debug)]
#[command(name = "scanpose", version, about = "Relative pose of scanline cameras from parallel lines")]
struct Cli {
    /// Worker threads for benchmarks, RANSAC and the multi-start solver.
    #[arg(long, global = true, env = "SCANPOSE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a random scene as an observation file plus a ground-truth file.
    Simulate(SimulateArgs),
    /// Run one minimal solver on an observation file with a minimal sample.
    Solve(SolveArgs),
    /// Run RANSAC over all lines of an observation file.
    Ransac(RansacArgs),
    /// Solver accuracy over noise levels, as CSV.
    Benchmark(BenchmarkArgs),
    /// Balanced problems and their minimality verdicts.
    Enumerate(EnumerateArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    setting: Setting,
    /// Number of cameras.
    #[arg(long)]
    m: usize,
    /// Number of lines.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Image noise in pixels.
    #[arg(long, default_value_t = 0.0)]
    sigma_p: f64,
    /// Gravity noise in radians.
    #[arg(long, default_value_t = 0.0)]
    sigma_v: f64,
    /// Focal length in pixels (principal point at (f, f), image height 2f).
    #[arg(long, default_value_t = 1000.0)]
    focal: f64,
    /// Rotations close to identity so lines lie in front of the cameras.
    #[arg(long)]
    forward_facing: bool,
    /// Observation file; printed to stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Ground-truth file; defaults to `<out>.gt.json` when `--out` is set.
    #[arg(long)]
    gt: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    solver: SolverId,
    /// Observation file.
    input: PathBuf,
    /// Ground-truth file written by `simulate`, used to report errors.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Drop candidates with lines behind a camera.
    #[arg(long)]
    chirality: bool,
    /// Seed of the multi-start solver.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct RansacArgs {
    #[arg(long)]
    solver: SolverId,
    input: PathBuf,
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    /// Inlier threshold in pixels.
    #[arg(long, default_value_t = 1.0)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    gt: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    /// Comma-separated solver names.
    #[arg(long, value_delimiter = ',', default_value = "b37,e35,e44,d37")]
    solvers: Vec<SolverId>,
    /// Comma-separated image noise levels in pixels.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    sigma_p: Vec<f64>,
    /// Comma-separated gravity noise levels in radians.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    sigma_v: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000.0)]
    focal: f64,
    /// CSV file; printed to stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EnumerateArgs {
    /// Settings to enumerate (repeatable); all when absent.
    #[arg(long)]
    setting: Vec<Setting>,
    #[arg(long, default_value_t = 30)]
    m_max: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON instead of the text table.
    #[arg(long)]
    json: bool,
}

/// Failure with its exit code: 1 for bad input, 2 when solving failed.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    fn solver(e: Error) -> Self {
        Self { code: 2, message: format!("solver failed: {e}") }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        // fails only if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Ransac(a) => ransac_cmd(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Enumerate(a) => enumerate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::usage(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                out.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn simulate(a: SimulateArgs) -> Outcome {
    if !(a.focal > 0.0) {
        return Err(Failure::usage("--focal must be positive"));
    }
    let config = SceneConfig { forward_facing: a.forward_facing, ..SceneConfig::new(a.setting, a.m, a.n, a.seed) };
    let scene = sample_scene(&config)?;
    let noisy = add_noise(&scene, &NoiseConfig { sigma_p: a.sigma_p, focal: a.focal, sigma_v: a.sigma_v }, mix_seed(a.seed, 1));
    let file = ObservationFile::from_instance(&noisy, &Intrinsics::synthetic(a.focal));
    write_or_print(a.out.as_deref(), &file.to_json()?)?;
    let gt_path = a.gt.or_else(|| a.out.as_ref().map(|p| p.with_extension("gt.json")));
    if let Some(p) = gt_path {
        write_or_print(Some(&p), &GroundTruthFile::from_instance(&scene, a.seed).to_json()?)?;
    }
    Ok(())
}

fn load(path: &Path) -> Result<LoadedObservations, Failure> {
    load_observations(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn check_gravity(solver: SolverId, loaded: &LoadedObservations) -> Outcome {
    if !solver.needs_gravity() {
        return Ok(());
    }
    if let Some(o) = loaded.observations.iter().find(|o| o.gravity.is_none()) {
        return Err(Failure::usage(format!(
            "solver {solver} needs gravity, but cameras[{}] has no `gravity` field",
            o.camera_index
        )));
    }
    Ok(())
}

/// Ground truth from a sidecar file, else the pseudo ground truth of the
/// observation file.
fn ground_truth(path: Option<&Path>, loaded: &LoadedObservations) -> Result<Option<render::Truth>, Failure> {
    if let Some(p) = path {
        let gt = GroundTruthFile::load(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
        return Ok(Some(render::Truth { poses: gt.poses(), line_direction: Some(gt.line_direction()) }));
    }
    Ok(loaded.ground_truth().map(|poses| render::Truth { poses, line_direction: None }))
}

fn solve_cmd(a: SolveArgs) -> Outcome {
    let loaded = load(&a.input)?;
    check_gravity(a.solver, &loaded)?;
    let grid = loaded.grid()?;
    if grid.cameras() != a.solver.cameras() || grid.lines() != a.solver.lines() {
        return Err(Failure::usage(format!(
            "solver {} needs {} cameras x {} lines, the file has {} x {} (use `ransac` for larger sets)",
            a.solver,
            a.solver.cameras(),
            a.solver.lines(),
            grid.cameras(),
            grid.lines()
        )));
    }
    let truth = ground_truth(a.gt.as_deref(), &loaded)?;
    let output = match a.solver {
        SolverId::D37 => solve_d37_with(&grid, &D37Options { seed: a.seed, ..Default::default() }),
        s => solve(s, &grid),
    }
    .map_err(Failure::solver)?;
    let output = if a.chirality { chirality_filter(&output, &grid).map_err(Failure::solver)?.output } else { output };
    let json = render::solver_output(&output, truth.as_ref());
    write_or_print(None, &serde_json::to_string_pretty(&json).expect("serializable"))
}

fn ransac_cmd(a: RansacArgs) -> Outcome {
    let loaded = load(&a.input)?;
    check_gravity(a.solver, &loaded)?;
    let grid = loaded.grid()?;
    let truth = ground_truth(a.gt.as_deref(), &loaded)?;
    if !(a.threshold > 0.0) || a.iterations == 0 {
        return Err(Failure::usage("--threshold must be positive and --iterations at least 1"));
    }
    let focal = loaded.intrinsics.first().map_or(1.0, |k| k.focal);
    let config = RansacConfig {
        iterations: a.iterations,
        inlier_threshold: a.threshold,
        ..RansacConfig::new(a.solver, focal, a.seed)
    };
    let best = ransac(&grid, &config).map_err(|e| match e {
        Error::NotEnoughLines { .. } | Error::SampleSize { .. } => Failure::usage(e.to_string()),
        e => Failure::solver(e),
    })?;
    let json = render::scored_model(&best, &grid, truth.as_ref());
    write_or_print(None, &serde_json::to_string_pretty(&json).expect("serializable"))
}

fn benchmark(a: BenchmarkArgs) -> Outcome {
    if a.sigma_p.iter().chain(&a.sigma_v).any(|s| !(*s >= 0.0)) {
        return Err(Failure::usage("noise levels must be nonnegative"));
    }
    let config = BenchmarkConfig {
        solvers: a.solvers,
        sigma_p: a.sigma_p,
        sigma_v: a.sigma_v,
        trials: a.trials,
        seed: a.seed,
        focal: a.focal,
        ..Default::default()
    };
    let rows = run_benchmark(&config);
    let mut buf = Vec::new();
    write_benchmark_csv(&rows, &mut buf)?;
    write_or_print(a.out.as_deref(), &String::from_utf8(buf).expect("csv is utf-8"))
}

fn enumerate(a: EnumerateArgs) -> Outcome {
    let settings = if a.setting.is_empty() { Setting::ALL.to_vec() } else { a.setting };
    let verdicts = enumerate_and_check(&settings, a.m_max, a.seed)?;
    let text = if a.json {
        serde_json::to_string_pretty(&verdicts).expect("serializable")
    } else {
        format_report(&verdicts)
    };
    write_or_print(None, &text)
}
