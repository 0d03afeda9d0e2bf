//! Benchmark harness: generate, perturb, solve and score the best candidate.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{add_noise, sample_scene, NoiseConfig, SceneConfig, SyntheticInstance};
use crate::enumeration::Setting;
use crate::geometry::{canonicalize_solution, pose_errors, tensor_error, ErrorReport};
use crate::linalg::mix_seed;
use crate::solvers::{solve, solve_d37_with, D37Options, SolverId, SolverOutput};
use crate::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkConfig {
    pub solvers: Vec<SolverId>,
    /// Every pair `(sigma_p, sigma_v)` is one cell.
    pub sigma_p: Vec<f64>,
    pub sigma_v: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub focal: f64,
    pub d37: D37Options,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            solvers: SolverId::ALL.to_vec(),
            sigma_p: vec![0.0],
            sigma_v: vec![0.0],
            trials: 100,
            seed: 0,
            focal: 1000.0,
            d37: D37Options::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TrialOutcome {
    /// Errors of the candidate closest to ground truth. Pose errors are NaN
    /// for the projective solver.
    Solved(ErrorReport),
    /// The solver returned an error (no real solution, rank deficiency, ...).
    Failed,
}

/// Aggregated errors of one solver in one noise cell. Statistics are over
/// successful trials; they are NaN when no trial succeeded.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub setting: Setting,
    pub solver: SolverId,
    pub sigma_p: f64,
    pub sigma_v: f64,
    pub trials: usize,
    pub median_rot: f64,
    pub median_trans: f64,
    pub median_tensor: f64,
    pub mean_rot: f64,
    pub mean_trans: f64,
    pub mean_tensor: f64,
    pub p99_rot: f64,
    pub p99_trans: f64,
    pub p99_tensor: f64,
    pub fail_rate: f64,
}

/// Errors of the candidate closest to the ground truth (smallest larger of
/// rotation and translation error, lowest index on ties).
pub fn best_candidate_errors(output: &SolverOutput, instance: &SyntheticInstance) -> Result<ErrorReport> {
    let tensor_err = tensor_error(&output.tensor, &instance.gt_tensor)?;
    if output.solver == SolverId::B37 {
        return Ok(ErrorReport { rot_err: f64::NAN, trans_err: f64::NAN, tensor_err });
    }
    let (gt, _) = canonicalize_solution(&instance.gt_poses, &instance.line_direction(), &[])?;
    let mut best: Option<ErrorReport> = None;
    for c in &output.candidates {
        let Ok((poses, _)) = canonicalize_solution(&c.poses, &c.line_direction, &[]) else { continue };
        let Ok(e) = pose_errors(&poses, &gt) else { continue };
        if best.is_none_or(|b| e.rot_err.max(e.trans_err) < b.rot_err.max(b.trans_err)) {
            best = Some(e);
        }
    }
    let best = best.unwrap_or(ErrorReport { rot_err: f64::INFINITY, trans_err: f64::INFINITY, tensor_err: 0.0 });
    Ok(ErrorReport { tensor_err, ..best })
}

fn run_solver(solver: SolverId, instance: &SyntheticInstance, d37: &D37Options) -> Result<SolverOutput> {
    match solver {
        SolverId::D37 => solve_d37_with(&instance.observations, d37),
        _ => solve(solver, &instance.observations),
    }
}

/// One trial: scene from `seed`, noise from a seed derived from it.
pub fn evaluate_trial(solver: SolverId, seed: u64, noise: &NoiseConfig, d37: &D37Options) -> TrialOutcome {
    let Ok(scene) = sample_scene(&SceneConfig::for_solver(solver, seed)) else {
        return TrialOutcome::Failed;
    };
    let noisy = add_noise(&scene, noise, mix_seed(seed, 1));
    match run_solver(solver, &noisy, d37).and_then(|out| best_candidate_errors(&out, &scene)) {
        Ok(e) => TrialOutcome::Solved(e),
        Err(_) => TrialOutcome::Failed,
    }
}

/// Nearest-rank percentile of the finite values, NaN when there are none.
fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let rank = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

fn mean(values: &[f64]) -> f64 {
    let v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Every solver in every noise cell. Trial `k` uses the same scene in every
/// cell (seed mixed with `k`), so rows along a noise axis differ only by
/// the noise level. Output order: solvers, then `sigma_p`, then `sigma_v`.
pub fn run_benchmark(config: &BenchmarkConfig) -> Vec<BenchmarkRow> {
    let mut rows = Vec::new();
    for &solver in &config.solvers {
        for &sigma_p in &config.sigma_p {
            for &sigma_v in &config.sigma_v {
                let noise = NoiseConfig { sigma_p, focal: config.focal, sigma_v };
                let outcomes: Vec<TrialOutcome> = (0..config.trials as u64)
                    .into_par_iter()
                    .map(|k| evaluate_trial(solver, mix_seed(config.seed, k), &noise, &config.d37))
                    .collect();
                rows.push(aggregate(solver, sigma_p, sigma_v, &outcomes));
            }
        }
    }
    rows
}

fn aggregate(solver: SolverId, sigma_p: f64, sigma_v: f64, outcomes: &[TrialOutcome]) -> BenchmarkRow {
    let solved: Vec<ErrorReport> = outcomes
        .iter()
        .filter_map(|o| match o {
            TrialOutcome::Solved(e) => Some(*e),
            TrialOutcome::Failed => None,
        })
        .collect();
    let rot: Vec<f64> = solved.iter().map(|e| e.rot_err).collect();
    let trans: Vec<f64> = solved.iter().map(|e| e.trans_err).collect();
    let tensor: Vec<f64> = solved.iter().map(|e| e.tensor_err).collect();
    let trials = outcomes.len();
    BenchmarkRow {
        setting: solver.setting(),
        solver,
        sigma_p,
        sigma_v,
        trials,
        median_rot: percentile(&rot, 0.5),
        median_trans: percentile(&trans, 0.5),
        median_tensor: percentile(&tensor, 0.5),
        mean_rot: mean(&rot),
        mean_trans: mean(&trans),
        mean_tensor: mean(&tensor),
        p99_rot: percentile(&rot, 0.99),
        p99_trans: percentile(&trans, 0.99),
        p99_tensor: percentile(&tensor, 0.99),
        fail_rate: if trials == 0 { 0.0 } else { (trials - solved.len()) as f64 / trials as f64 },
    }
}

/// CSV with the columns `setting, solver, sigma_p, sigma_v, trials,
/// median_rot, median_trans, median_tensor, p99_rot, fail_rate`.
pub fn write_benchmark_csv<W: Write>(rows: &[BenchmarkRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "setting",
        "solver",
        "sigma_p",
        "sigma_v",
        "trials",
        "median_rot",
        "median_trans",
        "median_tensor",
        "p99_rot",
        "fail_rate",
    ])
    .map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.setting.to_string(),
            r.solver.to_string(),
            r.sigma_p.to_string(),
            r.sigma_v.to_string(),
            r.trials.to_string(),
            r.median_rot.to_string(),
            r.median_trans.to_string(),
            r.median_tensor.to_string(),
            r.p99_rot.to_string(),
            r.fail_rate.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> crate::Error {
    crate::Error::Io(std::io::Error::other(e))
}
