//! Line triangulation from one scanline per camera, chirality, model
//! scoring and the RANSAC driver.

use nalgebra::{DMatrix, Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::geometry::rotation::swing;
use crate::geometry::{
    reduce_parallel, reduced_camera_matrix, scanline_rotation, ObservationGrid, ReducedCamera, ReducedObservation,
};
use crate::linalg::mix_seed;
use crate::solvers::{solve_d37_with, solve, D37Options, PoseCandidate, SolverId, SolverOutput};
use crate::tensor::CanonicalTriplet;
use crate::{Error, Result};

/// Denominators below this mark a camera's residual as infinite.
const DIVISION_GUARD: f64 = 1e-12;

/// A line triangulated from its scanline observations.
#[derive(Clone, Debug, PartialEq)]
pub struct Triangulation {
    /// Homogeneous xz-position with third component 1.
    pub point: Vector3<f64>,
    /// Per-camera residual `|p2/p1 + u0/u1|` in normalized image units.
    pub residuals: Vec<f64>,
    /// Sum of squared residuals.
    pub total: f64,
}

fn residual(p: &Vector2<f64>, u: &Vector2<f64>) -> f64 {
    if p.x.abs() < DIVISION_GUARD || u.y.abs() < DIVISION_GUARD {
        return f64::INFINITY;
    }
    (p.y / p.x + u.x / u.y).abs()
}

/// Smallest right singular vector of the stacked, row-normalized
/// `u_i^T A_i`, and the residuals of its reprojection.
pub fn triangulate_line(cameras: &[Matrix2x3<f64>], us: &[ReducedObservation]) -> Result<Triangulation> {
    if cameras.len() != us.len() {
        return Err(Error::LengthMismatch { expected: cameras.len(), found: us.len() });
    }
    if cameras.len() < 2 {
        return Err(Error::NotEnoughLines { needed: 2, available: cameras.len() });
    }
    let mut m = DMatrix::zeros(cameras.len().max(3), 3);
    for (i, (a, o)) in cameras.iter().zip(us).enumerate() {
        let row = o.u.transpose() * a;
        let n = row.norm();
        if n > 0.0 {
            m.row_mut(i).copy_from(&(row / n));
        }
    }
    let svd = m.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::Unnormalizable)?;
    let k = svd.singular_values.imin();
    let h = v_t.row(k).transpose();
    if h[2].abs() < DIVISION_GUARD * h.norm() {
        return Err(Error::Unnormalizable);
    }
    let point = Vector3::new(h[0] / h[2], h[1] / h[2], 1.0);
    let residuals: Vec<f64> = cameras.iter().zip(us).map(|(a, o)| residual(&(a * point), &o.u)).collect();
    let total = residuals.iter().map(|e| e * e).sum();
    Ok(Triangulation { point, residuals, total })
}

/// A hypothesis to score: metric poses or a projective camera triplet.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Metric(PoseCandidate),
    Projective(CanonicalTriplet),
}

impl Model {
    /// Every hypothesis carried by a solver output.
    pub fn all(output: &SolverOutput) -> Vec<Model> {
        if output.solver == SolverId::B37 {
            output.canonical.iter().cloned().map(Model::Projective).collect()
        } else {
            output.candidates.iter().cloned().map(Model::Metric).collect()
        }
    }
}

/// Rotation taking `e2` to the candidate's line direction.
fn alignment(c: &PoseCandidate) -> Matrix3<f64> {
    if let Some(r) = &c.reduction {
        return r.rd;
    }
    swing(&Vector3::y(), &c.line_direction.normalize(), 1e-12).unwrap_or_else(|| {
        // antiparallel to e2: any half turn about a horizontal axis
        Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0))
    })
}

/// Reduced cameras of a model with their true sign and scale (metric models
/// are expressed in the frame where the lines are vertical).
fn model_cameras(model: &Model) -> Vec<Matrix2x3<f64>> {
    match model {
        Model::Projective(t) => t.cameras().to_vec(),
        Model::Metric(c) => {
            let rd = alignment(c);
            c.poses
                .iter()
                .map(|p| {
                    let r = scanline_rotation(p.scanline_y) * p.rotation * rd;
                    let center = rd.transpose() * p.center;
                    reduced_camera_matrix(&r, center.x, center.z)
                })
                .collect()
        }
    }
}

/// Ray parameter of the closest approach between the viewing ray of `obs`
/// and the line, i.e. the depth along `C + lambda R^T p`.
fn ray_depth(c: &PoseCandidate, camera: usize, x: f64, y: f64, point: &Vector3<f64>) -> f64 {
    let pose = &c.poses[camera];
    let d = pose.rotation.transpose() * Vector3::new(x, y, 1.0);
    let ld = c.line_direction.normalize();
    let rhs = point - pose.center;
    // minimize |lambda d - t ld - rhs|
    let a = Matrix2::new(d.dot(&d), -d.dot(&ld), d.dot(&ld), -ld.dot(&ld));
    let b = Vector2::new(d.dot(&rhs), ld.dot(&rhs));
    match a.try_inverse() {
        Some(inv) => (inv * b).x,
        None => f64::NAN,
    }
}

/// Per line: the sign of the depth in every camera, or `None` when the
/// line could not be triangulated.
struct LineEvidence {
    tri: Vec<Option<Triangulation>>,
    signs: Vec<Option<Vec<bool>>>,
}

fn evidence(model: &Model, grid: &ObservationGrid, us: &[Vec<ReducedObservation>]) -> LineEvidence {
    let cams = model_cameras(model);
    let mut tri = Vec::with_capacity(grid.lines());
    let mut signs = Vec::with_capacity(grid.lines());
    for (j, u) in us.iter().enumerate() {
        let t = triangulate_line(&cams, u).ok();
        let s = t.as_ref().map(|t| match model {
            Model::Projective(_) => cams.iter().map(|a| (a * t.point).x > 0.0).collect(),
            Model::Metric(c) => {
                let rd = alignment(c);
                let point = rd * Vector3::new(t.point.x, 0.0, t.point.y);
                (0..cams.len())
                    .map(|i| {
                        let o = grid.get(i, j);
                        ray_depth(c, i, o.x, o.scanline_y, &point) > 0.0
                    })
                    .collect()
            }
        });
        tri.push(t);
        signs.push(s);
    }
    LineEvidence { tri, signs }
}

/// Projective cameras have no absolute orientation: choose per-camera signs
/// (first camera fixed) agreeing, up to a per-line flip, with the most of the
/// given lines.
fn projective_orientation(signs: &[Option<Vec<bool>>], use_line: &[bool], cameras: usize) -> Vec<bool> {
    let mut best = (0, vec![true; cameras]);
    for mask in 0..1usize << (cameras - 1) {
        let s: Vec<bool> = (0..cameras).map(|i| i == 0 || mask >> (i - 1) & 1 == 0).collect();
        let count = signs
            .iter()
            .zip(use_line)
            .filter(|(l, u)| **u && l.as_ref().is_some_and(|l| agrees(l, &s)))
            .count();
        if count > best.0 {
            best = (count, s);
        }
    }
    best.1
}

fn agrees(line: &[bool], orientation: &[bool]) -> bool {
    let same = line.iter().zip(orientation).all(|(a, b)| a == b);
    let flipped = line.iter().zip(orientation).all(|(a, b)| a != b);
    same || flipped
}

fn in_front(model: &Model, signs: &Option<Vec<bool>>, orientation: &[bool]) -> bool {
    match (model, signs) {
        (_, None) => false,
        (Model::Metric(_), Some(s)) => s.iter().all(|&v| v),
        (Model::Projective(_), Some(s)) => agrees(s, orientation),
    }
}

fn rectified(grid: &ObservationGrid) -> Result<Vec<Vec<ReducedObservation>>> {
    (0..grid.lines())
        .map(|j| (0..grid.cameras()).map(|i| reduce_parallel(grid.get(i, j))).collect())
        .collect()
}

/// Number of lines in front of every camera.
fn front_count(model: &Model, grid: &ObservationGrid, us: &[Vec<ReducedObservation>]) -> usize {
    let ev = evidence(model, grid, us);
    let all = vec![true; grid.lines()];
    let orientation = projective_orientation(&ev.signs, &all, grid.cameras());
    ev.signs.iter().filter(|s| in_front(model, s, &orientation)).count()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiralityResult {
    pub output: SolverOutput,
    /// No hypothesis had every line in front; the best count was kept.
    pub fallback: bool,
}

/// Keep the hypotheses that place every line in front of every camera. If
/// none does, keep the one with the most such lines (first on ties).
pub fn chirality_filter(output: &SolverOutput, grid: &ObservationGrid) -> Result<ChiralityResult> {
    let us = rectified(grid)?;
    let models = Model::all(output);
    let counts: Vec<usize> = models.iter().map(|m| front_count(m, grid, &us)).collect();
    let n = grid.lines();
    let mut keep: Vec<usize> = (0..models.len()).filter(|&k| counts[k] == n).collect();
    let fallback = keep.is_empty() && !models.is_empty();
    if fallback {
        let best = counts.iter().copied().max().unwrap_or(0);
        keep = vec![counts.iter().position(|&c| c == best).unwrap()];
    }
    let mut filtered = output.clone();
    if output.solver == SolverId::B37 {
        filtered.canonical = keep.iter().map(|&k| output.canonical[k].clone()).collect();
    } else {
        filtered.candidates = keep.iter().map(|&k| output.candidates[k].clone()).collect();
    }
    Ok(ChiralityResult { output: filtered, fallback })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RansacConfig {
    pub iterations: usize,
    /// Pixels.
    pub inlier_threshold: f64,
    /// Pixels; converts normalized residuals to pixels.
    pub focal: f64,
    pub seed: u64,
    pub solver: SolverId,
    pub d37: D37Options,
}

impl RansacConfig {
    pub fn new(solver: SolverId, focal: f64, seed: u64) -> Self {
        Self { iterations: 1000, inlier_threshold: 1.0, focal, seed, solver, d37: D37Options::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredModel {
    pub model: Model,
    /// Reduced cameras of the model (line-aligned frame when metric).
    pub cameras: Vec<ReducedCamera>,
    /// Sum over inliers of `(threshold - error)^2`.
    pub score: f64,
    pub inlier_mask: Vec<bool>,
    /// Homogeneous xz-positions in the frame of `cameras`.
    pub triangulated: Vec<Option<Vector3<f64>>>,
    /// Per line, the largest per-camera residual in pixels.
    pub errors: Vec<f64>,
    /// Per line, the sum of squared per-camera residuals (normalized units).
    pub totals: Vec<f64>,
    /// RANSAC iteration that produced the model.
    pub iteration: usize,
}

impl ScoredModel {
    pub fn inliers(&self) -> usize {
        self.inlier_mask.iter().filter(|&&b| b).count()
    }
}

/// Score a hypothesis against every line of `grid`. A line is an inlier if
/// it lies in front of all cameras and its largest per-camera error is below
/// the threshold.
pub fn score_model(model: &Model, grid: &ObservationGrid, config: &RansacConfig) -> Result<ScoredModel> {
    let us = rectified(grid)?;
    Ok(score_rectified(model, grid, &us, config))
}

fn score_rectified(model: &Model, grid: &ObservationGrid, us: &[Vec<ReducedObservation>], config: &RansacConfig) -> ScoredModel {
    let ev = evidence(model, grid, us);
    let thr = config.inlier_threshold;
    let errors: Vec<f64> = ev
        .tri
        .iter()
        .map(|t| match t {
            Some(t) => t.residuals.iter().fold(0.0f64, |a, &e| a.max(e)) * config.focal,
            None => f64::INFINITY,
        })
        .collect();
    let below: Vec<bool> = errors.iter().map(|&e| e < thr).collect();
    let orientation = projective_orientation(&ev.signs, &below, grid.cameras());
    let inlier_mask: Vec<bool> = below
        .iter()
        .zip(&ev.signs)
        .map(|(&b, s)| b && in_front(model, s, &orientation))
        .collect();
    let score = errors
        .iter()
        .zip(&inlier_mask)
        .filter(|(_, &i)| i)
        .map(|(&e, _)| kernel(e, thr))
        .sum();
    let cameras = model_cameras(model).into_iter().filter_map(|a| ReducedCamera::new(a).ok()).collect();
    ScoredModel {
        model: model.clone(),
        cameras,
        score,
        inlier_mask,
        triangulated: ev.tri.iter().map(|t| t.as_ref().map(|t| t.point)).collect(),
        errors,
        totals: ev.tri.iter().map(|t| t.as_ref().map_or(f64::INFINITY, |t| t.total)).collect(),
        iteration: 0,
    }
}

/// Truncated quadratic contribution of one line with error `e`.
fn kernel(e: f64, threshold: f64) -> f64 {
    if e < threshold {
        (threshold - e) * (threshold - e)
    } else {
        0.0
    }
}

/// Lines of the minimal sample drawn in iteration `k`.
fn draw(seed: u64, k: usize, lines: usize, sample: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, k as u64));
    let mut idx = rand::seq::index::sample(&mut rng, lines, sample).into_vec();
    idx.sort_unstable();
    idx
}

/// Plain RANSAC without local optimization: each iteration solves a random
/// minimal sample and scores every hypothesis on all lines. Ties go to the
/// lowest iteration, then the lowest hypothesis index.
pub fn ransac(grid: &ObservationGrid, config: &RansacConfig) -> Result<ScoredModel> {
    let solver = config.solver;
    if grid.lines() < solver.lines() {
        return Err(Error::NotEnoughLines { needed: solver.lines(), available: grid.lines() });
    }
    if grid.cameras() != solver.cameras() {
        return Err(Error::SampleSize {
            expected_cameras: solver.cameras(),
            expected_lines: solver.lines(),
            cameras: grid.cameras(),
            lines: grid.lines(),
        });
    }
    if config.iterations == 0 || !(config.inlier_threshold > 0.0) {
        return Err(Error::Schema("RANSAC needs at least one iteration and a positive threshold".into()));
    }
    let us = rectified(grid)?;
    let best = (0..config.iterations)
        .into_par_iter()
        .filter_map(|k| {
            let sample = grid.select_lines(&draw(config.seed, k, grid.lines(), solver.lines()));
            let output = match solver {
                SolverId::D37 => solve_d37_with(&sample, &config.d37),
                _ => solve(solver, &sample),
            }
            .ok()?;
            let mut best: Option<ScoredModel> = None;
            for model in Model::all(&output) {
                let mut s = score_rectified(&model, grid, &us, config);
                s.iteration = k;
                if best.as_ref().is_none_or(|b| s.score > b.score) {
                    best = Some(s);
                }
            }
            best
        })
        .reduce_with(|a, b| {
            if b.score > a.score || (b.score == a.score && b.iteration < a.iteration) {
                b
            } else {
                a
            }
        });
    best.ok_or(Error::AllIterationsFailed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumeration::Setting;
    use crate::geometry::{canonicalize_solution, pose_errors, CameraPose};
    use crate::synthetic::{sample_scene, SceneConfig, SyntheticInstance};
    use rand::Rng;

    fn identity() -> Matrix2x3<f64> {
        Matrix2x3::new(0.0, 1.0, 0.0, -1.0, 0.0, 0.0)
    }

    fn obs(x: f64) -> ReducedObservation {
        ReducedObservation { u: Vector2::new(x, 1.0), u_prime: Vector2::new(1.0, -x), u_dprime: None }
    }

    #[test]
    fn two_view_example() {
        // second camera shifted by one unit along x
        let shifted = reduced_camera_matrix(&Matrix3::identity(), 1.0, 0.0);
        let t = triangulate_line(&[identity(), shifted], &[obs(0.2), obs(0.0)]).unwrap();
        assert!((t.point - Vector3::new(1.0, 5.0, 1.0)).norm() < 1e-12);
        assert!(t.total < 1e-24);
    }

    #[test]
    fn residuals_blame_the_perturbed_camera() {
        let cams: Vec<Matrix2x3<f64>> =
            [(0.0, 0.0), (1.0, 0.0), (-1.0, 0.5)].iter().map(|&(x, z)| reduced_camera_matrix(&Matrix3::identity(), x, z)).collect();
        let target = Vector3::new(0.3, 4.0, 1.0);
        let mut us: Vec<ReducedObservation> = cams
            .iter()
            .map(|a| {
                let p = a * target;
                obs(-p.y / p.x)
            })
            .collect();
        assert!(triangulate_line(&cams, &us).unwrap().total < 1e-24);
        us[2].u.x += 0.01;
        let t = triangulate_line(&cams, &us).unwrap();
        assert!(t.total > 0.0);
        assert_eq!(t.residuals.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0, 2);
    }

    #[test]
    fn point_at_infinity_is_rejected() {
        // parallel rays from two cameras
        let shifted = reduced_camera_matrix(&Matrix3::identity(), 1.0, 0.0);
        assert!(matches!(triangulate_line(&[identity(), shifted], &[obs(0.0), obs(0.0)]), Err(Error::Unnormalizable)));
    }

    #[test]
    fn division_guard_gives_infinity() {
        assert_eq!(residual(&Vector2::new(0.0, 1.0), &Vector2::new(0.1, 1.0)), f64::INFINITY);
        assert_eq!(residual(&Vector2::new(1.0, 1.0), &Vector2::new(0.1, 0.0)), f64::INFINITY);
    }

    fn scene(setting: Setting, m: usize, n: usize, seed: u64) -> SyntheticInstance {
        // lines in front of the cameras, as in a real capture
        let config = SceneConfig { forward_facing: true, ..SceneConfig::new(setting, m, n, seed) };
        sample_scene(&config).unwrap()
    }

    fn gt_model(inst: &SyntheticInstance) -> Model {
        Model::Metric(PoseCandidate {
            poses: inst.gt_poses.clone(),
            line_direction: inst.line_direction(),
            reduction: None,
        })
    }

    #[test]
    fn exact_model_scores_every_line() {
        let inst = scene(Setting::E, 3, 12, 4);
        let config = RansacConfig::new(SolverId::E35, 1000.0, 0);
        let s = score_model(&gt_model(&inst), &inst.observations, &config).unwrap();
        assert_eq!(s.inliers(), 12);
        assert!((s.score - 12.0).abs() < 1e-6);
    }

    #[test]
    fn kernel_values() {
        assert_eq!(kernel(0.5, 1.0), 0.25);
        assert_eq!(kernel(1.2, 1.0), 0.0);
        assert_eq!(kernel(0.0, 1.0), 1.0);
    }

    #[test]
    fn score_kernel_examples() {
        let inst = scene(Setting::E, 3, 2, 8);
        let config = RansacConfig::new(SolverId::E35, 1000.0, 0);
        let mut grid = inst.observations.clone();
        // move one observation so that its error is near 0.5 px
        grid.get_mut(0, 0).x += 0.5 / 1000.0;
        let s = score_model(&gt_model(&inst), &grid, &config).unwrap();
        let e = s.errors[0];
        assert!(e > 0.0 && e < 1.0);
        assert!((s.score - (1.0 + (1.0 - e).powi(2))).abs() < 1e-9);
        // pushed beyond the threshold the line contributes nothing
        grid.get_mut(0, 0).x += 10.0 / 1000.0;
        let s = score_model(&gt_model(&inst), &grid, &config).unwrap();
        assert!(!s.inlier_mask[0] && (s.score - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lines_behind_a_camera_are_outliers() {
        let inst = scene(Setting::E, 3, 5, 2);
        let config = RansacConfig::new(SolverId::E35, 1000.0, 0);
        // mirrored centers reproduce the observations with the scene
        // reflected through the origin, behind every camera
        let flipped: Vec<CameraPose> =
            inst.gt_poses.iter().map(|p| CameraPose::new(p.rotation, -p.center, p.scanline_y)).collect();
        let model = Model::Metric(PoseCandidate { poses: flipped, line_direction: Vector3::y(), reduction: None });
        let s = score_model(&model, &inst.observations, &config).unwrap();
        assert!(s.errors.iter().all(|&e| e < 1e-6));
        assert_eq!(s.inliers(), 0);
        assert_eq!(s.score, 0.0);
    }

    #[test]
    fn chirality_keeps_the_truth() {
        let inst = scene(Setting::E, 3, 5, 11);
        let out = solve(SolverId::E35, &inst.observations).unwrap();
        let kept = chirality_filter(&out, &inst.observations).unwrap();
        assert!(!kept.fallback);
        assert!(kept.output.candidates.len() < out.candidates.len());
        let (gt, _) = canonicalize_solution(&inst.gt_poses, &Vector3::y(), &[]).unwrap();
        let hit = kept.output.candidates.iter().any(|c| {
            let (p, _) = canonicalize_solution(&c.poses, &c.line_direction, &[]).unwrap();
            let e = pose_errors(&p, &gt).unwrap();
            e.rot_err.max(e.trans_err) < 1e-7
        });
        assert!(hit);
    }

    #[test]
    fn chirality_falls_back_to_the_best_count() {
        let inst = scene(Setting::E, 3, 5, 11);
        let mut out = solve(SolverId::E35, &inst.observations).unwrap();
        // keep only hypotheses with some line behind a camera
        let us = rectified(&inst.observations).unwrap();
        out.candidates.retain(|c| front_count(&Model::Metric(c.clone()), &inst.observations, &us) < 5);
        assert!(!out.candidates.is_empty());
        let kept = chirality_filter(&out, &inst.observations).unwrap();
        assert!(kept.fallback);
        assert_eq!(kept.output.candidates.len(), 1);
    }

    #[test]
    fn projective_chirality_accepts_exact_data() {
        let inst = scene(Setting::B, 3, 7, 5);
        let out = solve(SolverId::B37, &inst.observations).unwrap();
        let kept = chirality_filter(&out, &inst.observations).unwrap();
        assert!(!kept.output.canonical.is_empty());
        let config = RansacConfig::new(SolverId::B37, 1000.0, 0);
        let best = Model::all(&out)
            .iter()
            .map(|m| score_model(m, &inst.observations, &config).unwrap().score)
            .fold(0.0, f64::max);
        assert!((best - 7.0).abs() < 1e-6);
    }

    #[test]
    fn ransac_without_outliers_is_exact() {
        let inst = scene(Setting::E, 3, 12, 21);
        let config = RansacConfig { iterations: 20, ..RansacConfig::new(SolverId::E35, 1000.0, 1) };
        let best = ransac(&inst.observations, &config).unwrap();
        assert!((best.score - 12.0).abs() < 1e-6);
        let Model::Metric(c) = &best.model else { panic!() };
        let (gt, _) = canonicalize_solution(&inst.gt_poses, &Vector3::y(), &[]).unwrap();
        let (p, _) = canonicalize_solution(&c.poses, &c.line_direction, &[]).unwrap();
        let e = pose_errors(&p, &gt).unwrap();
        assert!(e.rot_err.max(e.trans_err) < 1e-7);
    }

    #[test]
    fn ransac_is_deterministic_and_monotone() {
        let inst = scene(Setting::E, 3, 15, 3);
        let mut grid = inst.observations.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for j in 0..4 {
            grid.get_mut(1, j).x = rng.random_range(-1.0..1.0);
        }
        let config = |iterations| RansacConfig { iterations, ..RansacConfig::new(SolverId::E35, 1000.0, 5) };
        let a = ransac(&grid, &config(40)).unwrap();
        let b = ransac(&grid, &config(40)).unwrap();
        assert_eq!(a, b);
        let fewer = ransac(&grid, &config(10)).unwrap();
        assert!(fewer.score <= a.score);
    }

    #[test]
    fn ransac_input_checks() {
        let inst = scene(Setting::E, 3, 4, 1);
        let config = RansacConfig::new(SolverId::E35, 1000.0, 0);
        assert!(matches!(ransac(&inst.observations, &config), Err(Error::NotEnoughLines { needed: 5, available: 4 })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn grid_scene(seed: u64) -> SyntheticInstance {
            scene(Setting::E, 3, 8, seed)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn triangulation_ignores_camera_scale(seed in 0u64..1000, s in prop::array::uniform3(0.1f64..10.0), flip in prop::array::uniform3(any::<bool>())) {
                let inst = grid_scene(seed);
                let model = gt_model(&inst);
                let cams = model_cameras(&model);
                let scaled: Vec<Matrix2x3<f64>> = cams.iter().enumerate().map(|(i, a)| a * s[i] * if flip[i] { -1.0 } else { 1.0 }).collect();
                let us = rectified(&inst.observations).unwrap();
                let mut perturbed = us[0].clone();
                perturbed[1].u.x += 0.003;
                let a = triangulate_line(&cams, &perturbed).unwrap();
                let b = triangulate_line(&scaled, &perturbed).unwrap();
                for (x, y) in a.residuals.iter().zip(&b.residuals) {
                    prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
                }
            }

            #[test]
            fn score_is_permutation_invariant(seed in 0u64..1000, shift in 0usize..8) {
                let inst = grid_scene(seed);
                let mut grid = inst.observations.clone();
                grid.get_mut(2, 3).x += 0.0004;
                let order: Vec<usize> = (0..8).map(|j| (j + shift) % 8).collect();
                let permuted = grid.select_lines(&order);
                let config = RansacConfig::new(SolverId::E35, 1000.0, 0);
                let a = score_model(&gt_model(&inst), &grid, &config).unwrap();
                let b = score_model(&gt_model(&inst), &permuted, &config).unwrap();
                prop_assert!((a.score - b.score).abs() < 1e-9);
            }

            #[test]
            fn kernel_is_nonincreasing(e in 0.0f64..3.0, d in 0.0f64..3.0, thr in 0.1f64..3.0) {
                prop_assert!(kernel(e + d, thr) <= kernel(e, thr));
                prop_assert!(kernel(e, thr) >= 0.0);
            }
        }
    }
}
