//! Random scenes of parallel lines, forward projection to scanline
//! observations, noise and degeneracy predicates.

mod benchmark;

use nalgebra::{Matrix2x3, Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::enumeration::Setting;
use crate::geometry::rotation::{exp_so3, quat_to_matrix, swing};
use crate::geometry::{
    gravity_factorization, project_line_to_scanline, reduced_camera_from_pose, CameraPose, Line3D,
    ObservationGrid, ScanlineObservation,
};
use crate::solvers::SolverId;
use crate::tensor::{dual_quadrifocal_from_points, trifocal_from_cameras, MultiViewTensor, TensorData};
use crate::{Error, Result};

pub use benchmark::{evaluate_trial, run_benchmark, write_benchmark_csv, BenchmarkConfig, BenchmarkRow, TrialOutcome};

const MAX_RESAMPLES: usize = 100;

/// Special configurations used to exercise the degeneracy predicates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SceneLayout {
    Generic,
    /// The first `k` lines lie in one plane containing the line direction.
    CoplanarLines(usize),
    /// The first two cameras share their center.
    CoincidentCenters,
    /// All centers on one random 3D line.
    CollinearCenters,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneConfig {
    pub setting: Setting,
    pub cameras: usize,
    pub lines: usize,
    pub seed: u64,
    /// Depth added to the z coordinate of every line.
    pub depth_offset: f64,
    pub layout: SceneLayout,
    /// Rotations close to identity instead of uniform, so that the lines
    /// lie in front of every camera.
    pub forward_facing: bool,
}

impl SceneConfig {
    pub fn new(setting: Setting, cameras: usize, lines: usize, seed: u64) -> Self {
        Self {
            setting,
            cameras,
            lines,
            seed,
            depth_offset: 5.0,
            layout: SceneLayout::Generic,
            forward_facing: false,
        }
    }

    /// Minimal scene for `solver`.
    pub fn for_solver(solver: SolverId, seed: u64) -> Self {
        Self::new(solver.setting(), solver.cameras(), solver.lines(), seed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct NoiseConfig {
    /// Standard deviation of the image x coordinate in pixels.
    pub sigma_p: f64,
    pub focal: f64,
    /// Rotation angle applied to each gravity vector, radians.
    pub sigma_v: f64,
}

impl NoiseConfig {
    pub fn new(sigma_p: f64, sigma_v: f64) -> Self {
        Self { sigma_p, focal: 1000.0, sigma_v }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticInstance {
    pub setting: Setting,
    pub gt_poses: Vec<CameraPose>,
    pub gt_lines: Vec<Line3D>,
    pub observations: ObservationGrid,
    /// Tensor a solver for this setting and camera count estimates from
    /// noise-free data: the plain trifocal tensor for settings B and D, the
    /// gravity-corrected trifocal tensor (three cameras) or the dual
    /// quadrifocal tensor (four cameras) for setting E.
    pub gt_tensor: MultiViewTensor,
}

impl SyntheticInstance {
    pub fn line_direction(&self) -> Vector3<f64> {
        self.gt_lines.first().map(|l| l.direction).unwrap_or_else(Vector3::y)
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    quat_to_matrix(q.map(|v| v / n))
}

fn gaussian3(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Any unit vector perpendicular to `v`.
fn perpendicular(v: &Vector3<f64>) -> Vector3<f64> {
    let a = if v.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    v.cross(&a).normalize()
}

fn min_counts(setting: Setting) -> Result<(usize, usize)> {
    match setting {
        Setting::B | Setting::D => Ok((3, 1)),
        Setting::E => Ok((3, 1)),
        other => Err(Error::UnsupportedSetting(format!("no synthetic scenes for setting {other}"))),
    }
}

/// Draw a scene. Retries (at most 100 times) when a line does not cross a
/// scanline or a generic draw turns out degenerate.
pub fn sample_scene(config: &SceneConfig) -> Result<SyntheticInstance> {
    let (min_m, min_n) = min_counts(config.setting)?;
    if config.cameras < min_m || config.lines < min_n {
        return Err(Error::SampleSize {
            expected_cameras: min_m,
            expected_lines: min_n,
            cameras: config.cameras,
            lines: config.lines,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..MAX_RESAMPLES {
        let Some(inst) = draw(config, &mut rng) else { continue };
        if config.layout == SceneLayout::Generic && generic_is_degenerate(&inst) {
            continue;
        }
        return Ok(inst);
    }
    Err(Error::ExhaustedRetries(MAX_RESAMPLES))
}

fn generic_is_degenerate(inst: &SyntheticInstance) -> bool {
    let d = inst.line_direction();
    let centers = flattened(inst.gt_poses.iter().map(|p| p.center), &d);
    let points = flattened(inst.gt_lines.iter().map(|l| l.point), &d);
    coincident_pair(&centers).is_some() || (points.len() >= 3 && max_collinear(&points) >= 3)
}

fn draw(config: &SceneConfig, rng: &mut ChaCha8Rng) -> Option<SyntheticInstance> {
    let (m, n) = (config.cameras, config.lines);
    let direction = match config.setting {
        Setting::D => {
            let (nx, nz): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            Vector3::new(nx, 1.0, nz).normalize()
        }
        _ => Vector3::y(),
    };
    let mut poses = Vec::with_capacity(m);
    for _ in 0..m {
        let rotation = if config.forward_facing {
            let w = gaussian3(rng) * 0.15;
            exp_so3(&w)
        } else {
            random_rotation(rng)
        };
        let center = gaussian3(rng);
        let y: f64 = rng.random_range(-1.0..1.0);
        poses.push(CameraPose::new(rotation, center, y));
    }
    let mut lines = Vec::with_capacity(n);
    for _ in 0..n {
        let (mx, mz): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        lines.push(Line3D::new(Vector3::new(mx, 0.0, mz + config.depth_offset), direction));
    }
    apply_layout(config, &mut poses, &mut lines, rng);

    let with_gravity = matches!(config.setting, Setting::D | Setting::E);
    let mut obs = Vec::with_capacity(m * n);
    for (j, line) in lines.iter().enumerate() {
        for (i, pose) in poses.iter().enumerate() {
            let x = project_line_to_scanline(pose, line, pose.scanline_y).ok()?;
            if !x.is_finite() || x.abs() > 1e6 {
                return None;
            }
            obs.push(ScanlineObservation {
                camera_index: i,
                line_index: j,
                x,
                scanline_y: pose.scanline_y,
                gravity: with_gravity.then(|| pose.rotation * Vector3::y()),
            });
        }
    }
    let observations = ObservationGrid::from_observations(&obs).ok()?;
    let gt_tensor = ground_truth_tensor(config.setting, &poses, &lines).ok()?;
    Some(SyntheticInstance { setting: config.setting, gt_poses: poses, gt_lines: lines, observations, gt_tensor })
}

fn apply_layout(config: &SceneConfig, poses: &mut [CameraPose], lines: &mut [Line3D], rng: &mut ChaCha8Rng) {
    match config.layout {
        SceneLayout::Generic => {}
        SceneLayout::CoplanarLines(k) => {
            // points on one line of the xz-plane (lines stay parallel, so the
            // plane contains the direction)
            let a = lines[0].point;
            let along = Vector3::new(rng.sample(StandardNormal), 0.0, rng.sample::<f64, _>(StandardNormal)).normalize();
            let count = k.min(lines.len());
            for l in lines.iter_mut().take(count).skip(1) {
                let s: f64 = rng.sample(StandardNormal);
                l.point = a + along * (2.0 * s);
            }
        }
        SceneLayout::CoincidentCenters => {
            if poses.len() > 1 {
                poses[1].center = poses[0].center;
            }
        }
        SceneLayout::CollinearCenters => {
            let base = gaussian3(rng);
            let dir = gaussian3(rng).normalize();
            for p in poses.iter_mut() {
                let s: f64 = rng.sample(StandardNormal);
                p.center = base + dir * s;
            }
        }
    }
}

/// Reduced cameras in the frame where the lines point along `e2`, and the
/// line positions in that frame's xz-plane.
fn aligned(poses: &[CameraPose], lines: &[Line3D]) -> Result<(Vec<Matrix2x3<f64>>, Vec<Vector2<f64>>)> {
    let d = lines.first().map(|l| l.direction).unwrap_or_else(Vector3::y);
    let s = swing(&d, &Vector3::y(), 1e-12).ok_or(Error::GravitySingular)?;
    let cams = poses
        .iter()
        .map(|p| {
            let q = CameraPose::new(p.rotation * s.transpose(), s * p.center, p.scanline_y);
            *reduced_camera_from_pose(&q).matrix()
        })
        .collect();
    let ws = lines
        .iter()
        .map(|l| {
            let w = s * l.point;
            let w = w - Vector3::y() * w.y;
            Vector2::new(w.x, w.z)
        })
        .collect();
    Ok((cams, ws))
}

/// The tensor a solver of `setting` estimates from noise-free observations
/// of this scene. With more cameras than the solver uses, the tensor of the
/// first three (or, for four-camera vertical scenes, four) cameras.
pub fn ground_truth_tensor(setting: Setting, poses: &[CameraPose], lines: &[Line3D]) -> Result<MultiViewTensor> {
    if poses.len() < 3 {
        return Err(Error::ShapeMismatch);
    }
    let (cams, ws) = aligned(poses, lines)?;
    match setting {
        Setting::E if poses.len() == 4 && ws.len() >= 4 => {
            let q = dual_quadrifocal_from_points(&[ws[0], ws[1], ws[2], ws[3]]);
            Ok(MultiViewTensor::new(TensorData::DualQuadrifocal(q), None))
        }
        Setting::E => {
            let mut cal = Vec::with_capacity(3);
            for (p, a) in poses.iter().zip(&cams).take(3) {
                let (_, aa) = gravity_factorization(&(p.rotation * Vector3::y()), p.scanline_y)?;
                cal.push(aa.try_inverse().ok_or(Error::SingularBlock)? * a);
            }
            Ok(MultiViewTensor::new(TensorData::Trifocal(trifocal_from_cameras(&cal[0], &cal[1], &cal[2])), None))
        }
        _ => Ok(MultiViewTensor::new(
            TensorData::Trifocal(trifocal_from_cameras(&cams[0], &cams[1], &cams[2])),
            None,
        )),
    }
}

/// Perturb the image x coordinates by `N(0, (sigma_p / focal)^2)` and rotate
/// each camera's gravity vector by exactly `sigma_v` about a random axis
/// perpendicular to it. Ground truth is left untouched.
pub fn add_noise(instance: &SyntheticInstance, noise: &NoiseConfig, seed: u64) -> SyntheticInstance {
    let mut out = instance.clone();
    if noise.sigma_p == 0.0 && noise.sigma_v == 0.0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = out.observations.cameras();
    let mut tilts = Vec::with_capacity(m);
    for i in 0..m {
        let g = out.observations.get(i, 0).gravity;
        let tilt = match g {
            Some(g) if noise.sigma_v != 0.0 => {
                let e1 = perpendicular(&g);
                let e2 = g.normalize().cross(&e1);
                let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let axis = e1 * phi.cos() + e2 * phi.sin();
                exp_so3(&(axis * noise.sigma_v))
            }
            _ => Matrix3::identity(),
        };
        tilts.push(tilt);
    }
    let normal = (noise.sigma_p > 0.0).then(|| Normal::new(0.0, noise.sigma_p / noise.focal).unwrap());
    for j in 0..out.observations.lines() {
        for (i, tilt) in tilts.iter().enumerate() {
            let o = out.observations.get_mut(i, j);
            if let Some(nd) = &normal {
                o.x += nd.sample(&mut rng);
            }
            if let Some(g) = o.gravity.as_mut() {
                *g = tilt * *g;
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegeneracyReport {
    pub degenerate: bool,
    pub reason: Option<String>,
}

/// Points with their component along `d` removed.
fn flattened(points: impl Iterator<Item = Vector3<f64>>, d: &Vector3<f64>) -> Vec<Vector3<f64>> {
    points.map(|p| p - d * d.dot(&p)).collect()
}

fn coincident_pair(points: &[Vector3<f64>]) -> Option<(usize, usize)> {
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if (points[i] - points[j]).norm() <= 1e-9 {
                return Some((i, j));
            }
        }
    }
    None
}

/// Largest number of points on a common line.
fn max_collinear(points: &[Vector3<f64>]) -> usize {
    let n = points.len();
    if n < 3 {
        return n;
    }
    let mut best = 2;
    for i in 0..n {
        for j in i + 1..n {
            let u = points[j] - points[i];
            let count = 2 + (0..n)
                .filter(|&k| k != i && k != j)
                .filter(|&k| {
                    let v = points[k] - points[i];
                    u.cross(&v).norm() <= 1e-9 * u.norm().max(1.0) * v.norm().max(1.0)
                })
                .count();
            best = best.max(count);
        }
    }
    best
}

/// Degenerate configurations of the minimal problems. Centers and lines are
/// compared after removing their component along the line direction, which
/// the observations cannot see. Collinear centers are not degenerate.
pub fn is_degenerate_scene(instance: &SyntheticInstance, solver: SolverId) -> DegeneracyReport {
    let d = instance.line_direction();
    let centers = flattened(instance.gt_poses.iter().map(|p| p.center), &d);
    let points = flattened(instance.gt_lines.iter().map(|l| l.point), &d);
    if let Some((i, j)) = coincident_pair(&centers) {
        return DegeneracyReport { degenerate: true, reason: Some(format!("centers of cameras {i} and {j} coincide")) };
    }
    let collinear = max_collinear(&points);
    let limit = match solver {
        SolverId::E35 | SolverId::E44 => points.len(),
        SolverId::B37 | SolverId::D37 => 5,
    };
    if points.len() >= 2 && collinear >= limit {
        return DegeneracyReport { degenerate: true, reason: Some(format!("{collinear} lines are coplanar")) };
    }
    DegeneracyReport { degenerate: false, reason: None }
}
