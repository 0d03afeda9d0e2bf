//! Jacobian rank test at a random solution.
//!
//! A random scene is projected to get observations that it satisfies
//! exactly. The unknowns are local perturbations of the scene, with the
//! gauge removed by pinning coordinates. The problem is minimal when the
//! square Jacobian of the incidence equations is invertible there.

use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{table_degree, MinimalityVerdict, ProblemSpec, Setting};
use crate::geometry::rotation::quat_to_matrix;
#[cfg(test)]
use crate::geometry::{
    incidence_residual,
    rotation::{exp_so3, rot_y},
};
use crate::geometry::{
    project_line_to_scanline, reduce_parallel, reduced_camera_from_pose, CameraPose, Line3D, ScanlineObservation,
};
use crate::linalg::mix_seed;
use crate::{Error, Result};

const RANK_RATIO: f64 = 1e-8;
const ATTEMPTS: u64 = 5;
const DRAWS_PER_ATTEMPT: usize = 20;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MinimalityOptions {
    /// Release this many gauge pins (test hook: the Jacobian then has a
    /// nullspace and the problem must be reported as not minimal).
    pub released_pins: usize,
}

/// A perturbation direction of the scene.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Var {
    /// `R <- R exp([t e_k]_x)`.
    Rot(usize, usize),
    /// `R <- R Ry(t)`.
    Yaw(usize),
    Center(usize, Vector3<f64>),
    LinePoint(usize, Vector3<f64>),
    LineDir(usize, Vector3<f64>),
    /// Common direction of all lines.
    SharedDir(Vector3<f64>),
}

struct Scene {
    poses: Vec<CameraPose>,
    lines: Vec<Line3D>,
    /// `[x, y, 1]` per (camera, line), row-major by camera.
    points: Vec<Vector3<f64>>,
}

impl Scene {
    fn point(&self, i: usize, j: usize) -> &Vector3<f64> {
        &self.points[i * self.lines.len() + j]
    }

    #[cfg(test)]
    fn residuals(&self) -> Vec<f64> {
        let mut r = Vec::with_capacity(self.points.len());
        for (i, pose) in self.poses.iter().enumerate() {
            for (j, line) in self.lines.iter().enumerate() {
                r.push(incidence_residual(pose, line, self.point(i, j)));
            }
        }
        r
    }

    #[cfg(test)]
    fn perturbed(&self, var: &Var, t: f64) -> Scene {
        let mut poses = self.poses.clone();
        let mut lines = self.lines.clone();
        match *var {
            Var::Rot(i, k) => {
                let mut w = Vector3::zeros();
                w[k] = t;
                poses[i].rotation *= exp_so3(&w);
            }
            Var::Yaw(i) => poses[i].rotation *= rot_y(t),
            Var::Center(i, d) => poses[i].center += d * t,
            Var::LinePoint(j, d) => lines[j].point += d * t,
            // directions are left unnormalized: the residual is linear in them
            Var::LineDir(j, d) => lines[j].direction += d * t,
            Var::SharedDir(d) => lines.iter_mut().for_each(|l| l.direction += d * t),
        }
        Scene { poses, lines, points: self.points.clone() }
    }

    /// Analytic derivative of residual `(i, j)` along `var`.
    fn derivative(&self, i: usize, j: usize, var: &Var) -> f64 {
        let (pose, line) = (&self.poses[i], &self.lines[j]);
        let g = pose.rotation.transpose() * self.point(i, j);
        let rel = line.point - pose.center;
        let w = line.direction.cross(&rel);
        match *var {
            Var::Rot(c, k) if c == i => w.cross(&g)[k],
            Var::Yaw(c) if c == i => w.cross(&g).y,
            Var::Center(c, d) if c == i => -g.cross(&line.direction).dot(&d),
            Var::LinePoint(l, d) if l == j => g.cross(&line.direction).dot(&d),
            Var::LineDir(l, d) if l == j => rel.cross(&g).dot(&d),
            Var::SharedDir(d) => rel.cross(&g).dot(&d),
            _ => 0.0,
        }
    }

    fn jacobian(&self, vars: &[Var]) -> DMatrix<f64> {
        let (m, n) = (self.poses.len(), self.lines.len());
        DMatrix::from_fn(m * n, vars.len(), |r, c| self.derivative(r / n, r % n, &vars[c]))
    }

    #[cfg(test)]
    fn jacobian_fd(&self, vars: &[Var], h: f64) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.points.len(), vars.len());
        for (c, v) in vars.iter().enumerate() {
            let plus = self.perturbed(v, h).residuals();
            let minus = self.perturbed(v, -h).residuals();
            for r in 0..plus.len() {
                out[(r, c)] = (plus[r] - minus[r]) / (2.0 * h);
            }
        }
        out
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> nalgebra::Matrix3<f64> {
    let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    quat_to_matrix(q.map(|v| v / n))
}

fn gaussian3(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Two unit vectors completing `d` to an orthonormal frame.
fn tangents(d: &Vector3<f64>) -> [Vector3<f64>; 2] {
    let a = if d.x.abs() < 0.9 { Vector3::x() } else { Vector3::z() };
    let t1 = d.cross(&a).normalize();
    [t1, d.cross(&t1).normalize()]
}

fn draw_scene(spec: &ProblemSpec, rng: &mut ChaCha8Rng) -> Option<Scene> {
    let shared = match spec.setting {
        Setting::B | Setting::E => Some(Vector3::y()),
        Setting::D => Some(Vector3::new(rng.sample(StandardNormal), 1.0, rng.sample(StandardNormal)).normalize()),
        Setting::A | Setting::C => None,
    };
    let poses: Vec<CameraPose> = (0..spec.cameras)
        .map(|_| CameraPose::new(random_rotation(rng), gaussian3(rng), rng.random_range(-1.0..1.0)))
        .collect();
    let lines: Vec<Line3D> = (0..spec.lines)
        .map(|_| {
            let p = gaussian3(rng) + Vector3::new(0.0, 0.0, 5.0);
            let d = shared.unwrap_or_else(|| gaussian3(rng).normalize());
            // keep the point closest to the origin, so moving it along the
            // line is not a free direction of the parameterization
            Line3D::new(p - d * d.dot(&p), d)
        })
        .collect();
    let mut points = Vec::with_capacity(spec.cameras * spec.lines);
    for pose in &poses {
        for line in &lines {
            let x = project_line_to_scanline(pose, line, pose.scanline_y).ok()?;
            if !x.is_finite() || x.abs() > 1e4 {
                return None;
            }
            points.push(Vector3::new(x, pose.scanline_y, 1.0));
        }
    }
    Some(Scene { poses, lines, points })
}

/// Unknowns and gauge pins of the metric settings. Pins come last so that
/// releasing them is a truncation.
fn metric_vars(spec: &ProblemSpec, scene: &Scene) -> (Vec<Var>, Vec<Var>) {
    let mut vars = Vec::new();
    let mut pins = Vec::new();
    let axes = [Vector3::x(), Vector3::y(), Vector3::z()];
    let gravity = matches!(spec.setting, Setting::C | Setting::D | Setting::E);
    let parallel = matches!(spec.setting, Setting::D | Setting::E);
    let shared = scene.lines[0].direction;
    let center_dirs: Vec<Vector3<f64>> = if parallel { tangents(&shared).to_vec() } else { axes.to_vec() };
    // scale: the coordinate of C_2 - C_1 with largest magnitude
    let baseline = scene.poses[1].center - scene.poses[0].center;
    let scale_dir = *center_dirs
        .iter()
        .max_by(|a, b| a.dot(&baseline).abs().total_cmp(&b.dot(&baseline).abs()))
        .unwrap();

    for i in 0..spec.cameras {
        if gravity {
            if i == 0 { pins.push(Var::Yaw(0)) } else { vars.push(Var::Yaw(i)) }
        } else {
            for k in 0..3 {
                if i == 0 { pins.push(Var::Rot(0, k)) } else { vars.push(Var::Rot(i, k)) }
            }
        }
        for d in &center_dirs {
            let v = Var::Center(i, *d);
            if i == 0 || (i == 1 && *d == scale_dir) { pins.push(v) } else { vars.push(v) }
        }
    }
    if spec.setting == Setting::D {
        for t in tangents(&shared) {
            vars.push(Var::SharedDir(t));
        }
    }
    for (j, line) in scene.lines.iter().enumerate() {
        let t = tangents(&line.direction);
        for d in t {
            vars.push(Var::LinePoint(j, d));
        }
        if !parallel {
            for d in t {
                vars.push(Var::LineDir(j, d));
            }
        }
    }
    (vars, pins)
}

/// `sigma_min / sigma_max` over all columns (zero when there are more
/// columns than rows).
fn condition(j: &DMatrix<f64>) -> f64 {
    let (_, sv) = crate::linalg::right_basis(j);
    let max = sv[0];
    if !(max > 0.0) {
        return 0.0;
    }
    sv[sv.len() - 1] / max
}

/// Jacobian of the metric settings with `released` pins added back as
/// unknowns.
fn metric_jacobian(spec: &ProblemSpec, scene: &Scene, released: usize) -> DMatrix<f64> {
    let (mut vars, pins) = metric_vars(spec, scene);
    vars.extend(pins.iter().rev().take(released));
    scene.jacobian(&vars)
}

/// Setting B in the reduced model `u^T A_i L_j = 0`: unknowns are the six
/// entries of every `A_i` and three of every `L_j`. Scales and the 3x3
/// projective transformation form the gauge; column-pivoted QR of the gauge
/// generators picks the entries to pin.
fn reduced_jacobian(spec: &ProblemSpec, scene: &Scene, released: usize) -> Result<DMatrix<f64>> {
    let (m, n) = (spec.cameras, spec.lines);
    let cams: Vec<_> = scene.poses.iter().map(|p| *reduced_camera_from_pose(p).matrix()).collect();
    let pts: Vec<Vector3<f64>> = scene.lines.iter().map(|l| Vector3::new(l.point.x, l.point.z, 1.0)).collect();
    let cols = 6 * m + 3 * n;
    let mut full = DMatrix::zeros(m * n, cols);
    for i in 0..m {
        for j in 0..n {
            let p = scene.point(i, j);
            let obs = ScanlineObservation { camera_index: i, line_index: j, x: p.x, scanline_y: p.y, gravity: None };
            let u = reduce_parallel(&obs)?.u;
            let r = i * n + j;
            for a in 0..2 {
                for b in 0..3 {
                    full[(r, 6 * i + 3 * a + b)] = u[a] * pts[j][b];
                }
            }
            let ua = u.transpose() * cams[i];
            for b in 0..3 {
                full[(r, 6 * m + 3 * j + b)] = ua[b];
            }
        }
    }
    // gauge generators as rows
    let mut gens = DMatrix::zeros(m + n + 9, cols);
    for i in 0..m {
        for k in 0..6 {
            gens[(i, 6 * i + k)] = cams[i][(k / 3, k % 3)];
        }
    }
    for j in 0..n {
        for b in 0..3 {
            gens[(m + j, 6 * m + 3 * j + b)] = pts[j][b];
        }
    }
    for e in 0..9 {
        let mut h = nalgebra::Matrix3::zeros();
        h[(e / 3, e % 3)] = 1.0;
        let row = m + n + e;
        for i in 0..m {
            let d = -cams[i] * h;
            for k in 0..6 {
                gens[(row, 6 * i + k)] = d[(k / 3, k % 3)];
            }
        }
        for j in 0..n {
            let d = h * pts[j];
            for b in 0..3 {
                gens[(row, 6 * m + 3 * j + b)] = d[b];
            }
        }
    }
    let gauge_dim = m + n + 8;
    let pinned = pivot_columns(&gens, gauge_dim);
    let keep = pinned.len().saturating_sub(released);
    let pinned = &pinned[..keep];
    let free: Vec<usize> = (0..cols).filter(|c| !pinned.contains(c)).collect();
    Ok(full.select_columns(free.iter()))
}

/// Indices of `count` columns chosen greedily by largest residual norm
/// (column-pivoted Gram-Schmidt).
fn pivot_columns(m: &DMatrix<f64>, count: usize) -> Vec<usize> {
    let mut work = m.clone();
    let mut chosen = Vec::with_capacity(count);
    for _ in 0..count {
        let (best, norm) = (0..work.ncols())
            .filter(|c| !chosen.contains(c))
            .map(|c| (c, work.column(c).norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if norm < 1e-12 {
            break;
        }
        chosen.push(best);
        let q = work.column(best) / norm;
        for c in 0..work.ncols() {
            let proj = q.dot(&work.column(c));
            let mut col = work.column_mut(c);
            col.axpy(-proj, &q, 1.0);
        }
    }
    chosen
}

fn attempt(spec: &ProblemSpec, seed: u64, opts: &MinimalityOptions) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = (0..DRAWS_PER_ATTEMPT)
        .find_map(|_| draw_scene(spec, &mut rng))
        .ok_or(Error::InstanceGenerationFailed)?;
    let j = match spec.setting {
        Setting::B => reduced_jacobian(spec, &scene, opts.released_pins)?,
        _ => metric_jacobian(spec, &scene, opts.released_pins),
    };
    Ok(condition(&j))
}

pub fn minimality_check(spec: &ProblemSpec, seed: u64) -> Result<MinimalityVerdict> {
    minimality_check_with(spec, seed, &MinimalityOptions::default())
}

/// Minimal when some instance among up to five seeds has a Jacobian with
/// `sigma_min / sigma_max > 1e-8`.
pub fn minimality_check_with(spec: &ProblemSpec, seed: u64, opts: &MinimalityOptions) -> Result<MinimalityVerdict> {
    let balanced = spec.is_balanced();
    let mut verdict = MinimalityVerdict {
        spec: *spec,
        balanced,
        minimal: false,
        jacobian_condition: f64::NAN,
        table_degree: table_degree(spec),
    };
    if !balanced || spec.cameras < 2 || spec.lines < 1 {
        return Ok(verdict);
    }
    let mut best = None::<f64>;
    for k in 0..ATTEMPTS {
        let Ok(c) = attempt(spec, mix_seed(seed, k), opts) else { continue };
        best = Some(best.map_or(c, |b: f64| b.max(c)));
        if c > RANK_RATIO {
            break;
        }
    }
    let best = best.ok_or(Error::InstanceGenerationFailed)?;
    verdict.jacobian_condition = best;
    verdict.minimal = best > RANK_RATIO;
    Ok(verdict)
}
