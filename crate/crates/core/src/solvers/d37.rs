//! Seven lines of unknown common direction in three cameras with known
//! gravity.
//!
//! The world frame is fixed by the first camera: `C_1 = 0` and its rotation
//! about the gravity axis is zero, so `R_i = R_v,i Ry(theta_i)` with
//! `theta_1 = 0`. The line direction is `L_d = R_d e2` with `R_d` a rotation
//! about an axis in the xz-plane. In the frame `R_d` the lines are vertical
//! and every camera is a reduced camera with rotation `R0_i R_v,i Ry(theta_i) R_d`.
//!
//! For fixed rotations the trifocal tensor is linear in the four remaining
//! center coordinates, so the center coordinates are eliminated by least
//! squares and only the four angles are searched, from a fixed set of
//! quasi-random starts.

use nalgebra::{Matrix2x3, Matrix3, SMatrix, SVector, Vector2, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{check_size, DReduction, PoseCandidate, SolverId, SolverOutput};
use crate::geometry::rotation::{exp_so3, rot_y, swing};
use crate::geometry::{reduced_camera_matrix, scanline_rotation, ObservationGrid};
use crate::geometry::signed_distance;
use crate::tensor::{build_trifocal_system, estimate_trifocal_dlt, MultiViewTensor, Tensor222, TensorData};
use crate::{Error, Result};

use super::incidence_rows;

const MAX_SOLUTIONS: usize = 48;
const ACCEPT_TOL: f64 = 1e-7;
const DEDUP_TOL: f64 = 1e-6;
const STALL_COST: f64 = 1e-12;
const STALL_DECREASE: f64 = 1e-3;
const STALL_ITERATIONS: usize = 10;
const OMEGA_RADIUS: f64 = std::f64::consts::FRAC_PI_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct D37Options {
    /// Number of quasi-random starts.
    pub starts: usize,
    /// Seed of the random shift applied to the start sequence.
    pub seed: u64,
    pub max_iterations: usize,
}

impl Default for D37Options {
    fn default() -> Self {
        Self { starts: 256, seed: 0, max_iterations: 1000 }
    }
}

type Params = Vector4<f64>;
type Residual = SVector<f64, 8>;

/// Fixed per-instance data: the estimated tensor and the rectified gravity
/// factor `R0_i R_v,i` of each camera.
struct Problem {
    t: Residual,
    gravity: [Matrix3<f64>; 3],
    rv: [Matrix3<f64>; 3],
}

fn raw_trifocal(a1: &Matrix2x3<f64>, a2: &Matrix2x3<f64>, a3: &Matrix2x3<f64>) -> Residual {
    let mut t = Residual::zeros();
    for k in 0..8 {
        t[k] = Matrix3::from_rows(&[a1.row(k >> 2), a2.row((k >> 1) & 1), a3.row(k & 1)]).determinant();
    }
    t
}

impl Problem {
    fn rd(x: &Params) -> Matrix3<f64> {
        exp_so3(&Vector3::new(x[0], 0.0, x[1]))
    }

    fn rectified(&self, x: &Params) -> [Matrix3<f64>; 3] {
        let rd = Self::rd(x);
        [
            self.gravity[0] * rd,
            self.gravity[1] * rot_y(x[2]) * rd,
            self.gravity[2] * rot_y(x[3]) * rd,
        ]
    }

    /// Columns: tensor for a unit step of `C'_2x, C'_2z, C'_3x, C'_3z`.
    ///
    /// With camera 1 at the origin, `T[a][b][c] = -t2[b] det(B1[a], B3[c])
    /// + t3[c] det(B1[a], B2[b])` where `B_i` is the left block and `t_i` the
    /// translation of reduced camera `i`.
    fn design(&self, x: &Params) -> SMatrix<f64, 8, 4> {
        let r = self.rectified(x);
        let block = |m: &Matrix3<f64>| [[-m[(0, 2)], m[(0, 0)]], [-m[(2, 2)], m[(2, 0)]]];
        // translation per unit center step: rows of (t_x, t_z) for C'x and C'z
        let unit = |m: &Matrix3<f64>| ([m[(0, 2)], m[(2, 2)]], [-m[(0, 0)], -m[(2, 0)]]);
        let det2 = |p: [f64; 2], q: [f64; 2]| p[0] * q[1] - p[1] * q[0];
        let (b1, b2, b3) = (block(&r[0]), block(&r[1]), block(&r[2]));
        let (k2x, k2z) = unit(&r[1]);
        let (k3x, k3z) = unit(&r[2]);
        let mut m = SMatrix::<f64, 8, 4>::zeros();
        for k in 0..8 {
            let (a, b, c) = (k >> 2, (k >> 1) & 1, k & 1);
            let d13 = det2(b1[a], b3[c]);
            let d12 = det2(b1[a], b2[b]);
            m[(k, 0)] = -k2x[b] * d13;
            m[(k, 1)] = -k2z[b] * d13;
            m[(k, 2)] = k3x[c] * d12;
            m[(k, 3)] = k3z[c] * d12;
        }
        m
    }

    /// Centers minimizing the tensor mismatch for fixed angles, and the
    /// remaining residual.
    fn project(&self, x: &Params) -> (Vector4<f64>, Residual) {
        let m = self.design(x);
        let qr = m.qr();
        let q = qr.q();
        let qt = q.transpose() * self.t;
        let c = qr.r().solve_upper_triangular(&qt).unwrap_or_else(Vector4::zeros);
        (c, self.t - q * qt)
    }

    fn residual(&self, x: &Params) -> Residual {
        self.project(x).1
    }

    fn jacobian(&self, x: &Params, r: &Residual) -> SMatrix<f64, 8, 4> {
        let mut j = SMatrix::<f64, 8, 4>::zeros();
        for k in 0..4 {
            let h = 1e-7 * x[k].abs().max(1.0);
            let mut xp = *x;
            xp[k] += h;
            j.set_column(k, &((self.residual(&xp) - r) / h));
        }
        j
    }

    /// Levenberg-Marquardt from `x0`.
    fn refine(&self, x0: Params, max_iterations: usize) -> (Params, f64) {
        let mut x = x0;
        let mut r = self.residual(&x);
        let mut cost = r.norm_squared();
        let mut lambda = 1e-3;
        let mut stalled = 0;
        for _ in 0..max_iterations {
            if cost < 1e-30 {
                break;
            }
            let before = cost;
            let j = self.jacobian(&x, &r);
            let jtj = j.transpose() * j;
            let g = j.transpose() * r;
            let mut improved = false;
            for _ in 0..10 {
                let mut a = jtj;
                for k in 0..4 {
                    a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
                }
                let Some(step) = a.cholesky().map(|c| c.solve(&(-g))) else {
                    lambda *= 10.0;
                    continue;
                };
                let xn = x + step;
                let rn = self.residual(&xn);
                let cn = rn.norm_squared();
                if cn < cost {
                    let small = step.norm() < 1e-15 * (1.0 + x.norm());
                    x = xn;
                    r = rn;
                    cost = cn;
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = !small;
                    break;
                }
                lambda *= 10.0;
            }
            if !improved {
                break;
            }
            // slow progress far from zero: a local minimum
            if cost > STALL_COST && cost > (1.0 - STALL_DECREASE) * before {
                stalled += 1;
                if stalled >= STALL_ITERATIONS {
                    break;
                }
            } else {
                stalled = 0;
            }
        }
        (x, cost.sqrt())
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let (mut f, mut out) = (inv, 0.0);
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

/// Shifted Halton points mapped to the parameter box.
fn starts(opts: &D37Options) -> Vec<Params> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let shift: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>());
    let pi = std::f64::consts::PI;
    (0..opts.starts as u64)
        .map(|i| {
            let u: [f64; 4] = std::array::from_fn(|k| (radical_inverse(i + 1, [2, 3, 5, 7][k]) + shift[k]).fract());
            // area-uniform on the disk of line directions up to sign
            let (r, phi) = (OMEGA_RADIUS * u[0].sqrt(), 2.0 * pi * u[1]);
            Params::new(
                r * phi.cos(),
                r * phi.sin(),
                (2.0 * u[2] - 1.0) * pi,
                (2.0 * u[3] - 1.0) * pi,
            )
        })
        .collect()
}

fn wrap(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let w = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if w >= std::f64::consts::PI { w - two_pi } else { w }
}

/// Physical signature used for deduplication: both yaw angles and the line
/// direction up to sign.
fn signature(x: &Params) -> [f64; 5] {
    let mut ld = Problem::rd(x) * Vector3::y();
    if ld.y < 0.0 || (ld.y == 0.0 && ld.x < 0.0) {
        ld = -ld;
    }
    [wrap(x[2]), wrap(x[3]), ld.x, ld.y, ld.z]
}

fn same(a: &[f64; 5], b: &[f64; 5]) -> bool {
    let da = wrap(a[0] - b[0]).abs().max(wrap(a[1] - b[1]).abs());
    let dl = (a[2] - b[2]).abs().max((a[3] - b[3]).abs()).max((a[4] - b[4]).abs());
    da < DEDUP_TOL && dl < DEDUP_TOL
}

pub fn solve_d37(grid: &ObservationGrid) -> Result<SolverOutput> {
    solve_d37_with(grid, &D37Options::default())
}

pub fn solve_d37_with(grid: &ObservationGrid, opts: &D37Options) -> Result<SolverOutput> {
    check_size(SolverId::D37, grid)?;
    let tensor = estimate_trifocal_dlt(&build_trifocal_system(&incidence_rows(grid)?))?;
    let mut rv = [Matrix3::identity(); 3];
    let mut gravity = [Matrix3::identity(); 3];
    for i in 0..3 {
        let g = grid.gravity(i)?;
        let n = g.norm();
        if !(n > 0.0) {
            return Err(Error::GravitySingular);
        }
        rv[i] = swing(&Vector3::y(), &(g / n), 1e-9).ok_or(Error::GravitySingular)?;
        gravity[i] = scanline_rotation(grid.scanline_y(i)) * rv[i];
    }
    let problem = Problem { t: Residual::from_column_slice(tensor.entries()), gravity, rv };

    let refined: Vec<(Params, f64)> = starts(opts)
        .into_par_iter()
        .map(|x0| problem.refine(x0, opts.max_iterations))
        .collect();

    let mut seen: Vec<[f64; 5]> = Vec::new();
    let mut candidates = Vec::new();
    for (x, res) in refined {
        if !(res < ACCEPT_TOL) {
            continue;
        }
        let sig = signature(&x);
        if seen.iter().any(|s| same(s, &sig)) {
            continue;
        }
        let (c, _) = problem.project(&x);
        let r = problem.rectified(&x);
        let rebuilt = raw_trifocal(
            &reduced_camera_matrix(&r[0], 0.0, 0.0),
            &reduced_camera_matrix(&r[1], c[0], c[1]),
            &reduced_camera_matrix(&r[2], c[2], c[3]),
        );
        let rebuilt = Tensor222::new(rebuilt.as_slice().try_into().unwrap());
        if !(signed_distance(rebuilt.entries(), tensor.entries()) < ACCEPT_TOL) {
            continue;
        }
        seen.push(sig);
        if candidates.len() + 2 > MAX_SOLUTIONS {
            break;
        }
        // the tensor is linear in the centers, so their mirror image fits too
        for sign in [1.0, -1.0] {
            candidates.push(build_candidate(&problem, &x, &(c * sign), grid));
        }
    }
    if candidates.is_empty() {
        return Err(Error::NoRealSolution);
    }
    Ok(SolverOutput {
        solver: SolverId::D37,
        tensor: MultiViewTensor::new(TensorData::Trifocal(tensor), Some(SolverId::D37)),
        candidates,
        canonical: Vec::new(),
    })
}

fn build_candidate(problem: &Problem, x: &Params, c: &Vector4<f64>, grid: &ObservationGrid) -> PoseCandidate {
    let rd = Problem::rd(x);
    let thetas = [0.0, x[2], x[3]];
    let aligned = [Vector2::zeros(), Vector2::new(c[0], c[1]), Vector2::new(c[2], c[3])];
    let rectified = problem.rectified(x);
    let mut poses = Vec::with_capacity(3);
    let mut ry = Vec::with_capacity(3);
    let mut td = Vec::with_capacity(3);
    for i in 0..3 {
        let yaw = rot_y(thetas[i]);
        let center = rd * Vector3::new(aligned[i].x, 0.0, aligned[i].y);
        poses.push(crate::geometry::CameraPose::new(problem.rv[i] * yaw, center, grid.scanline_y(i)));
        let a = reduced_camera_matrix(&rectified[i], aligned[i].x, aligned[i].y);
        ry.push(yaw);
        td.push(Vector2::new(a[(0, 2)], a[(1, 2)]));
    }
    PoseCandidate {
        poses,
        line_direction: rd * Vector3::y(),
        reduction: Some(DReduction { rd, ry, td }),
    }
}
