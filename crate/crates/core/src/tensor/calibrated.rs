use std::sync::OnceLock;

use nalgebra::{DMatrix, Matrix2x3, Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::quadrifocal::dual_quadrifocal_from_points;
use super::{build_trifocal_system, decompose_trifocal_canonical, solve_homogeneous, trifocal_from_cameras, Tensor222};
use crate::geometry::{signed_distance, ReducedCamera};
use crate::linalg::{right_basis, rref};
use crate::{Error, Result};

const DEFAULT_SEED: u64 = 0x5ca1_ab1e;
const DEFAULT_SAMPLES: usize = 240;
const VIOLATION_TOL: f64 = 1e-6;
const RECOMPOSE_TOL: f64 = 1e-7;

/// Linear functionals vanishing on every tensor of calibrated cameras.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibratedConstraints {
    pub view_count: usize,
    /// Reduced row echelon form, one functional per row.
    pub functionals: Vec<Vec<f64>>,
}

impl CalibratedConstraints {
    /// Largest `|f . t| / |f|` over the functionals, for unit `t`.
    pub fn max_violation(&self, t: &[f64]) -> f64 {
        let nt = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.functionals
            .iter()
            .map(|f| {
                let nf = f.iter().map(|v| v * v).sum::<f64>().sqrt();
                f.iter().zip(t).map(|(a, b)| a * b).sum::<f64>().abs() / (nf * nt)
            })
            .fold(0.0, f64::max)
    }
}

fn random_calibrated_camera(rng: &mut ChaCha8Rng) -> Matrix2x3<f64> {
    let th: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let (s, c) = th.sin_cos();
    let k: f64 = rng.random_range(0.5..2.0);
    let t1: f64 = rng.sample(StandardNormal);
    let t2: f64 = rng.sample(StandardNormal);
    Matrix2x3::new(c, s, t1, -s, c, t2) * k
}

/// Tensor of a random calibrated configuration with `view_count` views.
pub(crate) fn random_calibrated_tensor(view_count: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if view_count == 3 {
        let [a, b, c] = [0; 3].map(|_| random_calibrated_camera(rng));
        trifocal_from_cameras(&a, &b, &c).entries().to_vec()
    } else {
        let ws = [0; 4].map(|_| Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        dual_quadrifocal_from_points(&ws).entries().to_vec()
    }
}

/// Constraints derived from the span of sampled calibrated tensors with the
/// default seed and sample count.
pub fn derive_calibrated_constraints(view_count: usize) -> Result<CalibratedConstraints> {
    derive_calibrated_constraints_seeded(view_count, DEFAULT_SEED, DEFAULT_SAMPLES)
}

/// Sample `samples` calibrated configurations, take the orthogonal
/// complement of their tensors' span and bring it to reduced row echelon
/// form. The complement has dimension 2 for three views and 11 for four.
pub fn derive_calibrated_constraints_seeded(view_count: usize, seed: u64, samples: usize) -> Result<CalibratedConstraints> {
    let (dim, expected) = match view_count {
        3 => (8, 2),
        4 => (16, 11),
        _ => return Err(Error::UnsupportedSetting(format!("{view_count} views"))),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DMatrix::zeros(samples, dim);
    for i in 0..samples {
        for (k, v) in random_calibrated_tensor(view_count, &mut rng).into_iter().enumerate() {
            m[(i, k)] = v;
        }
    }
    let (basis, sv) = right_basis(&m);
    let found = sv.iter().filter(|&&s| s < 1e-9 * sv[0]).count();
    if found != expected {
        return Err(Error::SpanDimensionMismatch { expected, found });
    }
    let mut comp = DMatrix::zeros(found, dim);
    for r in 0..found {
        for c in 0..dim {
            let v = basis[(c, dim - found + r)];
            comp[(r, c)] = if v.abs() < 1e-10 { 0.0 } else { v };
        }
    }
    let reduced = rref(comp, 1e-9);
    let functionals = reduced.row_iter().map(|r| r.iter().copied().collect()).collect();
    Ok(CalibratedConstraints { view_count, functionals })
}

/// Process-wide three-view constraints.
pub fn trifocal_constraints() -> &'static CalibratedConstraints {
    static C: OnceLock<CalibratedConstraints> = OnceLock::new();
    C.get_or_init(|| derive_calibrated_constraints(3).expect("three-view constraint span"))
}

/// Process-wide four-view constraints.
pub fn quadrifocal_constraints() -> &'static CalibratedConstraints {
    static C: OnceLock<CalibratedConstraints> = OnceLock::new();
    C.get_or_init(|| derive_calibrated_constraints(4).expect("four-view constraint span"))
}

pub(crate) fn stack_with_constraints(mut data: DMatrix<f64>, constraints: &CalibratedConstraints) -> DMatrix<f64> {
    let rows = data.nrows();
    let k = constraints.functionals.len();
    data = data.resize_vertically(rows + k, 0.0);
    for (r, f) in constraints.functionals.iter().enumerate() {
        for (c, v) in f.iter().enumerate() {
            data[(rows + r, c)] = *v;
        }
    }
    data
}

/// Trifocal tensor from gravity-corrected observations of (at least) five
/// lines plus the two calibrated constraints.
pub fn estimate_calibrated_trifocal(rows: &[[Vector2<f64>; 3]], constraints: &CalibratedConstraints) -> Result<Tensor222> {
    if rows.len() < 5 || constraints.view_count != 3 {
        return Err(Error::ShapeMismatch);
    }
    let system = stack_with_constraints(build_trifocal_system(rows), constraints);
    let v = solve_homogeneous(system)?;
    Ok(Tensor222::new(v.try_into().unwrap()))
}

/// Closest matrix whose left block is a scaled rotation.
fn project_calibrated(a: &Matrix2x3<f64>) -> Matrix2x3<f64> {
    let p = 0.5 * (a[(0, 0)] + a[(1, 1)]);
    let q = 0.5 * (a[(0, 1)] - a[(1, 0)]);
    Matrix2x3::new(p, q, a[(0, 2)], -q, p, a[(1, 2)])
}

/// Split a calibrated trifocal tensor into calibrated reduced cameras.
///
/// Each canonical (projective) triplet is upgraded by the homography whose
/// first two columns make all three left blocks scaled rotations; those
/// columns solve a 6x6 linear system. Returns one camera set per real
/// canonical triplet, at most two.
pub fn decompose_calibrated_trifocal(t: &Tensor222, constraints: &CalibratedConstraints) -> Result<Vec<[ReducedCamera; 3]>> {
    let violation = constraints.max_violation(t.entries());
    if violation > VIOLATION_TOL {
        return Err(Error::ConstraintViolation { residual: violation });
    }
    let mut out = Vec::new();
    for trip in decompose_trifocal_canonical(t)? {
        let cams = trip.cameras();
        let mut m = DMatrix::zeros(6, 6);
        for (i, a) in cams.iter().enumerate() {
            for l in 0..3 {
                // (A H)[0,0] - (A H)[1,1] and (A H)[0,1] + (A H)[1,0]
                m[(2 * i, l)] = a[(0, l)];
                m[(2 * i, 3 + l)] = -a[(1, l)];
                m[(2 * i + 1, 3 + l)] = a[(0, l)];
                m[(2 * i + 1, l)] = a[(1, l)];
            }
        }
        let (basis, _) = right_basis(&m);
        let h1 = Vector3::new(basis[(0, 5)], basis[(1, 5)], basis[(2, 5)]);
        let h2 = Vector3::new(basis[(3, 5)], basis[(4, 5)], basis[(5, 5)]);
        let h = Matrix3::from_columns(&[h1, h2, h1.cross(&h2)]);
        if h.determinant().abs() < 1e-14 {
            continue;
        }
        let upgraded = cams.map(|a| project_calibrated(&(a * h)));
        let re = trifocal_from_cameras(&upgraded[0], &upgraded[1], &upgraded[2]);
        if signed_distance(re.entries(), t.entries()) > RECOMPOSE_TOL {
            continue;
        }
        let set = [
            ReducedCamera::calibrated(upgraded[0])?,
            ReducedCamera::calibrated(upgraded[1])?,
            ReducedCamera::calibrated(upgraded[2])?,
        ];
        out.push(set);
    }
    if out.is_empty() {
        return Err(Error::DecompositionFailed("no calibrated upgrade reproduces the tensor".into()));
    }
    Ok(out)
}
