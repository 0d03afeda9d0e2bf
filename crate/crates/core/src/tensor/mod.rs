//! 2x2x2 trifocal and dual quadrifocal tensors of reduced (1D) cameras:
//! construction, linear estimation and decomposition.

mod calibrated;
mod canonical;
mod quadrifocal;

use nalgebra::{DMatrix, Matrix2x3, Matrix3, Vector2};

use crate::linalg::{normalize_rows, null_vector};
use crate::solvers::SolverId;
use crate::{Error, Result};

pub use calibrated::{
    decompose_calibrated_trifocal, derive_calibrated_constraints, derive_calibrated_constraints_seeded,
    estimate_calibrated_trifocal, quadrifocal_constraints, trifocal_constraints, CalibratedConstraints,
};
pub use canonical::{decompose_trifocal_canonical, CanonicalTriplet};
pub use quadrifocal::{
    decompose_dual_quadrifocal, dual_camera, dual_quadrifocal_from_points, estimate_dual_quadrifocal,
    quadrilinear_row, resect_calibrated_camera,
};

/// Threshold on `sigma_(k-1) / sigma_1` below which a linear system is
/// treated as having an ambiguous nullspace.
pub const RANK_TOL: f64 = 1e-12;

/// Entries `T[a][b][c]` at index `4a + 2b + c`, unit Frobenius norm.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor222 {
    t: [f64; 8],
}

impl Tensor222 {
    /// Normalizes to unit norm (a zero input stays zero).
    pub fn new(t: [f64; 8]) -> Self {
        Self { t: normalized(t) }
    }

    pub fn entries(&self) -> &[f64; 8] {
        &self.t
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.t[4 * a + 2 * b + c]
    }
}

/// Entries `Q[a][b][c][d]` at index `8a + 4b + 2c + d`, unit Frobenius norm.
#[derive(Clone, Debug, PartialEq)]
pub struct DualQuadTensor {
    t: [f64; 16],
}

impl DualQuadTensor {
    pub fn new(t: [f64; 16]) -> Self {
        Self { t: normalized(t) }
    }

    pub fn entries(&self) -> &[f64; 16] {
        &self.t
    }
}

fn normalized<const N: usize>(mut t: [f64; N]) -> [f64; N] {
    let n = t.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        for v in t.iter_mut() {
            *v /= n;
        }
    }
    t
}

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    Trifocal(Tensor222),
    DualQuadrifocal(DualQuadTensor),
}

/// A tensor together with the solver that estimated it (if any).
#[derive(Clone, Debug, PartialEq)]
pub struct MultiViewTensor {
    pub data: TensorData,
    pub source: Option<SolverId>,
}

impl MultiViewTensor {
    pub fn new(data: TensorData, source: Option<SolverId>) -> Self {
        Self { data, source }
    }

    pub fn entries(&self) -> &[f64] {
        match &self.data {
            TensorData::Trifocal(t) => t.entries(),
            TensorData::DualQuadrifocal(q) => q.entries(),
        }
    }
}

/// `T[a][b][c] = det[A1(a,:); A2(b,:); A3(c,:)]`, so that
/// `sum T[a][b][c] u1[a] u2[b] u3[c] = 0` for incidence-form observations.
pub fn trifocal_from_cameras(a1: &Matrix2x3<f64>, a2: &Matrix2x3<f64>, a3: &Matrix2x3<f64>) -> Tensor222 {
    let mut t = [0.0; 8];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                let m = Matrix3::from_rows(&[a1.row(a), a2.row(b), a3.row(c)]);
                t[4 * a + 2 * b + c] = m.determinant();
            }
        }
    }
    Tensor222::new(t)
}

/// Lexicographic trilinear monomials `u1[a] u2[b] u3[c]`.
pub fn trilinear_row(u1: &Vector2<f64>, u2: &Vector2<f64>, u3: &Vector2<f64>) -> [f64; 8] {
    let mut r = [0.0; 8];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                r[4 * a + 2 * b + c] = u1[a] * u2[b] * u3[c];
            }
        }
    }
    r
}

/// One row per line from the three observation vectors of that line.
pub fn build_trifocal_system(rows: &[[Vector2<f64>; 3]]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows.len(), 8);
    for (i, [u1, u2, u3]) in rows.iter().enumerate() {
        for (k, v) in trilinear_row(u1, u2, u3).iter().enumerate() {
            m[(i, k)] = *v;
        }
    }
    m
}

/// Null vector of a row-normalized linear system, with the rank test on
/// the two smallest singular values.
pub(crate) fn solve_homogeneous(mut system: DMatrix<f64>) -> Result<Vec<f64>> {
    let cols = system.ncols();
    normalize_rows(&mut system);
    let (v, sv) = null_vector(&system);
    let ratio = sv[cols - 2] / sv[0];
    if !(ratio >= RANK_TOL) {
        return Err(Error::RankDeficient { ratio });
    }
    Ok(v.iter().copied().collect())
}

/// Least-squares null vector of the trifocal system.
pub fn estimate_trifocal_dlt(system: &DMatrix<f64>) -> Result<Tensor222> {
    if system.ncols() != 8 || system.nrows() < 7 {
        return Err(Error::ShapeMismatch);
    }
    let v = solve_homogeneous(system.clone())?;
    Ok(Tensor222::new(v.try_into().unwrap()))
}
