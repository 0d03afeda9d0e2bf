use nalgebra::{Matrix2, Vector3};

use super::reduce::scanline_rotation;
use super::rotation::{quat_to_matrix, swing_quat};
use super::RotationFactors;
use crate::{Error, Result};

const ANTIPODAL_TOL: f64 = 1e-9;

/// Factor `R_0 R_v = R_a R_b` for a camera with measured `gravity`.
///
/// `R_v` is the xz-axis rotation taking `e2` to `gravity`; `R_a` is the
/// xz-axis rotation taking `e2` to `R_0 gravity` and `R_b = R_a^T R_0 R_v` is
/// then a y rotation. Also returns the 2x2 matrix `A_a` that maps the
/// calibrated reduced camera to the gravity-aligned one.
pub fn gravity_factorization(gravity: &Vector3<f64>, scanline_y: f64) -> Result<(RotationFactors, Matrix2<f64>)> {
    let g = gravity.normalize();
    let e2 = Vector3::y();
    let qv = swing_quat(&e2, &g, ANTIPODAL_TOL).ok_or(Error::GravitySingular)?;
    let rv = quat_to_matrix(qv);
    let r0 = scanline_rotation(scanline_y);
    let w = r0 * g;
    let qa = swing_quat(&e2, &w, ANTIPODAL_TOL).ok_or(Error::GravitySingular)?;
    let ra = quat_to_matrix(qa);
    let rb = ra.transpose() * r0 * rv;
    let [_, qx, _, qz] = qa;
    let aa = Matrix2::new(-2.0 * qx * qz, 1.0 - 2.0 * qz * qz, -(1.0 - 2.0 * qx * qx), 2.0 * qx * qz);
    Ok((RotationFactors { r0, rv, ra, rb }, aa))
}
