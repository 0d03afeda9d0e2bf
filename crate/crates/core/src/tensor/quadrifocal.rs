//! Dual quadrifocal tensor of four vertical lines.
//!
//! For lines parallel to the gravity axis a calibrated reduced camera
//! `[c s t1; -s c t2]` is dual to the point `X = (c, -s, -t1, -t2)`, and the
//! line at xz-position `(a, b)` is dual to the 2x4 camera
//! `D = [b a 0 -1; -a b 1 0]`: `D X` is proportional to the camera's
//! gravity-corrected observation `u''`. With `d = (u''_2, -u''_1)` the four
//! observations of one camera satisfy `d_j^T D_j X = 0`, so the determinant
//! of the stacked rows vanishes. That determinant is multilinear in the `d_j`
//! with coefficients `Q[a][b][c][d] = det[D1(a); D2(b); D3(c); D4(d)]`.

use nalgebra::{DMatrix, Matrix2x3, Matrix2x4, Matrix4, Vector2, Vector4};

use super::calibrated::stack_with_constraints;
use super::{solve_homogeneous, CalibratedConstraints, DualQuadTensor, RANK_TOL};
use crate::geometry::signed_distance;
use crate::linalg::quadratic_roots;
use crate::{Error, Result};

const RECOMPOSE_TOL: f64 = 1e-7;
const VIOLATION_TOL: f64 = 1e-6;

pub fn dual_camera(w: &Vector2<f64>) -> Matrix2x4<f64> {
    let (a, b) = (w.x, w.y);
    Matrix2x4::new(b, a, 0.0, -1.0, -a, b, 1.0, 0.0)
}

pub fn dual_quadrifocal_from_points(ws: &[Vector2<f64>; 4]) -> DualQuadTensor {
    let d = ws.map(|w| dual_camera(&w));
    let mut t = [0.0; 16];
    for (k, v) in t.iter_mut().enumerate() {
        let m = Matrix4::from_rows(&[
            d[0].row(k >> 3),
            d[1].row((k >> 2) & 1),
            d[2].row((k >> 1) & 1),
            d[3].row(k & 1),
        ]);
        *v = m.determinant();
    }
    DualQuadTensor::new(t)
}

/// Lexicographic quadrilinear monomials of the four direction vectors seen
/// by one camera.
pub fn quadrilinear_row(d: &[Vector2<f64>; 4]) -> [f64; 16] {
    let mut r = [0.0; 16];
    for (k, v) in r.iter_mut().enumerate() {
        *v = d[0][k >> 3] * d[1][(k >> 2) & 1] * d[2][(k >> 1) & 1] * d[3][k & 1];
    }
    r
}

/// Tensor from one row of direction vectors per camera plus the eleven
/// calibrated constraints.
pub fn estimate_dual_quadrifocal(rows: &[[Vector2<f64>; 4]], constraints: &CalibratedConstraints) -> Result<DualQuadTensor> {
    if rows.len() < 4 || constraints.view_count != 4 {
        return Err(Error::ShapeMismatch);
    }
    let mut data = DMatrix::zeros(rows.len(), 16);
    for (i, r) in rows.iter().enumerate() {
        for (k, v) in quadrilinear_row(r).iter().enumerate() {
            data[(i, k)] = *v;
        }
    }
    let v = solve_homogeneous(stack_with_constraints(data, constraints))?;
    Ok(DualQuadTensor::new(v.try_into().unwrap()))
}

/// Line positions consistent with `q`, in the gauge where line 1 is at the
/// origin and line 2 at `(1, 0)`. Generic tensors give two configurations.
///
/// In this gauge the entries 0001, 0010, 0011, 0100, 0101 are
/// `-b3, b4, a3 - a4, a4 b3 - a3 b4, a3 a4 + b3 b4 - a3` up to a common
/// factor, which reduces to intersecting a line with a conic in
/// `(a4, scale)`.
pub fn decompose_dual_quadrifocal(q: &DualQuadTensor, constraints: &CalibratedConstraints) -> Result<Vec<[Vector2<f64>; 4]>> {
    let violation = constraints.max_violation(q.entries());
    if violation > VIOLATION_TOL {
        return Err(Error::ConstraintViolation { residual: violation });
    }
    let e = q.entries();
    let (q1, q2, q3, q4, q5) = (e[1], e[2], e[3], e[4], e[5]);
    // unit-norm tensor; exact coplanar data leaves ~1e-10 here
    if q1.abs() + q2.abs() < 1e-8 {
        return Err(Error::DegenerateConfiguration("lines are coplanar".into()));
    }
    // (q1 + q2) a4 + q2 q3 k = -q4
    let n = Vector2::new(q1 + q2, q2 * q3);
    let nn = n.norm_squared();
    if nn < 1e-20 {
        return Err(Error::DegenerateConfiguration("line positions are not determined".into()));
    }
    let p = -q4 * n / nn;
    let d = Vector2::new(-n.y, n.x);
    // a4^2 + q3 a4 k - q1 q2 k^2 - a4 - q3 k - q5 k = 0 along p + s d
    let (pa, pk, da, dk) = (p.x, p.y, d.x, d.y);
    let ca = da * da + q3 * da * dk - q1 * q2 * dk * dk;
    let cb = 2.0 * pa * da + q3 * (pa * dk + pk * da) - 2.0 * q1 * q2 * pk * dk - da - (q3 + q5) * dk;
    let cc = pa * pa + q3 * pa * pk - q1 * q2 * pk * pk - pa - (q3 + q5) * pk;
    let clamp = 1e-8 * (cb * cb + (4.0 * ca * cc).abs());
    let roots = quadratic_roots(ca, cb, cc, clamp).map_err(|disc| Error::ComplexRoots { discriminant: disc })?;
    let mut out = Vec::new();
    for s in roots {
        let a4 = pa + s * da;
        let k = pk + s * dk;
        if k.abs() < 1e-12 {
            continue;
        }
        let ws = [
            Vector2::zeros(),
            Vector2::new(1.0, 0.0),
            Vector2::new(a4 + k * q3, -k * q1),
            Vector2::new(a4, k * q2),
        ];
        let re = dual_quadrifocal_from_points(&ws);
        if signed_distance(re.entries(), e) <= RECOMPOSE_TOL {
            out.push(ws);
        }
    }
    if out.is_empty() {
        return Err(Error::DecompositionFailed("no line configuration reproduces the tensor".into()));
    }
    Ok(out)
}

/// Calibrated reduced camera observing the lines at `ws` along the
/// directions `dirs` (perpendicular to the gravity-corrected observations).
pub fn resect_calibrated_camera(ws: &[Vector2<f64>; 4], dirs: &[Vector2<f64>; 4]) -> Result<Matrix2x3<f64>> {
    let mut m = Matrix4::zeros();
    for j in 0..4 {
        let d = dirs[j] / dirs[j].norm();
        let row = d.transpose() * dual_camera(&ws[j]);
        m.set_row(j, &row);
    }
    let svd = m.svd(false, true);
    let v_t = svd.v_t.unwrap();
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let ratio = svd.singular_values[order[2]] / svd.singular_values[order[0]];
    if !(ratio >= RANK_TOL) {
        return Err(Error::RankDeficient { ratio });
    }
    let x: Vector4<f64> = v_t.row(order[3]).transpose();
    Ok(Matrix2x3::new(x[0], -x[1], -x[2], x[1], x[0], -x[3]))
}
