//! Rotation helpers. Quaternions are stored as `[w, x, y, z]` with `w >= 0`.

use nalgebra::{Matrix3, Vector3};

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn quat_to_matrix(q: [f64; 4]) -> Matrix3<f64> {
    let [w, x, y, z] = q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Shepperd's method; the result has nonnegative scalar part.
pub fn matrix_to_quat(r: &Matrix3<f64>) -> [f64; 4] {
    let tr = r.trace();
    let mut q = if tr > r[(0, 0)].max(r[(1, 1)]).max(r[(2, 2)]) {
        let s = (1.0 + tr).sqrt() * 2.0;
        [
            0.25 * s,
            (r[(2, 1)] - r[(1, 2)]) / s,
            (r[(0, 2)] - r[(2, 0)]) / s,
            (r[(1, 0)] - r[(0, 1)]) / s,
        ]
    } else if r[(0, 0)] >= r[(1, 1)] && r[(0, 0)] >= r[(2, 2)] {
        let s = (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt() * 2.0;
        [
            (r[(2, 1)] - r[(1, 2)]) / s,
            0.25 * s,
            (r[(0, 1)] + r[(1, 0)]) / s,
            (r[(0, 2)] + r[(2, 0)]) / s,
        ]
    } else if r[(1, 1)] >= r[(2, 2)] {
        let s = (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt() * 2.0;
        [
            (r[(0, 2)] - r[(2, 0)]) / s,
            (r[(0, 1)] + r[(1, 0)]) / s,
            0.25 * s,
            (r[(1, 2)] + r[(2, 1)]) / s,
        ]
    } else {
        let s = (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt() * 2.0;
        [
            (r[(1, 0)] - r[(0, 1)]) / s,
            (r[(0, 2)] + r[(2, 0)]) / s,
            (r[(1, 2)] + r[(2, 1)]) / s,
            0.25 * s,
        ]
    };
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sign = if q[0] < 0.0 { -1.0 } else { 1.0 };
    for v in q.iter_mut() {
        *v *= sign / n;
    }
    q
}

/// Rodrigues' formula.
pub fn exp_so3(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let k = skew(w);
    if theta < 1e-8 {
        return Matrix3::identity() + k + 0.5 * k * k;
    }
    Matrix3::identity() + (theta.sin() / theta) * k + ((1.0 - theta.cos()) / (theta * theta)) * k * k
}

/// Rotation vector of `r`, accurate for small angles and near pi.
pub fn log_so3(r: &Matrix3<f64>) -> Vector3<f64> {
    let q = matrix_to_quat(r);
    let v = Vector3::new(q[1], q[2], q[3]);
    let s = v.norm();
    if s < 1e-300 {
        return Vector3::zeros();
    }
    let angle = 2.0 * s.atan2(q[0]);
    v * (angle / s)
}

/// Rotation angle in `[0, pi]`, accurate at both ends.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let s = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]).norm() * 0.5;
    let c = (r.trace() - 1.0) * 0.5;
    s.atan2(c)
}

pub fn rot_x(theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Quaternion of the shortest rotation taking unit `from` to unit `to`,
/// or `None` when they are (nearly) antipodal.
pub fn swing_quat(from: &Vector3<f64>, to: &Vector3<f64>, tol: f64) -> Option<[f64; 4]> {
    let c = from.dot(to);
    if 1.0 + c < tol {
        return None;
    }
    let a = from.cross(to);
    let w = 1.0 + c;
    let n = (w * w + a.norm_squared()).sqrt();
    Some([w / n, a.x / n, a.y / n, a.z / n])
}

/// Shortest rotation taking unit `from` to unit `to`. For `from = e2` its
/// axis lies in the xz-plane.
pub fn swing(from: &Vector3<f64>, to: &Vector3<f64>, tol: f64) -> Option<Matrix3<f64>> {
    swing_quat(from, to, tol).map(quat_to_matrix)
}

/// Angle between two vectors in `[0, pi]`; pi/2 if either is zero.
pub fn vector_angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return if na == nb { 0.0 } else { std::f64::consts::FRAC_PI_2 };
    }
    a.cross(b).norm().atan2(a.dot(b))
}

/// Project a near-rotation onto SO(3).
pub fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * v_t
}
