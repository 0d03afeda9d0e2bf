use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};

use super::rotation::rot_x;
use super::{CameraPose, ReducedCamera, ReducedObservation, ScanlineObservation};
use crate::{Error, Result};

/// Rotation about the x axis taking the direction `[0, y, 1]` to `e3`, so the
/// scanline `y` lands on the row `y = 0`.
pub fn scanline_rotation(scanline_y: f64) -> Matrix3<f64> {
    rot_x(scanline_y.atan())
}

/// Rectify the observation to the row `y = 0`.
pub fn reduce_parallel(obs: &ScanlineObservation) -> Result<ReducedObservation> {
    let p = scanline_rotation(obs.scanline_y) * Vector3::new(obs.x, obs.scanline_y, 1.0);
    if p.z.abs() < 1e-12 {
        return Err(Error::DegenerateRay);
    }
    let xp = p.x / p.z;
    Ok(ReducedObservation { u: Vector2::new(xp, 1.0), u_prime: Vector2::new(1.0, -xp), u_dprime: None })
}

/// Unnormalized reduced camera of the rectified rotation `r_prime` and the
/// xz-center `(cx, cz)`.
pub fn reduced_camera_matrix(r_prime: &Matrix3<f64>, cx: f64, cz: f64) -> Matrix2x3<f64> {
    let t = -r_prime * Vector3::new(cz, 0.0, -cx);
    Matrix2x3::new(
        -r_prime[(0, 2)],
        r_prime[(0, 0)],
        t.x,
        -r_prime[(2, 2)],
        r_prime[(2, 0)],
        t.z,
    )
}

/// Reduced camera for lines parallel to the y axis. The y component of the
/// center is unobservable and ignored.
pub fn reduced_camera_from_pose(pose: &CameraPose) -> ReducedCamera {
    let r_prime = scanline_rotation(pose.scanline_y) * pose.rotation;
    ReducedCamera::new(reduced_camera_matrix(&r_prime, pose.center.x, pose.center.z))
        .expect("rotation rows are never zero")
}

/// One way of writing a reduced camera as a rectified pose.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedDecomposition {
    /// Rectified rotation `R_0 R`.
    pub rotation: Matrix3<f64>,
    pub center_x: f64,
    pub center_z: f64,
    /// `reduced_camera_matrix(rotation, center_x, center_z) = scale * a`.
    pub scale: f64,
}

impl ReducedDecomposition {
    /// Undo the scanline rectification for row `scanline_y`.
    pub fn pose(&self, scanline_y: f64) -> CameraPose {
        CameraPose {
            rotation: scanline_rotation(scanline_y).transpose() * self.rotation,
            center: Vector3::new(self.center_x, 0.0, self.center_z),
            scanline_y,
        }
    }
}

/// All real rotation/center/scale triples reproducing `a`.
///
/// The left block of `a` is `s * R_sub * J` with `R_sub` the {x,z} block of a
/// rotation. A 2x2 block of a rotation has largest singular value 1, which
/// fixes `s = ±1/s1`; each sign admits two completions to SO(3). Generic
/// input therefore has four real decompositions (the other four solutions of
/// the quartic in `s` are complex).
pub fn decompose_reduced_camera(a: &ReducedCamera) -> Result<Vec<ReducedDecomposition>> {
    let m = a.matrix();
    // R_sub up to scale: A_block * J^T
    let m0 = Matrix2::new(m[(0, 1)], -m[(0, 0)], m[(1, 1)], -m[(1, 0)]);
    let svd = m0.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let (i1, i2) = if svd.singular_values[0] >= svd.singular_values[1] { (0, 1) } else { (1, 0) };
    let s1 = svd.singular_values[i1];
    if s1 < 1e-14 {
        return Err(Error::DecompositionFailed("left block vanishes".into()));
    }
    let s = (svd.singular_values[i2] / s1).min(1.0);
    let c = (1.0 - s * s).max(0.0).sqrt();
    // reorder so the unit singular value comes first
    let u = Matrix2::from_columns(&[u.column(i1), u.column(i2)]);
    let v = Matrix2::from_columns(&[v_t.row(i1).transpose(), v_t.row(i2).transpose()]);

    let mut out = Vec::new();
    for sigma_sign in [1.0, -1.0] {
        let us = u * sigma_sign;
        let det_uv = us.determinant() * v.determinant();
        for eps in [1.0, -1.0] {
            if c == 0.0 && eps < 0.0 {
                continue;
            }
            // middle 2x2 orthogonal block chosen so the full matrix is in SO(3)
            let k = if det_uv > 0.0 {
                Matrix3::new(1.0, 0.0, 0.0, 0.0, s, -eps * c, 0.0, eps * c, s)
            } else {
                Matrix3::new(1.0, 0.0, 0.0, 0.0, s, eps * c, 0.0, eps * c, -s)
            };
            let mut uu = Matrix3::identity();
            uu.fixed_view_mut::<2, 2>(0, 0).copy_from(&us);
            let mut vv = Matrix3::identity();
            vv.fixed_view_mut::<2, 2>(0, 0).copy_from(&v.transpose());
            let p = uu * k * vv;
            // coordinates of p are ordered (x, z, y)
            let perm = [0usize, 2, 1];
            let mut r = Matrix3::zeros();
            for i in 0..3 {
                for j in 0..3 {
                    r[(perm[i], perm[j])] = p[(i, j)];
                }
            }
            let sigma = sigma_sign / s1;
            let lhs = Matrix2::new(r[(0, 2)], -r[(0, 0)], r[(2, 2)], -r[(2, 0)]);
            let Some(inv) = lhs.try_inverse() else { continue };
            if lhs.determinant().abs() < 1e-12 {
                continue;
            }
            let cxz = inv * (sigma * Vector2::new(m[(0, 2)], m[(1, 2)]));
            out.push(ReducedDecomposition { rotation: r, center_x: cxz.x, center_z: cxz.y, scale: sigma });
        }
    }
    if out.is_empty() {
        return Err(Error::DecompositionFailed("no real decomposition with solvable center".into()));
    }
    Ok(out)
}
