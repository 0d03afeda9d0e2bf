//! Core types, the scanline incidence constraint, algebraic reductions,
//! gauge fixing and error metrics.

mod gauge;
mod gravity;
mod grid;
mod metrics;
mod reduce;
pub mod rotation;

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};

use crate::{Error, Result};

pub use gauge::canonicalize_solution;
pub use gravity::gravity_factorization;
pub use grid::ObservationGrid;
pub use metrics::{pose_errors, tensor_error, ErrorReport};
pub(crate) use metrics::signed_distance;
pub use reduce::{
    decompose_reduced_camera, reduce_parallel, reduced_camera_from_pose, reduced_camera_matrix,
    scanline_rotation, ReducedDecomposition,
};

/// Pose of the camera while it exposes one scanline.
///
/// A world point `X` has camera coordinates `rotation * (X - center)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraPose {
    pub rotation: Matrix3<f64>,
    pub center: Vector3<f64>,
    /// Normalized image row of the scanline.
    pub scanline_y: f64,
}

impl CameraPose {
    pub fn new(rotation: Matrix3<f64>, center: Vector3<f64>, scanline_y: f64) -> Self {
        Self { rotation, center, scanline_y }
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        let r = &self.rotation;
        (r.transpose() * r - Matrix3::identity()).amax() <= tol && (r.determinant() - 1.0).abs() <= tol
    }
}

/// 3D line `point + t * direction` with unit direction.
#[derive(Clone, Debug, PartialEq)]
pub struct Line3D {
    pub point: Vector3<f64>,
    pub direction: Vector3<f64>,
}

impl Line3D {
    /// Normalizes `direction`.
    pub fn new(point: Vector3<f64>, direction: Vector3<f64>) -> Self {
        Self { point, direction: direction.normalize() }
    }

    pub fn vertical(x: f64, z: f64) -> Self {
        Self { point: Vector3::new(x, 0.0, z), direction: Vector3::y() }
    }
}

/// One line crossing one scanline, in normalized image coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanlineObservation {
    pub camera_index: usize,
    pub line_index: usize,
    pub x: f64,
    pub scanline_y: f64,
    /// Gravity direction in camera coordinates (`rotation * e2` in a
    /// y-up world).
    pub gravity: Option<Vector3<f64>>,
}

/// The 2x3 matrix of a scanline pose acting on homogeneous xz-positions of
/// lines parallel to the y axis. Stored with unit Frobenius norm and its
/// first nonzero entry (row-major) positive.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedCamera {
    a: Matrix2x3<f64>,
    calibrated: bool,
}

impl ReducedCamera {
    pub fn new(a: Matrix2x3<f64>) -> Result<Self> {
        Self::with_flag(a, false)
    }

    /// A camera whose left 2x2 block is a scaled rotation.
    pub fn calibrated(a: Matrix2x3<f64>) -> Result<Self> {
        Self::with_flag(a, true)
    }

    fn with_flag(a: Matrix2x3<f64>, calibrated: bool) -> Result<Self> {
        let n = a.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::DecompositionFailed("zero or non-finite camera matrix".into()));
        }
        let mut a = a / n;
        let lead = [a[(0, 0)], a[(0, 1)], a[(0, 2)], a[(1, 0)], a[(1, 1)], a[(1, 2)]]
            .into_iter()
            .find(|v| v.abs() > 1e-12)
            .unwrap_or(1.0);
        if lead < 0.0 {
            a = -a;
        }
        Ok(Self { a, calibrated })
    }

    pub fn matrix(&self) -> &Matrix2x3<f64> {
        &self.a
    }

    pub fn is_calibrated(&self) -> bool {
        self.calibrated
    }

    pub fn block(&self) -> Matrix2<f64> {
        self.a.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector2<f64> {
        self.a.column(2).into_owned()
    }
}

/// Observation after rectifying the scanline to `y = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedObservation {
    /// `[x', 1]`, satisfying `u^T A L = 0`.
    pub u: Vector2<f64>,
    /// `[1, -x']`, proportional to `A L`.
    pub u_prime: Vector2<f64>,
    /// Gravity-corrected incidence form `A_a^T u`.
    pub u_dprime: Option<Vector2<f64>>,
}

/// `R_0 R_v = R_a R_b`: scanline rectification, gravity alignment and their
/// refactoring into an xz-axis rotation followed by a y rotation.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationFactors {
    pub r0: Matrix3<f64>,
    pub rv: Matrix3<f64>,
    pub ra: Matrix3<f64>,
    pub rb: Matrix3<f64>,
}

/// Triple product `p^T R (L_d x (L_0 - C))`; zero iff the back-projected
/// ray of `p` meets the line.
pub fn incidence_residual(pose: &CameraPose, line: &Line3D, p: &Vector3<f64>) -> f64 {
    let w = line.direction.cross(&(line.point - pose.center));
    p.dot(&(pose.rotation * w))
}

/// The image x at which `line` crosses row `scanline_y`.
pub fn project_line_to_scanline(pose: &CameraPose, line: &Line3D, scanline_y: f64) -> Result<f64> {
    let w = pose.rotation * line.direction.cross(&(line.point - pose.center));
    if w.x.abs() < 1e-14 {
        return Err(Error::NoIntersection);
    }
    Ok(-(scanline_y * w.y + w.z) / w.x)
}

/// Pseudo ground truth for row `y` (pixels) of an image of height `h`,
/// interpolated between the poses of the first and the middle row.
/// The returned `scanline_y` is `y` unchanged.
pub fn interpolate_scanline_pose(first: &CameraPose, middle: &CameraPose, y: f64, image_height: f64) -> CameraPose {
    let k = (image_height - 2.0 * y) / image_height;
    let center = middle.center + k * (first.center - middle.center);
    let rel = first.rotation * middle.rotation.transpose();
    let step = rotation::exp_so3(&(k * rotation::log_so3(&rel)));
    CameraPose { rotation: step * middle.rotation, center, scanline_y: y }
}
