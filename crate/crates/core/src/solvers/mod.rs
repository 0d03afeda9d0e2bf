//! End-to-end minimal solvers from scanline observations to tensors and
//! pose candidates.

mod d37;
mod vertical;

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::enumeration::Setting;
use crate::geometry::{
    reduce_parallel, CameraPose, ObservationGrid, ReducedCamera, RotationFactors,
};
use crate::tensor::{
    build_trifocal_system, decompose_trifocal_canonical, estimate_trifocal_dlt, CanonicalTriplet, MultiViewTensor,
    TensorData,
};
use crate::{Error, Result};

pub use d37::{solve_d37, solve_d37_with, D37Options};
pub use vertical::{solve_e35, solve_e44};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverId {
    B37,
    E35,
    E44,
    D37,
}

impl SolverId {
    pub const ALL: [SolverId; 4] = [SolverId::B37, SolverId::E35, SolverId::E44, SolverId::D37];

    pub fn name(self) -> &'static str {
        match self {
            SolverId::B37 => "b37",
            SolverId::E35 => "e35",
            SolverId::E44 => "e44",
            SolverId::D37 => "d37",
        }
    }

    pub fn setting(self) -> Setting {
        match self {
            SolverId::B37 => Setting::B,
            SolverId::E35 | SolverId::E44 => Setting::E,
            SolverId::D37 => Setting::D,
        }
    }

    pub fn cameras(self) -> usize {
        match self {
            SolverId::E44 => 4,
            _ => 3,
        }
    }

    /// Lines in a minimal sample.
    pub fn lines(self) -> usize {
        match self {
            SolverId::B37 | SolverId::D37 => 7,
            SolverId::E35 => 5,
            SolverId::E44 => 4,
        }
    }

    pub fn needs_gravity(self) -> bool {
        !matches!(self, SolverId::B37)
    }

    /// Upper bound on the number of returned candidates.
    pub fn max_candidates(self) -> usize {
        match self {
            SolverId::B37 => 2,
            SolverId::E35 => 16,
            SolverId::E44 => 32,
            SolverId::D37 => 48,
        }
    }
}

impl fmt::Display for SolverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverId::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Schema(format!("unknown solver '{s}' (expected b37, e35, e44 or d37)")))
    }
}

/// Unknowns of the parallel-line setting with unknown line direction.
#[derive(Clone, Debug, PartialEq)]
pub struct DReduction {
    /// xz-axis rotation with `rd * e2 = L_d`.
    pub rd: Matrix3<f64>,
    /// Per-camera rotation about the gravity axis.
    pub ry: Vec<Matrix3<f64>>,
    /// Per-camera translation of the reduced camera in the line-aligned frame.
    pub td: Vec<Vector2<f64>>,
}

/// One metric solution: a pose per camera and the common line direction.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseCandidate {
    pub poses: Vec<CameraPose>,
    pub line_direction: Vector3<f64>,
    pub reduction: Option<DReduction>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOutput {
    pub solver: SolverId,
    pub tensor: MultiViewTensor,
    /// Metric candidates; empty for the projective solver.
    pub candidates: Vec<PoseCandidate>,
    /// Canonical camera triplets (projective solver only).
    pub canonical: Vec<CanonicalTriplet>,
}

/// Run `solver` on a minimal grid.
pub fn solve(solver: SolverId, grid: &ObservationGrid) -> Result<SolverOutput> {
    match solver {
        SolverId::B37 => solve_b37(grid),
        SolverId::E35 => solve_e35(grid),
        SolverId::E44 => solve_e44(grid),
        SolverId::D37 => solve_d37(grid),
    }
}

pub(crate) fn check_size(solver: SolverId, grid: &ObservationGrid) -> Result<()> {
    if grid.cameras() != solver.cameras() || grid.lines() != solver.lines() {
        return Err(Error::SampleSize {
            expected_cameras: solver.cameras(),
            expected_lines: solver.lines(),
            cameras: grid.cameras(),
            lines: grid.lines(),
        });
    }
    Ok(())
}

/// Incidence-form observations `[x', 1]` as rows of three (one per camera).
pub(crate) fn incidence_rows(grid: &ObservationGrid) -> Result<Vec<[Vector2<f64>; 3]>> {
    (0..grid.lines())
        .map(|j| {
            Ok([
                reduce_parallel(grid.get(0, j))?.u,
                reduce_parallel(grid.get(1, j))?.u,
                reduce_parallel(grid.get(2, j))?.u,
            ])
        })
        .collect()
}

/// Seven lines in three cameras, lines parallel to a known axis, no gravity.
/// Returns the trifocal tensor and its canonical camera triplets.
pub fn solve_b37(grid: &ObservationGrid) -> Result<SolverOutput> {
    check_size(SolverId::B37, grid)?;
    let t = estimate_trifocal_dlt(&build_trifocal_system(&incidence_rows(grid)?))?;
    let canonical = decompose_trifocal_canonical(&t)?;
    Ok(SolverOutput {
        solver: SolverId::B37,
        tensor: MultiViewTensor::new(TensorData::Trifocal(t), Some(SolverId::B37)),
        candidates: Vec::new(),
        canonical,
    })
}

/// Pose of a camera from its calibrated reduced camera `A' = [R''_block | t'']`
/// and its gravity factors. `negate` picks the second sign of the block scale.
pub fn recover_pose_from_calibrated(a_prime: &ReducedCamera, factors: &RotationFactors, negate: bool) -> Result<CameraPose> {
    let b = a_prime.block();
    let det = b.determinant();
    if det.abs() < 1e-12 {
        return Err(Error::SingularBlock);
    }
    let kappa = det.abs().sqrt() * if negate { -1.0 } else { 1.0 };
    let (c, s) = (b[(0, 0)] / kappa, b[(0, 1)] / kappa);
    let n = (c * c + s * s).sqrt();
    let (c, s) = (c / n, s / n);
    let r2 = Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c);
    let r_prime = factors.ra * r2;
    let aa = Matrix2::new(
        -factors.ra[(0, 2)],
        factors.ra[(0, 0)],
        -factors.ra[(2, 2)],
        factors.ra[(2, 0)],
    );
    let t = aa * (a_prime.translation() / kappa);
    let lhs = Matrix2::new(r_prime[(0, 2)], -r_prime[(0, 0)], r_prime[(2, 2)], -r_prime[(2, 0)]);
    let cxz = lhs.try_inverse().ok_or(Error::SingularBlock)? * t;
    let scanline_y = factors.r0[(2, 1)] / factors.r0[(1, 1)];
    Ok(CameraPose {
        rotation: factors.r0.transpose() * r_prime,
        center: Vector3::new(cxz.x, 0.0, cxz.y),
        scanline_y,
    })
}
