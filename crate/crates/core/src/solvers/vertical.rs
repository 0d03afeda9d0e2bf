//! Solvers for vertical lines and known gravity (three and four cameras).

use nalgebra::{Matrix2, Vector2, Vector3};

use super::{check_size, recover_pose_from_calibrated, PoseCandidate, SolverId, SolverOutput};
use crate::geometry::{gravity_factorization, reduce_parallel, ObservationGrid, ReducedCamera, RotationFactors};
use crate::tensor::{
    decompose_calibrated_trifocal, decompose_dual_quadrifocal, estimate_calibrated_trifocal,
    estimate_dual_quadrifocal, quadrifocal_constraints, resect_calibrated_camera, trifocal_constraints,
    MultiViewTensor, TensorData,
};
use crate::Result;

/// Gravity factors per camera and gravity-corrected observations `u''`
/// indexed `[line][camera]`.
fn corrected(grid: &ObservationGrid) -> Result<(Vec<RotationFactors>, Vec<Vec<Vector2<f64>>>)> {
    let mut factors = Vec::with_capacity(grid.cameras());
    let mut aas: Vec<Matrix2<f64>> = Vec::with_capacity(grid.cameras());
    for i in 0..grid.cameras() {
        let (f, aa) = gravity_factorization(&grid.gravity(i)?, grid.scanline_y(i))?;
        factors.push(f);
        aas.push(aa);
    }
    let mut u = Vec::with_capacity(grid.lines());
    for j in 0..grid.lines() {
        let mut row = Vec::with_capacity(grid.cameras());
        for (i, aa) in aas.iter().enumerate() {
            row.push(aa.transpose() * reduce_parallel(grid.get(i, j))?.u);
        }
        u.push(row);
    }
    Ok((factors, u))
}

/// Every sign choice for every camera of every calibrated camera set.
fn expand_candidates(sets: &[Vec<ReducedCamera>], factors: &[RotationFactors]) -> Result<Vec<PoseCandidate>> {
    let m = factors.len();
    let mut out = Vec::with_capacity(sets.len() << m);
    for set in sets {
        for mask in 0..(1usize << m) {
            let poses = (0..m)
                .map(|i| recover_pose_from_calibrated(&set[i], &factors[i], (mask >> i) & 1 == 1))
                .collect::<Result<Vec<_>>>()?;
            out.push(PoseCandidate { poses, line_direction: Vector3::y(), reduction: None });
        }
    }
    Ok(out)
}

/// Five vertical lines in three cameras with known gravity: 16 candidates.
pub fn solve_e35(grid: &ObservationGrid) -> Result<SolverOutput> {
    check_size(SolverId::E35, grid)?;
    let (factors, u) = corrected(grid)?;
    let rows: Vec<[Vector2<f64>; 3]> = u.iter().map(|r| [r[0], r[1], r[2]]).collect();
    let constraints = trifocal_constraints();
    let t = estimate_calibrated_trifocal(&rows, constraints)?;
    let sets: Vec<Vec<ReducedCamera>> = decompose_calibrated_trifocal(&t, constraints)?
        .into_iter()
        .map(|s| s.to_vec())
        .collect();
    Ok(SolverOutput {
        solver: SolverId::E35,
        tensor: MultiViewTensor::new(TensorData::Trifocal(t), Some(SolverId::E35)),
        candidates: expand_candidates(&sets, &factors)?,
        canonical: Vec::new(),
    })
}

/// Four vertical lines in four cameras with known gravity: 32 candidates.
pub fn solve_e44(grid: &ObservationGrid) -> Result<SolverOutput> {
    check_size(SolverId::E44, grid)?;
    let (factors, u) = corrected(grid)?;
    // direction form, one row per camera
    let dirs: Vec<[Vector2<f64>; 4]> = (0..4)
        .map(|i| [0, 1, 2, 3].map(|j| Vector2::new(u[j][i].y, -u[j][i].x)))
        .collect();
    let constraints = quadrifocal_constraints();
    let q = estimate_dual_quadrifocal(&dirs, constraints)?;
    let mut sets = Vec::new();
    for ws in decompose_dual_quadrifocal(&q, constraints)? {
        let set = dirs
            .iter()
            .map(|d| ReducedCamera::calibrated(resect_calibrated_camera(&ws, d)?))
            .collect::<Result<Vec<_>>>()?;
        sets.push(set);
    }
    Ok(SolverOutput {
        solver: SolverId::E44,
        tensor: MultiViewTensor::new(TensorData::DualQuadrifocal(q), Some(SolverId::E44)),
        candidates: expand_candidates(&sets, &factors)?,
        canonical: Vec::new(),
    })
}
