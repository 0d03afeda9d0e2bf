//! JSON views of solver and RANSAC results.

use serde_json::{json, Value};

use scanline_pose::geometry::{canonicalize_solution, pose_errors, CameraPose, ObservationGrid};
use scanline_pose::io::PoseRecord;
use scanline_pose::robust::{Model, ScoredModel};
use scanline_pose::solvers::{PoseCandidate, SolverOutput};
use scanline_pose::tensor::CanonicalTriplet;

use nalgebra::Vector3;

/// Reference poses to compare against. Pseudo ground truth from an
/// observation file carries no line direction; each candidate's own is
/// used instead.
pub struct Truth {
    pub poses: Vec<CameraPose>,
    pub line_direction: Option<Vector3<f64>>,
}

fn pose(p: &CameraPose) -> Value {
    let r = PoseRecord::from_pose(p);
    json!({ "rotation": r.rotation, "center": r.center, "scanline_y": p.scanline_y })
}

fn vec3(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Rotation and translation errors (radians) after fixing the gauge of
/// both sides.
fn errors(c: &PoseCandidate, truth: &Truth) -> Option<(f64, f64)> {
    let d = truth.line_direction.unwrap_or(c.line_direction);
    let (gt, _) = canonicalize_solution(&truth.poses, &d, &[]).ok()?;
    let (est, _) = canonicalize_solution(&c.poses, &c.line_direction, &[]).ok()?;
    let n = est.len().min(gt.len());
    let e = pose_errors(&est[..n], &gt[..n]).ok()?;
    Some((e.rot_err, e.trans_err))
}

fn candidate(c: &PoseCandidate, truth: Option<&Truth>) -> Value {
    let mut v = json!({
        "poses": c.poses.iter().map(pose).collect::<Vec<_>>(),
        "line_direction": vec3(&c.line_direction),
    });
    if let Some((rot, trans)) = truth.and_then(|t| errors(c, t)) {
        v["rot_err"] = json!(rot);
        v["trans_err"] = json!(trans);
    }
    v
}

fn triplet(t: &CanonicalTriplet) -> Value {
    let cams: Vec<Vec<[f64; 3]>> =
        t.cameras().iter().map(|a| (0..2).map(|r| [a[(r, 0)], a[(r, 1)], a[(r, 2)]]).collect()).collect();
    json!({ "alpha": t.alpha, "cameras": cams })
}

/// Index and errors of the candidate closest to the truth.
fn best(candidates: &[PoseCandidate], truth: &Truth) -> Value {
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let Some((rot, trans)) = errors(c, truth) else { continue };
        if best.is_none_or(|(_, r, t)| rot.max(trans) < r.max(t)) {
            best = Some((i, rot, trans));
        }
    }
    match best {
        Some((i, rot, trans)) => json!({ "index": i, "rot_err": rot, "trans_err": trans }),
        None => Value::Null,
    }
}

pub fn solver_output(output: &SolverOutput, truth: Option<&Truth>) -> Value {
    let mut v = json!({
        "solver": output.solver,
        "tensor": output.tensor.entries(),
        "candidates": output.candidates.iter().map(|c| candidate(c, truth)).collect::<Vec<_>>(),
        "canonical": output.canonical.iter().map(triplet).collect::<Vec<_>>(),
    });
    if let Some(t) = truth {
        v["best"] = best(&output.candidates, t);
    }
    v
}

pub fn scored_model(m: &ScoredModel, grid: &ObservationGrid, truth: Option<&Truth>) -> Value {
    let model = match &m.model {
        Model::Metric(c) => json!({ "metric": candidate(c, truth) }),
        Model::Projective(t) => json!({ "projective": triplet(t) }),
    };
    let finite = |x: &f64| if x.is_finite() { json!(x) } else { Value::Null };
    json!({
        "score": m.score,
        "inliers": m.inliers(),
        "lines": grid.lines(),
        "line_ids": grid.line_ids,
        "inlier_mask": m.inlier_mask,
        "errors_px": m.errors.iter().map(finite).collect::<Vec<_>>(),
        "iteration": m.iteration,
        "model": model,
    })
}
