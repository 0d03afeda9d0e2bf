use super::rotation::{rotation_angle, vector_angle};
use super::CameraPose;
use crate::tensor::MultiViewTensor;
use crate::{Error, Result};

/// Angular pose errors (radians) and tensor distance of one estimate.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ErrorReport {
    pub rot_err: f64,
    pub trans_err: f64,
    /// Filled in separately by [`tensor_error`]; zero from [`pose_errors`].
    pub tensor_err: f64,
}

/// Maximum rotation error over cameras and maximum angle between centers
/// over cameras after the first. Both inputs are expected in the canonical
/// frame.
pub fn pose_errors(estimated: &[CameraPose], ground_truth: &[CameraPose]) -> Result<ErrorReport> {
    if estimated.len() != ground_truth.len() {
        return Err(Error::LengthMismatch { expected: ground_truth.len(), found: estimated.len() });
    }
    let mut report = ErrorReport::default();
    for (i, (e, g)) in estimated.iter().zip(ground_truth).enumerate() {
        report.rot_err = report.rot_err.max(rotation_angle(&(e.rotation.transpose() * g.rotation)));
        if i > 0 {
            report.trans_err = report.trans_err.max(vector_angle(&e.center, &g.center));
        }
    }
    Ok(report)
}

/// Sign-resolved Frobenius distance between two unit-normalized tensors.
pub fn tensor_error(estimated: &MultiViewTensor, ground_truth: &MultiViewTensor) -> Result<f64> {
    let a = estimated.entries();
    let b = ground_truth.entries();
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch);
    }
    Ok(signed_distance(a, b))
}

pub(crate) fn signed_distance(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (mut plus, mut minus) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (x / na, y / nb);
        plus += (x - y) * (x - y);
        minus += (x + y) * (x + y);
    }
    plus.min(minus).sqrt()
}

#[cfg(test)]
mod tests {
    use super::super::rotation::exp_so3;
    use super::*;
    use crate::tensor::{Tensor222, TensorData};
    use nalgebra::Vector3;

    fn poses() -> Vec<CameraPose> {
        (0..3)
            .map(|i| {
                CameraPose::new(
                    exp_so3(&Vector3::new(0.2 * i as f64, -0.3, 0.1)),
                    Vector3::new(i as f64, 0.0, 1.0 - i as f64),
                    0.0,
                )
            })
            .collect()
    }

    #[test]
    fn identical_lists_have_zero_error() {
        let r = pose_errors(&poses(), &poses()).unwrap();
        assert_eq!((r.rot_err, r.trans_err), (0.0, 0.0));
    }

    #[test]
    fn perturbation_angle_is_reported() {
        let gt = poses();
        let axes = [Vector3::new(1.0, 2.0, 3.0), Vector3::new(-1.0, 0.5, 0.0), Vector3::new(0.0, 0.0, 1.0)];
        let est: Vec<CameraPose> = gt
            .iter()
            .zip(axes)
            .map(|(p, a)| CameraPose::new(p.rotation * exp_so3(&(a.normalize() * 0.1)), p.center, 0.0))
            .collect();
        let r = pose_errors(&est, &gt).unwrap();
        assert!((r.rot_err - 0.1).abs() < 1e-12);
        let r2 = pose_errors(&gt, &est).unwrap();
        assert_eq!(r.rot_err, r2.rot_err);
    }

    #[test]
    fn antipodal_center_gives_pi() {
        let gt = poses();
        let mut est = gt.clone();
        est[2].center = -est[2].center;
        let r = pose_errors(&est, &gt).unwrap();
        assert!((r.trans_err - std::f64::consts::PI).abs() < 1e-15);
        assert!(matches!(pose_errors(&est[..2], &gt), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn tensor_error_examples() {
        let mut e = [0.0; 8];
        e[0] = 1.0;
        let mut f = [0.0; 8];
        f[3] = 1.0;
        let t = |v: [f64; 8]| MultiViewTensor::new(TensorData::Trifocal(Tensor222::new(v)), None);
        let neg = e.map(|v| -v);
        assert_eq!(tensor_error(&t(e), &t(e)).unwrap(), 0.0);
        assert_eq!(tensor_error(&t(neg), &t(e)).unwrap(), 0.0);
        assert!((tensor_error(&t(e), &t(f)).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(tensor_error(&t(f), &t(e)).unwrap(), tensor_error(&t(e), &t(f)).unwrap());
    }
}
