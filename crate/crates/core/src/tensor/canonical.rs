use nalgebra::Matrix2x3;

use super::Tensor222;
use crate::linalg::quadratic_roots;
use crate::{Error, Result};

const PIVOT_TOL: f64 = 1e-12;
/// Negative discriminants within this fraction of the squared coefficient
/// magnitudes (before cancellation) are a double root. Exact data from
/// collinear camera centers lands there.
const DISC_CLAMP: f64 = 1e-8;

/// Projective normal form of three reduced cameras:
/// `A1 = [1 0 0; a1 a1 a1]`, `A2 = [0 1 0; a2 a3 a4]`, `A3 = [0 0 1; a5 a6 a7]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalTriplet {
    pub alpha: [f64; 7],
}

impl CanonicalTriplet {
    pub fn cameras(&self) -> [Matrix2x3<f64>; 3] {
        let [a1, a2, a3, a4, a5, a6, a7] = self.alpha;
        [
            Matrix2x3::new(1.0, 0.0, 0.0, a1, a1, a1),
            Matrix2x3::new(0.0, 1.0, 0.0, a2, a3, a4),
            Matrix2x3::new(0.0, 0.0, 1.0, a5, a6, a7),
        ]
    }
}

/// Closed-form decomposition of a trifocal tensor into canonical cameras.
/// Generic tensors give two triplets (one for a double root).
pub fn decompose_trifocal_canonical(t: &Tensor222) -> Result<Vec<CanonicalTriplet>> {
    let e = t.entries();
    if e[0].abs() < PIVOT_TOL {
        return Err(Error::PivotZero("T000"));
    }
    let [_, t001, t010, t011, t100, t101, t110, t111] = e.map(|v| v / e[0]);
    let a1 = t100;
    if a1.abs() < PIVOT_TOL {
        return Err(Error::PivotZero("alpha1"));
    }
    let a3 = t010;
    let a7 = t001;
    let a5 = (a1 * a7 - t101) / a1;
    let a2 = (a1 * a3 - t110) / a1;
    if a2.abs() < PIVOT_TOL {
        return Err(Error::PivotZero("alpha2"));
    }
    let ca = -a5 / a2;
    let cb = (t111 - a1 * t011 + a1 * a2 * a7 + a1 * a3 * a5) / (a1 * a2);
    let cc = t011 - a3 * a7;
    // magnitudes before cancellation
    let mb = (t111.abs() + (a1 * t011).abs() + (a1 * a2 * a7).abs() + (a1 * a3 * a5).abs()) / (a1 * a2).abs();
    let mc = t011.abs() + (a3 * a7).abs();
    let clamp = DISC_CLAMP * (mb * mb + 4.0 * ca.abs() * mc);
    let roots = quadratic_roots(ca, cb, cc, clamp).map_err(|d| Error::ComplexRoots { discriminant: d })?;
    let mut out = Vec::new();
    for a4 in roots {
        // two expressions for a6; use the better conditioned one
        let via_t011 = a4.abs();
        let via_t111 = (a2 - a4).abs();
        let a6 = if via_t011 >= via_t111 {
            if via_t011 < PIVOT_TOL {
                continue;
            }
            (a3 * a7 - t011) / a4
        } else {
            (t111 / a1 + a2 * a7 + a3 * a5 - a3 * a7 - a4 * a5) / (a2 - a4)
        };
        out.push(CanonicalTriplet { alpha: [a1, a2, a3, a4, a5, a6, a7] });
    }
    Ok(out)
}
