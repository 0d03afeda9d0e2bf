use nalgebra::Vector3;

use super::rotation::swing;
use super::{CameraPose, Line3D};
use crate::{Error, Result};

/// Move a solution into the canonical frame: camera 1 at the origin with no
/// rotation about the line direction, the common line direction along `e2`,
/// center components along `e2` zeroed and `|C_2| = 1`.
///
/// The sign of `line_direction` is chosen so that it points into the upper
/// half of camera 1's view, which makes the result independent of that sign.
pub fn canonicalize_solution(
    poses: &[CameraPose],
    line_direction: &Vector3<f64>,
    lines: &[Line3D],
) -> Result<(Vec<CameraPose>, Vec<Line3D>)> {
    let first = poses.first().ok_or_else(|| Error::DegenerateGauge("no poses".into()))?;
    let mut d = line_direction.normalize();
    if (first.rotation * d).y < 0.0 {
        d = -d;
    }
    for l in lines {
        if l.direction.cross(&d).norm() > 1e-9 {
            return Err(Error::DegenerateGauge("lines are not parallel to the given direction".into()));
        }
    }
    let s = swing(&Vector3::y(), &(first.rotation * d), 1e-12)
        .ok_or_else(|| Error::DegenerateGauge("line direction is undefined".into()))?;
    let q = s.transpose() * first.rotation;
    let c1 = first.center;
    let flat = |v: Vector3<f64>| {
        let mut w = q * (v - c1);
        w.y = 0.0;
        w
    };
    let scale = match poses.get(1) {
        Some(p) => {
            let n = flat(p.center).norm();
            if n < 1e-12 {
                return Err(Error::DegenerateGauge("first two centers coincide".into()));
            }
            1.0 / n
        }
        None => 1.0,
    };
    let poses = poses
        .iter()
        .map(|p| CameraPose {
            rotation: p.rotation * q.transpose(),
            center: flat(p.center) * scale,
            scanline_y: p.scanline_y,
        })
        .collect();
    let lines = lines
        .iter()
        .map(|l| Line3D { point: flat(l.point) * scale, direction: Vector3::y() })
        .collect();
    Ok((poses, lines))
}
