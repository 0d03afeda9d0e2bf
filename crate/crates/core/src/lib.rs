//! Minimal solvers for scanline cameras observing parallel 3D lines.
//!
//! A scanline camera is one row of a rolling-shutter or pushbroom sensor,
//! with its own pose. Each observation is the image x at which a 3D line
//! crosses that row. With all lines parallel the problem reduces to 1D
//! cameras observing points in the plane, and relative pose follows from
//! small trifocal / dual quadrifocal tensors.
//!
//! Modules:
//! - [`geometry`]: types, incidence constraint, reductions, gauge, metrics.
//! - [`tensor`]: tensor construction, estimation and decomposition.
//! - [`solvers`]: the end-to-end minimal solvers.
//! - [`enumeration`]: balanced problem enumeration and minimality checks.
//! - [`synthetic`]: random scenes, noise and the benchmark harness.
//! - [`robust`]: triangulation, scoring and RANSAC.
//! - [`io`]: observation files and benchmark CSV.

pub mod enumeration;
pub mod error;
pub mod geometry;
pub mod io;
mod linalg;
pub mod robust;
pub mod solvers;
pub mod synthetic;
pub mod tensor;

pub use enumeration::Setting;
pub use error::{Error, Result};
pub use linalg::mix_seed;
