use nalgebra::Vector3;

use super::ScanlineObservation;
use crate::{Error, Result};

/// Complete visibility table: every line observed once in every camera.
///
/// Cameras and lines are renumbered `0..m` and `0..n` in increasing order of
/// their original indices, which are kept in `camera_ids` / `line_ids`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationGrid {
    pub camera_ids: Vec<usize>,
    pub line_ids: Vec<usize>,
    /// Row-major by line: entry `line * m + camera`.
    obs: Vec<ScanlineObservation>,
}

impl ObservationGrid {
    pub fn from_observations(observations: &[ScanlineObservation]) -> Result<Self> {
        let mut camera_ids: Vec<usize> = observations.iter().map(|o| o.camera_index).collect();
        camera_ids.sort_unstable();
        camera_ids.dedup();
        let mut line_ids: Vec<usize> = observations.iter().map(|o| o.line_index).collect();
        line_ids.sort_unstable();
        line_ids.dedup();
        let m = camera_ids.len();
        let mut slots: Vec<Option<ScanlineObservation>> = vec![None; m * line_ids.len()];
        for o in observations {
            let i = camera_ids.binary_search(&o.camera_index).unwrap();
            let j = line_ids.binary_search(&o.line_index).unwrap();
            if slots[j * m + i].is_some() {
                return Err(Error::Schema(format!(
                    "camera {} observes line {} more than once",
                    o.camera_index, o.line_index
                )));
            }
            slots[j * m + i] = Some(o.clone());
        }
        let mut obs = Vec::with_capacity(slots.len());
        for (k, s) in slots.into_iter().enumerate() {
            match s {
                Some(o) => obs.push(o),
                None => {
                    return Err(Error::IncompleteVisibility { camera: camera_ids[k % m], line: line_ids[k / m] })
                }
            }
        }
        Ok(Self { camera_ids, line_ids, obs })
    }

    pub fn cameras(&self) -> usize {
        self.camera_ids.len()
    }

    pub fn lines(&self) -> usize {
        self.line_ids.len()
    }

    pub fn get(&self, camera: usize, line: usize) -> &ScanlineObservation {
        &self.obs[line * self.cameras() + camera]
    }

    pub fn get_mut(&mut self, camera: usize, line: usize) -> &mut ScanlineObservation {
        let m = self.cameras();
        &mut self.obs[line * m + camera]
    }

    pub fn observations(&self) -> &[ScanlineObservation] {
        &self.obs
    }

    /// Scanline of a camera (taken from its first observation).
    pub fn scanline_y(&self, camera: usize) -> f64 {
        self.get(camera, 0).scanline_y
    }

    pub fn gravity(&self, camera: usize) -> Result<Vector3<f64>> {
        self.get(camera, 0)
            .gravity
            .ok_or(Error::GravityMissing { camera: self.camera_ids[camera] })
    }

    /// Sub-grid with the given lines (positions into `line_ids`).
    pub fn select_lines(&self, lines: &[usize]) -> Self {
        let m = self.cameras();
        let mut obs = Vec::with_capacity(lines.len() * m);
        for &j in lines {
            obs.extend_from_slice(&self.obs[j * m..(j + 1) * m]);
        }
        Self {
            camera_ids: self.camera_ids.clone(),
            line_ids: lines.iter().map(|&j| self.line_ids[j]).collect(),
            obs,
        }
    }
}
