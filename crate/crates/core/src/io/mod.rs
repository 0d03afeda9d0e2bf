//! Observation files: JSON with pixel coordinates, per-camera intrinsics,
//! optional gravity and optional ground-truth poses.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{interpolate_scanline_pose, CameraPose, Line3D, ObservationGrid, ScanlineObservation};
use crate::synthetic::SyntheticInstance;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Pinhole intrinsics of one image, in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intrinsics {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub height: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
}

impl Intrinsics {
    /// 640x480 frames with a 768 px focal length.
    pub fn fastec() -> Self {
        Self { focal: 768.0, cx: 320.0, cy: 240.0, height: 480.0, width: Some(640.0) }
    }

    /// Centered principal point; rows span normalized `y` in `[-1, 1]`.
    pub fn synthetic(focal: f64) -> Self {
        Self { focal, cx: focal, cy: focal, height: 2.0 * focal, width: None }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "fastec" => Some(Self::fastec()),
            _ => None,
        }
    }

    fn validate(&self, camera: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::InconsistentIntrinsics(format!("camera {camera}: {what}")));
        if !(self.focal > 0.0) || !self.focal.is_finite() {
            return bad("focal must be positive");
        }
        if !(self.height > 0.0) || !self.height.is_finite() {
            return bad("height must be positive");
        }
        if !(0.0..=self.height).contains(&self.cy) {
            return bad("cy lies outside the image");
        }
        if let Some(w) = self.width {
            if !(w > 0.0) || !(0.0..=w).contains(&self.cx) {
                return bad("cx lies outside the image");
            }
        }
        Ok(())
    }
}

/// Intrinsics given inline or by preset name.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum IntrinsicsSpec {
    Preset(String),
    Explicit(Intrinsics),
}

impl<'de> Deserialize<'de> for IntrinsicsSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(name) => Ok(IntrinsicsSpec::Preset(name)),
            v => Intrinsics::deserialize(v)
                .map(IntrinsicsSpec::Explicit)
                .map_err(|e| D::Error::custom(format!("intrinsics: {e}"))),
        }
    }
}

impl IntrinsicsSpec {
    pub fn resolve(&self, camera: usize) -> Result<Intrinsics> {
        match self {
            IntrinsicsSpec::Explicit(k) => Ok(*k),
            IntrinsicsSpec::Preset(name) => Intrinsics::preset(name)
                .ok_or_else(|| Error::Schema(format!("camera {camera}: unknown intrinsics preset '{name}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    /// Row-major rotation taking world to camera coordinates.
    pub rotation: [[f64; 3]; 3],
    pub center: [f64; 3],
}

impl PoseRecord {
    pub fn from_pose(p: &CameraPose) -> Self {
        Self {
            rotation: std::array::from_fn(|r| std::array::from_fn(|c| p.rotation[(r, c)])),
            center: [p.center.x, p.center.y, p.center.z],
        }
    }

    pub fn to_pose(&self, scanline_y: f64) -> CameraPose {
        let r = &self.rotation;
        CameraPose::new(
            Matrix3::new(r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2]),
            Vector3::from(self.center),
            scanline_y,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRecord {
    pub intrinsics: IntrinsicsSpec,
    /// Gravity direction in camera coordinates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gravity: Option<[f64; 3]>,
    /// Pose of the first image row, for pseudo ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_pose: Option<PoseRecord>,
    /// Pose of the middle image row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub middle_pose: Option<PoseRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationRecord {
    pub camera_index: usize,
    pub scanline_y_pixels: f64,
    pub line_id: usize,
    pub x_pixels: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationFile {
    pub version: u32,
    pub cameras: Vec<CameraRecord>,
    pub records: Vec<ObservationRecord>,
}

/// Contents of an observation file in normalized coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedObservations {
    pub observations: Vec<ScanlineObservation>,
    pub intrinsics: Vec<Intrinsics>,
    /// Per camera, the pose interpolated at its scanline when the file has
    /// first and middle row poses.
    pub pseudo_gt: Vec<Option<CameraPose>>,
}

impl LoadedObservations {
    pub fn grid(&self) -> Result<ObservationGrid> {
        ObservationGrid::from_observations(&self.observations)
    }

    /// Ground-truth poses when every camera has them.
    pub fn ground_truth(&self) -> Option<Vec<CameraPose>> {
        self.pseudo_gt.iter().cloned().collect()
    }
}

fn json_error(e: serde_json::Error) -> Error {
    let msg = format!("{e}");
    match e.classify() {
        serde_json::error::Category::Data => Error::Schema(msg),
        _ => Error::Parse(msg),
    }
}

pub fn parse_observations(text: &str) -> Result<LoadedObservations> {
    let file: ObservationFile = serde_json::from_str(text).map_err(json_error)?;
    file.normalize()
}

pub fn load_observations(path: impl AsRef<Path>) -> Result<LoadedObservations> {
    parse_observations(&std::fs::read_to_string(path)?)
}

impl ObservationFile {
    /// Check the schema invariants and convert pixels to normalized
    /// coordinates.
    pub fn normalize(&self) -> Result<LoadedObservations> {
        if self.version != FORMAT_VERSION {
            return Err(Error::Schema(format!("version {} is not supported (expected {FORMAT_VERSION})", self.version)));
        }
        let intrinsics: Vec<Intrinsics> =
            self.cameras.iter().enumerate().map(|(i, c)| c.intrinsics.resolve(i)).collect::<Result<_>>()?;
        for (i, k) in intrinsics.iter().enumerate() {
            k.validate(i)?;
        }
        let mut rows: BTreeMap<usize, f64> = BTreeMap::new();
        let mut seen = std::collections::HashSet::new();
        let mut observations = Vec::with_capacity(self.records.len());
        for (r, rec) in self.records.iter().enumerate() {
            let i = rec.camera_index;
            let (Some(cam), Some(k)) = (self.cameras.get(i), intrinsics.get(i)) else {
                return Err(Error::Schema(format!("records[{r}].camera_index {i} has no camera entry")));
            };
            if !seen.insert((i, rec.line_id)) {
                return Err(Error::Schema(format!("records[{r}]: camera {i} observes line {} twice", rec.line_id)));
            }
            if *rows.entry(i).or_insert(rec.scanline_y_pixels) != rec.scanline_y_pixels {
                return Err(Error::Schema(format!("records[{r}]: camera {i} uses more than one scanline")));
            }
            if !rec.x_pixels.is_finite() || k.width.is_some_and(|w| !(0.0..=w).contains(&rec.x_pixels)) {
                return Err(Error::Schema(format!("records[{r}].x_pixels lies outside the image")));
            }
            if !(0.0..=k.height).contains(&rec.scanline_y_pixels) {
                return Err(Error::Schema(format!("records[{r}].scanline_y_pixels lies outside the image")));
            }
            let gravity = match cam.gravity {
                Some(g) => {
                    let g = Vector3::from(g);
                    if !(g.norm() > 0.0) || !g.norm().is_finite() {
                        return Err(Error::Schema(format!("cameras[{i}].gravity must be a nonzero vector")));
                    }
                    Some(g.normalize())
                }
                None => None,
            };
            observations.push(ScanlineObservation {
                camera_index: i,
                line_index: rec.line_id,
                x: (rec.x_pixels - k.cx) / k.focal,
                scanline_y: (rec.scanline_y_pixels - k.cy) / k.focal,
                gravity,
            });
        }
        let mut pseudo_gt = Vec::with_capacity(self.cameras.len());
        for (i, cam) in self.cameras.iter().enumerate() {
            let k = &intrinsics[i];
            let gt = match (&cam.first_pose, &cam.middle_pose, rows.get(&i)) {
                (Some(first), Some(middle), Some(&y)) => {
                    let p = interpolate_scanline_pose(&first.to_pose(0.0), &middle.to_pose(0.0), y, k.height);
                    Some(CameraPose { scanline_y: (y - k.cy) / k.focal, ..p })
                }
                (Some(_), None, _) | (None, Some(_), _) => {
                    return Err(Error::Schema(format!("cameras[{i}] needs both first_pose and middle_pose")));
                }
                _ => None,
            };
            pseudo_gt.push(gt);
        }
        Ok(LoadedObservations { observations, intrinsics, pseudo_gt })
    }

    /// File for a synthetic instance with the same intrinsics for every
    /// camera. Gravity is written when present.
    pub fn from_instance(instance: &SyntheticInstance, intrinsics: &Intrinsics) -> Self {
        let grid = &instance.observations;
        let cameras = (0..grid.cameras())
            .map(|i| CameraRecord {
                intrinsics: IntrinsicsSpec::Explicit(*intrinsics),
                gravity: grid.get(i, 0).gravity.map(|g| [g.x, g.y, g.z]),
                first_pose: None,
                middle_pose: None,
            })
            .collect();
        let records = grid
            .observations()
            .iter()
            .map(|o| {
                let i = grid.camera_ids.iter().position(|&c| c == o.camera_index).unwrap();
                ObservationRecord {
                    camera_index: i,
                    scanline_y_pixels: o.scanline_y * intrinsics.focal + intrinsics.cy,
                    line_id: o.line_index,
                    x_pixels: o.x * intrinsics.focal + intrinsics.cx,
                }
            })
            .collect();
        Self { version: FORMAT_VERSION, cameras, records }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(std::io::Error::other(e)))
    }
}

/// Ground truth written next to a simulated observation file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthFile {
    pub setting: String,
    pub seed: u64,
    /// One pose per camera, at its scanline (normalized `scanline_y`).
    pub poses: Vec<GroundTruthPose>,
    pub lines: Vec<GroundTruthLine>,
    pub line_direction: [f64; 3],
    pub tensor: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthPose {
    #[serde(flatten)]
    pub pose: PoseRecord,
    pub scanline_y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthLine {
    pub point: [f64; 3],
    pub direction: [f64; 3],
}

impl GroundTruthFile {
    pub fn from_instance(instance: &SyntheticInstance, seed: u64) -> Self {
        let d = instance.line_direction();
        Self {
            setting: instance.setting.to_string(),
            seed,
            poses: instance
                .gt_poses
                .iter()
                .map(|p| GroundTruthPose { pose: PoseRecord::from_pose(p), scanline_y: p.scanline_y })
                .collect(),
            lines: instance
                .gt_lines
                .iter()
                .map(|l| GroundTruthLine {
                    point: [l.point.x, l.point.y, l.point.z],
                    direction: [l.direction.x, l.direction.y, l.direction.z],
                })
                .collect(),
            line_direction: [d.x, d.y, d.z],
            tensor: instance.gt_tensor.entries().to_vec(),
        }
    }

    pub fn poses(&self) -> Vec<CameraPose> {
        self.poses.iter().map(|p| p.pose.to_pose(p.scanline_y)).collect()
    }

    pub fn lines(&self) -> Vec<Line3D> {
        self.lines.iter().map(|l| Line3D::new(Vector3::from(l.point), Vector3::from(l.direction))).collect()
    }

    pub fn line_direction(&self) -> Vector3<f64> {
        Vector3::from(self.line_direction)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        serde_json::from_str(&std::fs::read_to_string(path)?).map_err(json_error)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(std::io::Error::other(e)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumeration::Setting;
    use crate::geometry::rotation::exp_so3;
    use crate::synthetic::{sample_scene, SceneConfig};

    fn one_record(x: f64, y: f64) -> String {
        format!(
            r#"{{"version": 1, "cameras": [{{"intrinsics": "fastec"}}],
                "records": [{{"camera_index": 0, "scanline_y_pixels": {y}, "line_id": 0, "x_pixels": {x}}}]}}"#
        )
    }

    #[test]
    fn principal_point_maps_to_zero() {
        let l = parse_observations(&one_record(320.0, 240.0)).unwrap();
        assert_eq!(l.observations[0].x, 0.0);
        assert_eq!(l.observations[0].scanline_y, 0.0);
        let text = r#"{"version": 1, "cameras": [{"intrinsics": {"focal": 768, "cx": 320, "cy": 240, "height": 480}}],
            "records": [{"camera_index": 0, "scanline_y_pixels": 240, "line_id": 0, "x_pixels": 704}]}"#;
        assert_eq!(parse_observations(text).unwrap().observations[0].x, 0.5);
    }

    #[test]
    fn out_of_image_x_is_rejected() {
        assert!(matches!(parse_observations(&one_record(641.0, 10.0)), Err(Error::Schema(_))));
        assert!(matches!(parse_observations(&one_record(10.0, 481.0)), Err(Error::Schema(_))));
    }

    #[test]
    fn errors_are_classified() {
        assert!(matches!(parse_observations("{ not json"), Err(Error::Parse(_))));
        let e = parse_observations(r#"{"version": 1, "cameras": [{"intrinsics": {"focal": 1, "cx": 0, "cy": 0}}], "records": []}"#);
        match e {
            Err(Error::Schema(m)) => assert!(m.contains("height"), "{m}"),
            other => panic!("{other:?}"),
        }
        let e = parse_observations(
            r#"{"version": 1, "cameras": [{"intrinsics": {"focal": -5, "cx": 0, "cy": 0, "height": 10}}], "records": []}"#,
        );
        assert!(matches!(e, Err(Error::InconsistentIntrinsics(_))));
        let e = parse_observations(r#"{"version": 2, "cameras": [], "records": []}"#);
        assert!(matches!(e, Err(Error::Schema(_))));
    }

    #[test]
    fn duplicate_pairs_are_rejected() {
        let text = r#"{"version": 1, "cameras": [{"intrinsics": "fastec"}], "records": [
            {"camera_index": 0, "scanline_y_pixels": 5, "line_id": 3, "x_pixels": 1},
            {"camera_index": 0, "scanline_y_pixels": 5, "line_id": 3, "x_pixels": 2}]}"#;
        match parse_observations(text) {
            Err(Error::Schema(m)) => assert!(m.contains("twice")),
            other => panic!("{other:?}"),
        }
    }

    fn pose_json(p: &CameraPose) -> String {
        serde_json::to_string(&PoseRecord::from_pose(p)).unwrap()
    }

    fn with_poses(y: f64, first: &CameraPose, middle: &CameraPose) -> String {
        format!(
            r#"{{"version": 1, "cameras": [{{"intrinsics": "fastec", "first_pose": {}, "middle_pose": {}}}],
                "records": [{{"camera_index": 0, "scanline_y_pixels": {y}, "line_id": 0, "x_pixels": 100}}]}}"#,
            pose_json(first),
            pose_json(middle)
        )
    }

    #[test]
    fn pseudo_ground_truth_interpolates() {
        let first = CameraPose::new(exp_so3(&Vector3::new(0.1, 0.2, -0.1)), Vector3::new(1.0, 2.0, 3.0), 0.0);
        let middle = CameraPose::new(exp_so3(&Vector3::new(0.0, 0.3, 0.0)), Vector3::new(1.5, 2.0, 2.0), 0.0);
        // middle row: the middle pose itself
        let l = parse_observations(&with_poses(240.0, &first, &middle)).unwrap();
        let p = l.pseudo_gt[0].as_ref().unwrap();
        assert!((p.rotation - middle.rotation).amax() < 1e-15 && (p.center - middle.center).norm() < 1e-15);
        assert_eq!(p.scanline_y, 0.0);
        // first row: the first pose
        let l = parse_observations(&with_poses(0.0, &first, &middle)).unwrap();
        let p = l.pseudo_gt[0].as_ref().unwrap();
        assert!((p.rotation - first.rotation).amax() < 1e-14 && (p.center - first.center).norm() < 1e-14);
        // quarter height: halfway in center and in rotation angle
        let l = parse_observations(&with_poses(120.0, &first, &middle)).unwrap();
        let p = l.pseudo_gt[0].as_ref().unwrap();
        assert!((p.center - Vector3::new(1.25, 2.0, 2.5)).norm() < 1e-14);
        let half = crate::geometry::rotation::rotation_angle(&(p.rotation * middle.rotation.transpose()));
        let full = crate::geometry::rotation::rotation_angle(&(first.rotation * middle.rotation.transpose()));
        assert!((2.0 * half - full).abs() < 1e-12);
    }

    #[test]
    fn one_sided_pose_pair_is_rejected() {
        let p = pose_json(&CameraPose::new(Matrix3::identity(), Vector3::zeros(), 0.0));
        let text = format!(
            r#"{{"version": 1, "cameras": [{{"intrinsics": "fastec", "first_pose": {p}}}], "records": []}}"#
        );
        assert!(matches!(parse_observations(&text), Err(Error::Schema(_))));
    }

    #[test]
    fn simulated_instance_roundtrips() {
        for setting in [Setting::B, Setting::D, Setting::E] {
            let inst = sample_scene(&SceneConfig::new(setting, 4, 6, 17)).unwrap();
            let k = Intrinsics::synthetic(1000.0);
            let text = ObservationFile::from_instance(&inst, &k).to_json().unwrap();
            let loaded = parse_observations(&text).unwrap();
            let grid = loaded.grid().unwrap();
            for (a, b) in grid.observations().iter().zip(inst.observations.observations()) {
                assert_eq!((a.camera_index, a.line_index), (b.camera_index, b.line_index));
                assert!((a.x - b.x).abs() <= 1e-12 && (a.scanline_y - b.scanline_y).abs() <= 1e-12);
                match (a.gravity, b.gravity) {
                    (Some(g), Some(h)) => assert!((g - h).norm() <= 1e-12),
                    (None, None) => {}
                    _ => panic!("gravity lost"),
                }
            }
        }
    }

    #[test]
    fn ground_truth_sidecar_roundtrips() {
        let inst = sample_scene(&SceneConfig::new(Setting::D, 3, 7, 2)).unwrap();
        let gt = GroundTruthFile::from_instance(&inst, 2);
        let back: GroundTruthFile = serde_json::from_str(&gt.to_json().unwrap()).unwrap();
        assert_eq!(back, gt);
        assert_eq!(back.poses(), inst.gt_poses);
    }
}
