//! Synthetic amodal flow ground truth from analytically ray-cast rigid
//! primitives.
//!
//! Conventions: camera frame x right, y down, z forward; poses map local
//! coordinates to world coordinates; rays pass through pixel centers; depth
//! is the camera-frame z coordinate; flow is anchored at frame `t`.

mod generate;
mod motion;
mod render;
pub mod scenes;

use std::path::Path;

use nalgebra::{Isometry3, Quaternion, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generate::{
    frame_ground_truth, frame_segmentation, generate, FrameGroundTruth, FrameSegmentation,
    Manifest, ManifestFrame, ManifestObject, ID_MAP_NAME, MANIFEST_NAME, MODAL_FLOW_NAME,
};
pub use motion::{background_flow, object_flow, MotionFlow};
pub use render::{compose_visibility, render_background_depth, render_object_depth, ObjectDepth};

/// Pinhole intrinsics and resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCamera")]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

#[derive(Deserialize)]
struct RawCamera {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
}

impl TryFrom<RawCamera> for CameraModel {
    type Error = Error;

    fn try_from(r: RawCamera) -> Result<Self> {
        CameraModel::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

impl CameraModel {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::Scene(format!("focal lengths must be positive, got {fx}, {fy}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::Scene("camera resolution must be positive".into()));
        }
        if !(cx > 0.0 && cx < width as f64 && cy > 0.0 && cy < height as f64) {
            return Err(Error::Scene(format!(
                "principal point ({cx}, {cy}) outside the {width}x{height} image"
            )));
        }
        Ok(CameraModel {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Camera-frame ray direction through the center of pixel `(x, y)`,
    /// scaled so its z component is 1.
    #[inline]
    pub fn ray(&self, x: usize, y: usize) -> Vector3<f64> {
        Vector3::new(
            (x as f64 + 0.5 - self.cx) / self.fx,
            (y as f64 + 0.5 - self.cy) / self.fy,
            1.0,
        )
    }

    /// Continuous pixel coordinates of a camera-frame point with `z > 0`.
    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> (f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }
}

/// Rigid transform from local to world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPose")]
pub struct RigidPose {
    /// Meters.
    pub translation: [f64; 3],
    /// Unit quaternion `(w, x, y, z)`.
    pub rotation: [f64; 4],
}

#[derive(Deserialize)]
struct RawPose {
    translation: [f64; 3],
    rotation: [f64; 4],
}

impl TryFrom<RawPose> for RigidPose {
    type Error = Error;

    fn try_from(r: RawPose) -> Result<Self> {
        RigidPose::new(r.translation, r.rotation)
    }
}

/// Allowed deviation of a rotation quaternion's norm from 1.
pub const QUATERNION_NORM_TOLERANCE: f64 = 1e-9;

impl RigidPose {
    pub fn new(translation: [f64; 3], rotation: [f64; 4]) -> Result<Self> {
        if translation.iter().chain(&rotation).any(|x| !x.is_finite()) {
            return Err(Error::Scene("pose contains non-finite values".into()));
        }
        let norm = rotation.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
            return Err(Error::Scene(format!(
                "rotation quaternion has norm {norm}, expected 1"
            )));
        }
        Ok(RigidPose {
            translation,
            rotation,
        })
    }

    pub fn identity() -> Self {
        RigidPose {
            translation: [0.0; 3],
            rotation: [1.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        RigidPose {
            translation: [x, y, z],
            rotation: [1.0, 0.0, 0.0, 0.0],
        }
    }

    /// Translation plus a rotation of `angle` radians about `axis`.
    pub fn from_axis_angle(translation: [f64; 3], axis: [f64; 3], angle: f64) -> Result<Self> {
        let axis = Vector3::from(axis);
        if axis.norm() == 0.0 {
            return Err(Error::Scene("rotation axis must be nonzero".into()));
        }
        let q = UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        RigidPose::new(translation, [q.w, q.i, q.j, q.k])
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        let [w, x, y, z] = self.rotation;
        let [tx, ty, tz] = self.translation;
        Isometry3::from_parts(
            Translation3::new(tx, ty, tz),
            UnitQuaternion::new_unchecked(Quaternion::new(w, x, y, z)),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// Axis-aligned box centered on the local origin.
    Box { width: f64, height: f64, depth: f64 },
    Sphere { radius: f64 },
    /// Rectangle in the local z = 0 plane, centered on the origin.
    Quad { width: f64, height: f64 },
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        let extents: &[f64] = match self {
            Shape::Box {
                width,
                height,
                depth,
            } => &[*width, *height, *depth],
            Shape::Sphere { radius } => &[*radius],
            Shape::Quad { width, height } => &[*width, *height],
        };
        if extents.iter().all(|&e| e > 0.0 && e.is_finite()) {
            Ok(())
        } else {
            Err(Error::Scene(format!("degenerate shape {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    /// Instance id, 1..=65535.
    pub id: u32,
    pub class: String,
    pub shape: Shape,
    /// One pose per frame.
    pub poses: Vec<RigidPose>,
}

pub const DEFAULT_FAR_DISTANCE: f64 = 500.0;

fn default_far() -> f64 {
    DEFAULT_FAR_DISTANCE
}

/// Static background: an optional ground plane `y_world = ground_height`
/// (y points down) and a far plane at camera depth `far_distance` that
/// catches every ray the ground misses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub ground_height: Option<f64>,
    #[serde(default = "default_far")]
    pub far_distance: f64,
}

impl Default for Background {
    fn default() -> Self {
        Background {
            ground_height: None,
            far_distance: DEFAULT_FAR_DISTANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub camera: CameraModel,
    /// Camera-to-world pose per frame.
    pub camera_poses: Vec<RigidPose>,
    pub objects: Vec<SceneObject>,
    #[serde(default)]
    pub background: Background,
    pub frames: usize,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::Scene("scene needs at least one frame".into()));
        }
        if self.camera_poses.len() != self.frames {
            return Err(Error::Scene(format!(
                "{} camera poses for {} frames",
                self.camera_poses.len(),
                self.frames
            )));
        }
        if !(self.background.far_distance > 0.0 && self.background.far_distance.is_finite()) {
            return Err(Error::Scene("far plane distance must be positive".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for obj in &self.objects {
            if obj.id == 0 || obj.id > u16::MAX as u32 {
                return Err(Error::Scene(format!("object id {} outside 1..=65535", obj.id)));
            }
            if !ids.insert(obj.id) {
                return Err(Error::Scene(format!("duplicate object id {}", obj.id)));
            }
            obj.shape.validate()?;
            if obj.poses.len() != self.frames {
                return Err(Error::Scene(format!(
                    "object {} has {} poses for {} frames",
                    obj.id,
                    obj.poses.len(),
                    self.frames
                )));
            }
        }
        Ok(())
    }

    /// The first `frames` frames of this scene.
    pub fn truncated(&self, frames: usize) -> Result<SceneSpec> {
        if frames == 0 || frames > self.frames {
            return Err(Error::Scene(format!(
                "cannot take {frames} frames from a {}-frame scene",
                self.frames
            )));
        }
        let mut s = self.clone();
        s.frames = frames;
        s.camera_poses.truncate(frames);
        for obj in &mut s.objects {
            obj.poses.truncate(frames);
        }
        Ok(s)
    }

    /// The same scene played backwards.
    pub fn reversed(&self) -> SceneSpec {
        let mut s = self.clone();
        s.camera_poses.reverse();
        for obj in &mut s.objects {
            obj.poses.reverse();
        }
        s
    }

    pub fn from_json(text: &str) -> Result<SceneSpec> {
        let scene: SceneSpec = serde_json::from_str(text)
            .map_err(|e| Error::Scene(format!("cannot parse scene: {e}")))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SceneSpec> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SceneSpec::from_json(&text).map_err(|e| match e {
            Error::Scene(msg) => Error::Scene(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scene serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn camera_validation() {
        assert!(CameraModel::new(100.0, 100.0, 64.0, 48.0, 128, 96).is_ok());
        assert!(CameraModel::new(0.0, 100.0, 64.0, 48.0, 128, 96).is_err());
        assert!(CameraModel::new(100.0, 100.0, 128.0, 48.0, 128, 96).is_err());
    }

    #[test]
    fn pose_requires_unit_quaternion() {
        assert!(RigidPose::new([0.0; 3], [1.0, 0.0, 0.0, 0.0]).is_ok());
        assert!(RigidPose::new([0.0; 3], [1.0, 1e-3, 0.0, 0.0]).is_err());
        let p = RigidPose::from_axis_angle([1.0, 2.0, 3.0], [0.0, 1.0, 0.0], 0.7).unwrap();
        let q = p.rotation;
        assert!(((q.iter().map(|x| x * x).sum::<f64>()).sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scene_json_round_trip_and_validation() {
        let scene = scenes::demo_scene();
        let back = SceneSpec::from_json(&scene.to_json()).unwrap();
        assert_eq!(back, scene);
        let mut bad = scene.clone();
        bad.objects[1].id = bad.objects[0].id;
        assert!(matches!(SceneSpec::from_json(&bad.to_json()), Err(Error::Scene(_))));
        let mut short = scene.clone();
        short.objects[0].poses.pop();
        assert!(SceneSpec::from_json(&short.to_json()).is_err());
        assert!(SceneSpec::from_json("{\"camera\": 3}").is_err());
        let degenerate = scene.to_json().replacen("\"radius\": 0.6", "\"radius\": 0.0", 1);
        assert!(SceneSpec::from_json(&degenerate).is_err());
    }

    #[test]
    fn truncation() {
        let scene = scenes::demo_scene();
        let t = scene.truncated(3).unwrap();
        assert_eq!(t.frames, 3);
        assert!(t.validate().is_ok());
        assert!(scene.truncated(scene.frames + 1).is_err());
    }
}
