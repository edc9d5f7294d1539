use nalgebra::{Isometry3, Point3};

use super::{CameraModel, RigidPose};
use crate::error::{check_dims, Result};
use crate::flow::FlowField;
use crate::raster::{DepthMap, Mask};

/// Flow of one rigid body plus the pixels where it is defined.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionFlow {
    /// Zero outside `valid`.
    pub flow: FlowField,
    /// Finite depth at `t` and in front of the camera at `t + 1`.
    pub valid: Mask,
}

/// Reprojection flow of a rigid body between frames `t` and `t + 1`.
///
/// Each pixel with finite depth is back-projected in camera `t`, carried
/// through the object's motion and the camera's motion, and projected in
/// camera `t + 1`. Points ending up at `z <= 0` are marked invalid.
pub fn object_flow(
    pose_t: &RigidPose,
    pose_t1: &RigidPose,
    cam_pose_t: &RigidPose,
    cam_pose_t1: &RigidPose,
    depth_t: &DepthMap,
    camera: &CameraModel,
) -> Result<MotionFlow> {
    let motion: Isometry3<f64> = cam_pose_t1.to_isometry().inverse()
        * pose_t1.to_isometry()
        * pose_t.to_isometry().inverse()
        * cam_pose_t.to_isometry();
    reproject(&motion, depth_t, camera)
}

/// Flow of the static world under camera motion, over the whole frame.
pub fn background_flow(
    cam_pose_t: &RigidPose,
    cam_pose_t1: &RigidPose,
    background_depth: &DepthMap,
    camera: &CameraModel,
) -> Result<MotionFlow> {
    let motion = cam_pose_t1.to_isometry().inverse() * cam_pose_t.to_isometry();
    reproject(&motion, background_depth, camera)
}

fn reproject(motion: &Isometry3<f64>, depth: &DepthMap, camera: &CameraModel) -> Result<MotionFlow> {
    let (w, h) = (camera.width, camera.height);
    check_dims((w, h), depth.dims())?;
    let mut flow = FlowField::zeros(w, h);
    let mut valid = Mask::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            let d = *depth.get(x, y);
            if !d.is_finite() {
                continue;
            }
            let moved = motion * Point3::from(camera.ray(x, y) * d);
            if moved.z <= 0.0 {
                continue;
            }
            let (px, py) = camera.project(&moved.coords);
            let (u, v) = (px - (x as f64 + 0.5), py - (y as f64 + 0.5));
            flow.set(x, y, (u as f32, v as f32));
            valid.set(x, y, true);
        }
    }
    Ok(MotionFlow { flow, valid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Raster;
    use crate::synthgen::{render_background_depth, render_object_depth, Background, Shape};

    fn camera() -> CameraModel {
        CameraModel::new(100.0, 100.0, 40.0, 30.0, 80, 60).unwrap()
    }

    #[test]
    fn lateral_translation_gives_constant_flow() {
        let cam = camera();
        let shape = Shape::Quad { width: 2.0, height: 1.0 };
        let p0 = RigidPose::from_translation(0.0, 0.0, 10.0);
        let p1 = RigidPose::from_translation(1.0, 0.0, 10.0);
        let still = RigidPose::identity();
        let depth = render_object_depth(&shape, &p0, &still, &cam).unwrap();
        let m = object_flow(&p0, &p1, &still, &still, &depth, &cam).unwrap();
        assert!(m.valid.count() > 0);
        for (x, y) in m.valid.pixels() {
            let (u, v) = m.flow.get(x, y);
            assert!((u - 10.0).abs() <= 1e-4 && v.abs() <= 1e-4);
        }
        // zero outside the object
        assert!(Mask::from_fn(80, 60, |x, y| !m.valid.get(x, y))
            .pixels()
            .all(|(x, y)| m.flow.get(x, y) == (0.0, 0.0)));
    }

    #[test]
    fn no_motion_no_flow() {
        let cam = camera();
        let p = RigidPose::from_axis_angle([0.3, -0.2, 7.0], [0.0, 1.0, 0.0], 0.4).unwrap();
        let c = RigidPose::from_axis_angle([1.0, 0.0, -2.0], [1.0, 0.0, 0.0], 0.1).unwrap();
        let depth = render_object_depth(&Shape::Box { width: 1.0, height: 1.0, depth: 1.0 }, &p, &c, &cam).unwrap();
        let m = object_flow(&p, &p, &c, &c, &depth, &cam).unwrap();
        assert!(m.valid.count() > 0);
        assert!(m.flow.u().iter().chain(m.flow.v()).all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn camera_translation_flow_depends_on_depth() {
        let cam = camera();
        // slanted depth: plane seen at varying depth
        let depth = Raster::from_fn(80, 60, |x, _| 5.0 + x as f64 * 0.1);
        let still = RigidPose::identity();
        let moved = RigidPose::from_translation(0.5, 0.0, 0.0);
        let m = background_flow(&still, &moved, &depth, &cam).unwrap();
        for y in [0usize, 30, 59] {
            for x in [0usize, 17, 79] {
                let (u, v) = m.flow.get(x, y);
                let expected = -100.0 * 0.5 / depth.get(x, y);
                assert!((u as f64 - expected).abs() < 1e-4, "{u} vs {expected}");
                assert!(v.abs() < 1e-5);
            }
        }
    }

    #[test]
    fn forward_motion_expands() {
        let cam = camera();
        let depth = render_background_depth(&Background::default(), &RigidPose::identity(), &cam);
        let fwd = RigidPose::from_translation(0.0, 0.0, 20.0);
        let m = background_flow(&RigidPose::identity(), &fwd, &depth, &cam).unwrap();
        // probe one pixel per quadrant around the principal point (40, 30)
        for (x, y) in [(10usize, 10usize), (70, 10), (10, 50), (70, 50)] {
            let (u, v) = m.flow.get(x, y);
            let (rx, ry) = (x as f64 + 0.5 - 40.0, y as f64 + 0.5 - 30.0);
            assert!(u as f64 * rx > 0.0 && v as f64 * ry > 0.0, "({x},{y}) -> ({u},{v})");
        }
    }

    #[test]
    fn roll_gives_rotation_field() {
        let cam = camera();
        let theta: f64 = 0.05;
        for depth_value in [3.0, 40.0] {
            let depth = Raster::filled(80, 60, depth_value);
            let rolled = RigidPose::from_axis_angle([0.0; 3], [0.0, 0.0, 1.0], theta).unwrap();
            let m = background_flow(&RigidPose::identity(), &rolled, &depth, &cam).unwrap();
            for (x, y) in [(0usize, 0usize), (79, 0), (5, 55), (40, 30), (61, 12)] {
                let (rx, ry) = (x as f64 + 0.5 - 40.0, y as f64 + 0.5 - 30.0);
                // static points rotate by -theta in the rolled camera
                let (c, s) = (theta.cos(), theta.sin());
                let eu = c * rx + s * ry - rx;
                let ev = -s * rx + c * ry - ry;
                let (u, v) = m.flow.get(x, y);
                assert!((u as f64 - eu).abs() < 1e-4 && (v as f64 - ev).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn points_behind_camera_are_invalid() {
        let cam = camera();
        let depth = Raster::filled(80, 60, 2.0);
        let back = RigidPose::from_translation(0.0, 0.0, 5.0);
        let m = background_flow(&RigidPose::identity(), &back, &depth, &cam).unwrap();
        assert!(m.valid.is_empty());
    }
}
