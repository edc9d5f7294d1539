use nalgebra::{Isometry3, Point3, Vector3};

use super::{Background, CameraModel, RigidPose, Shape};
use crate::error::{check_dims, Result};
use crate::raster::{DepthMap, IdMap, Mask, Raster};
use crate::stratify::{InstanceMask, InstanceMaskSet};

const PARALLEL_EPS: f64 = 1e-12;

/// Nearest positive ray parameter of a hit, in the primitive's local frame.
fn intersect(shape: &Shape, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<f64> {
    match *shape {
        Shape::Sphere { radius } => {
            let o = origin.coords;
            let a = dir.norm_squared();
            let b = o.dot(dir);
            let c = o.norm_squared() - radius * radius;
            let disc = b * b - a * c;
            if disc < 0.0 {
                return None;
            }
            let root = disc.sqrt();
            let near = (-b - root) / a;
            let far = (-b + root) / a;
            [near, far].into_iter().find(|&t| t > 0.0)
        }
        Shape::Box {
            width,
            height,
            depth,
        } => {
            let half = [width / 2.0, height / 2.0, depth / 2.0];
            let mut t_near = f64::NEG_INFINITY;
            let mut t_far = f64::INFINITY;
            for axis in 0..3 {
                let (o, d, h) = (origin[axis], dir[axis], half[axis]);
                if d.abs() < PARALLEL_EPS {
                    if o.abs() > h {
                        return None;
                    }
                    continue;
                }
                let (t1, t2) = ((-h - o) / d, (h - o) / d);
                t_near = t_near.max(t1.min(t2));
                t_far = t_far.min(t1.max(t2));
            }
            if t_near > t_far || t_far <= 0.0 {
                None
            } else if t_near > 0.0 {
                Some(t_near)
            } else {
                Some(t_far)
            }
        }
        Shape::Quad { width, height } => {
            if dir.z.abs() < PARALLEL_EPS {
                return None;
            }
            let t = -origin.z / dir.z;
            if t <= 0.0 {
                return None;
            }
            let hit = origin + dir * t;
            (hit.x.abs() <= width / 2.0 && hit.y.abs() <= height / 2.0).then_some(t)
        }
    }
}

/// Amodal depth of one object, ignoring every other piece of geometry:
/// finite where a pixel-center ray hits it, `+inf` elsewhere.
pub fn render_object_depth(
    shape: &Shape,
    pose: &RigidPose,
    camera_pose: &RigidPose,
    camera: &CameraModel,
) -> Result<DepthMap> {
    shape.validate()?;
    // camera frame -> object frame
    let cam_to_obj: Isometry3<f64> = pose.to_isometry().inverse() * camera_pose.to_isometry();
    let origin = cam_to_obj * Point3::origin();
    Ok(Raster::from_fn(camera.width, camera.height, |x, y| {
        let dir = cam_to_obj.rotation * camera.ray(x, y);
        // ray z component is 1 in the camera frame, so the parameter is the depth
        intersect(shape, &origin, &dir).unwrap_or(f64::INFINITY)
    }))
}

/// Depth of the static background: the ground plane where it is hit within
/// the far distance, the far plane everywhere else.
pub fn render_background_depth(
    background: &Background,
    camera_pose: &RigidPose,
    camera: &CameraModel,
) -> DepthMap {
    let iso = camera_pose.to_isometry();
    let center = iso.translation.vector;
    let far = background.far_distance;
    Raster::from_fn(camera.width, camera.height, |x, y| {
        let ground = background.ground_height.and_then(|h| {
            let dir = iso.rotation * camera.ray(x, y);
            if dir.y.abs() < PARALLEL_EPS {
                return None;
            }
            let t = (h - center.y) / dir.y;
            (t > 0.0 && t <= far).then_some(t)
        });
        ground.unwrap_or(far)
    })
}

/// An object's rendered amodal depth.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectDepth {
    pub id: u32,
    pub class_label: String,
    pub depth: DepthMap,
}

/// Z-buffers objects against the background.
///
/// Per pixel the smallest finite depth wins; exact ties go to the lower id,
/// with the background counting as id 0. Objects with an empty amodal mask
/// are left out of the instance set.
pub fn compose_visibility(
    objects: &[ObjectDepth],
    background: &DepthMap,
) -> Result<(IdMap, InstanceMaskSet)> {
    let (w, h) = background.dims();
    for o in objects {
        check_dims((w, h), o.depth.dims())?;
    }
    let mut order: Vec<usize> = (0..objects.len()).collect();
    order.sort_by_key(|&k| objects[k].id);
    let mut winner = IdMap::filled(w, h, 0);
    for p in 0..w * h {
        let mut best = background.data()[p];
        let mut id = 0;
        for &k in &order {
            let d = objects[k].depth.data()[p];
            if d < best {
                best = d;
                id = objects[k].id;
            }
        }
        winner.data_mut()[p] = id;
    }
    let mut instances = Vec::new();
    for &k in &order {
        let o = &objects[k];
        let amodal = Mask::from_bits(w, h, o.depth.data().iter().map(|d| d.is_finite()).collect())?;
        if amodal.is_empty() {
            continue;
        }
        let visible = Mask::from_bits(w, h, winner.data().iter().map(|&i| i == o.id).collect())?;
        let finite: Vec<f64> = o.depth.data().iter().copied().filter(|d| d.is_finite()).collect();
        let mean_depth = finite.iter().sum::<f64>() / finite.len() as f64;
        instances.push(InstanceMask {
            id: o.id,
            class_label: o.class_label.clone(),
            amodal,
            visible,
            mean_depth: Some(mean_depth),
        });
    }
    Ok((winner, InstanceMaskSet::new(w, h, instances)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn camera() -> CameraModel {
        CameraModel::new(100.0, 100.0, 32.5, 24.5, 64, 48).unwrap()
    }

    #[test]
    fn sphere_on_axis() {
        let depth = render_object_depth(
            &Shape::Sphere { radius: 1.0 },
            &RigidPose::from_translation(0.0, 0.0, 10.0),
            &RigidPose::identity(),
            &camera(),
        )
        .unwrap();
        // pixel (32, 24) has its center on the principal point
        assert_eq!(*depth.get(32, 24), 9.0);
        assert!(depth.get(0, 0).is_infinite());
    }

    #[test]
    fn object_behind_camera_is_invisible() {
        for shape in [
            Shape::Sphere { radius: 1.0 },
            Shape::Box { width: 2.0, height: 2.0, depth: 2.0 },
            Shape::Quad { width: 4.0, height: 4.0 },
        ] {
            let depth = render_object_depth(
                &shape,
                &RigidPose::from_translation(0.0, 0.0, -5.0),
                &RigidPose::identity(),
                &camera(),
            )
            .unwrap();
            assert!(depth.data().iter().all(|d| d.is_infinite()));
        }
    }

    #[test]
    fn fronto_parallel_quad_has_constant_depth() {
        let depth = render_object_depth(
            &Shape::Quad { width: 1.0, height: 0.5 },
            &RigidPose::from_translation(0.0, 0.0, 5.0),
            &RigidPose::identity(),
            // principal point on a pixel corner keeps the quad edges off pixel centers
            &CameraModel::new(100.0, 100.0, 32.0, 24.0, 64, 48).unwrap(),
        )
        .unwrap();
        let hits: Vec<f64> = depth.data().iter().copied().filter(|d| d.is_finite()).collect();
        assert!(!hits.is_empty());
        assert!(hits.iter().all(|&d| d == 5.0));
        // projected half-extents: 100 * 0.5 / 5 = 10 px, 100 * 0.25 / 5 = 5 px
        assert_eq!(hits.len(), 20 * 10);
    }

    #[test]
    fn box_front_face_depth() {
        let depth = render_object_depth(
            &Shape::Box { width: 2.0, height: 2.0, depth: 2.0 },
            &RigidPose::from_translation(0.0, 0.0, 10.0),
            &RigidPose::identity(),
            &camera(),
        )
        .unwrap();
        assert_eq!(*depth.get(32, 24), 9.0);
    }

    #[test]
    fn camera_inside_box_sees_back_face() {
        let depth = render_object_depth(
            &Shape::Box { width: 4.0, height: 4.0, depth: 4.0 },
            &RigidPose::identity(),
            &RigidPose::identity(),
            &camera(),
        )
        .unwrap();
        assert_eq!(*depth.get(32, 24), 2.0);
    }

    #[test]
    fn degenerate_shape_rejected() {
        assert!(render_object_depth(
            &Shape::Sphere { radius: 0.0 },
            &RigidPose::identity(),
            &RigidPose::identity(),
            &camera()
        )
        .is_err());
    }

    #[test]
    fn ground_plane_and_far_plane() {
        let bg = Background {
            ground_height: Some(1.5),
            far_distance: 100.0,
        };
        let depth = render_background_depth(&bg, &RigidPose::identity(), &camera());
        // bottom row looks down: y_ray = (47.5 - 24.5) / 100 = 0.23 -> t = 1.5 / 0.23
        assert!((depth.get(0, 47) - 1.5 / 0.23).abs() < 1e-9);
        // top row looks up: far plane
        assert_eq!(*depth.get(0, 0), 100.0);
    }

    fn rect_depth(w: usize, h: usize, r: [usize; 4], d: f64) -> DepthMap {
        Raster::from_fn(w, h, |x, y| {
            if x >= r[0] && x < r[2] && y >= r[1] && y < r[3] {
                d
            } else {
                f64::INFINITY
            }
        })
    }

    #[test]
    fn single_object_fully_visible() {
        let bg = Raster::filled(10, 8, 100.0);
        let objs = [ObjectDepth { id: 3, class_label: "car".into(), depth: rect_depth(10, 8, [1, 1, 5, 5], 4.0) }];
        let (ids, set) = compose_visibility(&objs, &bg).unwrap();
        assert_eq!(set.instances()[0].visible, set.instances()[0].amodal);
        assert_eq!(ids.data().iter().filter(|&&i| i == 3).count(), 16);
    }

    #[test]
    fn nearer_object_hides_farther() {
        let bg = Raster::filled(10, 8, 100.0);
        let a = rect_depth(10, 8, [0, 0, 5, 5], 5.0);
        let b = rect_depth(10, 8, [3, 3, 8, 8], 8.0);
        let objs = [
            ObjectDepth { id: 2, class_label: "b".into(), depth: b },
            ObjectDepth { id: 1, class_label: "a".into(), depth: a },
        ];
        let (_, set) = compose_visibility(&objs, &bg).unwrap();
        let (ia, ib) = (set.get(1).unwrap(), set.get(2).unwrap());
        assert_eq!(ib.visible, ib.amodal.difference(&ia.amodal).unwrap());
        assert_eq!(ia.visible, ia.amodal);
    }

    #[test]
    fn depth_tie_goes_to_lower_id() {
        let bg = Raster::filled(4, 4, 100.0);
        let objs = [
            ObjectDepth { id: 7, class_label: String::new(), depth: rect_depth(4, 4, [0, 0, 4, 4], 3.0) },
            ObjectDepth { id: 5, class_label: String::new(), depth: rect_depth(4, 4, [0, 0, 2, 4], 3.0) },
        ];
        let (ids, _) = compose_visibility(&objs, &bg).unwrap();
        assert_eq!(*ids.get(0, 0), 5);
        assert_eq!(*ids.get(3, 0), 7);
    }
}
