//! Built-in scenes: the 8-object demo plus small fixtures with known
//! analytic answers.

use super::{Background, CameraModel, RigidPose, SceneObject, SceneSpec, Shape};

fn camera(width: usize, height: usize) -> CameraModel {
    CameraModel::new(100.0, 100.0, width as f64 / 2.0, height as f64 / 2.0, width, height)
        .expect("built-in camera is valid")
}

/// Constant-velocity poses without rotation.
fn linear(start: [f64; 3], step: [f64; 3], frames: usize) -> Vec<RigidPose> {
    (0..frames)
        .map(|t| {
            let t = t as f64;
            RigidPose::from_translation(
                start[0] + step[0] * t,
                start[1] + step[1] * t,
                start[2] + step[2] * t,
            )
        })
        .collect()
}

fn spinning(start: [f64; 3], step: [f64; 3], axis: [f64; 3], rate: f64, frames: usize) -> Vec<RigidPose> {
    (0..frames)
        .map(|t| {
            let tf = t as f64;
            let pos = [start[0] + step[0] * tf, start[1] + step[1] * tf, start[2] + step[2] * tf];
            RigidPose::from_axis_angle(pos, axis, rate * tf).expect("nonzero axis")
        })
        .collect()
}

fn object(id: u32, class: &str, shape: Shape, poses: Vec<RigidPose>) -> SceneObject {
    SceneObject {
        id,
        class: class.to_string(),
        shape,
        poses,
    }
}

fn quad(width: f64, height: f64) -> Shape {
    Shape::Quad { width, height }
}

fn static_scene_with(width: usize, height: usize, frames: usize, objects: Vec<SceneObject>) -> SceneSpec {
    SceneSpec {
        camera: camera(width, height),
        camera_poses: vec![RigidPose::identity(); frames],
        objects,
        background: Background::default(),
        frames,
    }
}

/// 128x96, 10 frames, forward-moving camera over a ground plane, eight
/// objects with nested occlusions.
pub fn demo_scene() -> SceneSpec {
    let frames = 10;
    let objects = vec![
        object(
            1,
            "car",
            Shape::Box { width: 1.8, height: 1.4, depth: 4.0 },
            linear([-1.6, 0.8, 13.0], [0.0, 0.0, 0.35], frames),
        ),
        object(
            2,
            "ball",
            Shape::Sphere { radius: 0.6 },
            linear([-1.2, 0.9, 8.0], [0.12, 0.0, 0.0], frames),
        ),
        object(
            3,
            "pedestrian",
            Shape::Box { width: 0.5, height: 1.7, depth: 0.5 },
            linear([0.4, 0.65, 10.0], [-0.08, 0.0, 0.0], frames),
        ),
        object(
            4,
            "sign",
            quad(1.2, 0.8),
            spinning([1.3, -0.4, 12.0], [0.0; 3], [0.0, 1.0, 0.0], 0.0, frames),
        ),
        object(
            5,
            "truck",
            Shape::Box { width: 2.5, height: 2.5, depth: 6.0 },
            linear([2.2, 0.25, 19.0], [-0.05, 0.0, 0.5], frames),
        ),
        object(
            6,
            "ball",
            Shape::Sphere { radius: 0.4 },
            linear([0.1, 1.1, 15.0], [0.05, 0.0, -0.1], frames),
        ),
        object(
            7,
            "crate",
            Shape::Box { width: 1.0, height: 1.0, depth: 1.0 },
            spinning([-3.0, 1.0, 17.0], [0.0; 3], [0.0, 1.0, 0.0], 0.15, frames),
        ),
        object(
            8,
            "billboard",
            quad(4.0, 2.0),
            linear([0.5, -1.5, 30.0], [0.0; 3], frames),
        ),
    ];
    SceneSpec {
        camera: camera(128, 96),
        camera_poses: linear([0.0; 3], [0.0, 0.0, 0.2], frames),
        objects,
        background: Background {
            ground_height: Some(1.5),
            far_distance: super::DEFAULT_FAR_DISTANCE,
        },
        frames,
    }
}

/// One fronto-parallel quad at depth 10 moving 1 m to the right per frame
/// in front of a static camera with fx = 100, i.e. 10 px of flow.
pub fn translation_scene() -> SceneSpec {
    static_scene_with(
        128,
        96,
        3,
        vec![object(
            1,
            "panel",
            quad(3.0, 2.0),
            linear([-2.0, 0.0, 10.0], [1.0, 0.0, 0.0], 3),
        )],
    )
}

/// Three quads stacked in depth (ids 1, 2, 3 front to back) plus an
/// unoccluded quad (id 4).
pub fn chain_scene() -> SceneSpec {
    let frames = 3;
    static_scene_with(
        128,
        96,
        frames,
        vec![
            object(1, "a", quad(1.0, 1.0), linear([-1.4, 0.0, 5.0], [0.1, 0.0, 0.0], frames)),
            object(2, "b", quad(2.0, 2.0), linear([-1.4, 0.6, 7.0], [0.0, -0.1, 0.0], frames)),
            object(3, "c", quad(3.0, 3.0), linear([-1.4, 1.2, 9.0], [0.0; 3], frames)),
            object(4, "d", quad(1.0, 1.0), linear([4.0, -1.5, 10.0], [-0.1, 0.0, 0.0], frames)),
        ],
    )
}

/// Static camera and static objects: every flow is zero.
pub fn static_scene() -> SceneSpec {
    let frames = 3;
    static_scene_with(
        96,
        64,
        frames,
        vec![
            object(1, "a", quad(1.0, 1.0), linear([-0.3, 0.0, 5.0], [0.0; 3], frames)),
            object(2, "b", quad(2.0, 1.0), linear([0.4, 0.2, 8.0], [0.0; 3], frames)),
        ],
    )
}

/// Rigid fronto-parallel translations with a static camera, each with
/// partially occluded objects. Flow is constant per object, so both
/// infilling baselines recover the occluded flow exactly.
pub fn infill_fixtures() -> Vec<SceneSpec> {
    let f = 2;
    vec![
        // right half of the back panel hidden by a static front panel
        static_scene_with(
            96,
            64,
            f,
            vec![
                object(1, "back", quad(2.0, 1.0), linear([-1.0, 0.0, 10.0], [1.0, 0.0, 0.0], f)),
                object(2, "front", quad(0.6, 1.0), linear([-0.2, 0.0, 5.0], [0.0; 3], f)),
            ],
        ),
        // lower-left corner hidden by a panel moving the other way
        static_scene_with(
            96,
            64,
            f,
            vec![
                object(1, "back", quad(2.0, 2.0), linear([0.2, -0.3, 10.0], [0.0, 0.5, 0.0], f)),
                object(2, "front", quad(0.8, 0.8), linear([-0.2, 0.2, 5.0], [-0.25, 0.0, 0.0], f)),
            ],
        ),
        // a three-deep chain with independent motions plus a free object
        static_scene_with(
            128,
            96,
            f,
            vec![
                object(1, "near", quad(0.6, 0.6), linear([-0.5, 0.0, 4.0], [0.1, 0.1, 0.0], f)),
                object(2, "mid", quad(1.5, 1.0), linear([-0.6, 0.2, 6.0], [-0.3, 0.0, 0.0], f)),
                object(3, "far", quad(3.0, 2.0), linear([-0.8, 0.4, 10.0], [0.5, -0.5, 0.0], f)),
                object(4, "free", quad(1.0, 1.0), linear([4.0, -2.5, 10.0], [-1.0, 0.0, 0.0], f)),
            ],
        ),
    ]
}

/// Two panels at different depths swapping horizontal positions.
pub fn crossing_scene() -> SceneSpec {
    let frames = 8;
    static_scene_with(
        128,
        64,
        frames,
        vec![
            object(1, "left", quad(0.8, 0.8), linear([-2.0, 0.0, 8.0], [0.5, 0.0, 0.0], frames)),
            object(2, "right", quad(1.0, 1.0), linear([2.5, 0.1, 10.0], [-0.6, 0.0, 0.0], frames)),
        ],
    )
}

/// Scenes in which object 2 is fully hidden for exactly one frame and then
/// reappears, plus a control scene without full occlusion (last).
pub fn occlusion_bridging_scenes() -> Vec<SceneSpec> {
    let f = 8;
    vec![
        // wide panel sliding slowly behind a static pillar
        static_scene_with(
            128,
            64,
            f,
            vec![
                object(1, "pillar", quad(1.2, 2.0), linear([0.0, 0.0, 5.0], [0.0; 3], f)),
                object(2, "panel", quad(2.0, 1.0), linear([-2.0, 0.0, 10.0], [0.5, 0.0, 0.0], f)),
            ],
        ),
        // slow vertical drop behind a wide sign, with an unrelated mover
        static_scene_with(
            128,
            96,
            f,
            vec![
                object(1, "sign", quad(2.0, 0.6), linear([0.0, 0.0, 5.0], [0.0; 3], f)),
                object(2, "drop", quad(0.8, 0.8), linear([0.2, -1.7, 10.0], [0.0, 0.5, 0.0], f)),
                object(3, "walker", quad(0.6, 1.0), linear([-5.0, 2.5, 10.0], [0.5, 0.0, 0.0], f)),
            ],
        ),
        // small panel passing quickly behind a static pillar
        static_scene_with(
            128,
            64,
            f,
            vec![
                object(1, "pillar", quad(0.8, 2.0), linear([0.0, 0.0, 5.0], [0.0; 3], f)),
                object(2, "panel", quad(0.6, 0.6), linear([-4.1, 0.0, 10.0], [1.0, 0.0, 0.0], f)),
            ],
        ),
        // panel and occluder moving in opposite directions
        static_scene_with(
            128,
            64,
            f,
            vec![
                object(1, "occluder", quad(1.0, 1.6), linear([0.6, 0.0, 5.0], [-0.2, 0.0, 0.0], f)),
                object(2, "panel", quad(0.6, 0.6), linear([-3.9, 0.1, 10.0], [1.0, 0.0, 0.0], f)),
            ],
        ),
        // control: partial occlusion only
        static_scene_with(
            128,
            64,
            f,
            vec![
                object(1, "pillar", quad(0.4, 2.0), linear([0.0, 0.0, 5.0], [0.0; 3], f)),
                object(2, "panel", quad(1.2, 0.6), linear([-4.0, 0.0, 10.0], [1.0, 0.0, 0.0], f)),
            ],
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::frame_segmentation;

    #[test]
    fn builtin_scenes_validate() {
        let mut all = vec![demo_scene(), translation_scene(), chain_scene(), static_scene(), crossing_scene()];
        all.extend(infill_fixtures());
        all.extend(occlusion_bridging_scenes());
        for s in &all {
            s.validate().unwrap();
        }
    }

    #[test]
    fn bundled_demo_file_matches() {
        let text = include_str!("../../data/demo_scene.json");
        assert_eq!(SceneSpec::from_json(text).unwrap(), demo_scene());
    }

    #[test]
    fn demo_has_eight_visible_objects_and_nesting() {
        let scene = demo_scene();
        assert_eq!((scene.camera.width, scene.camera.height, scene.frames), (128, 96, 10));
        for t in 0..scene.frames {
            let seg = frame_segmentation(&scene, t).unwrap();
            assert_eq!(seg.instances.len(), 8, "frame {t}");
            assert!(seg.graph.num_levels() >= 3, "frame {t}");
        }
    }

    fn hidden_frames(scene: &SceneSpec, id: u32) -> Vec<usize> {
        (0..scene.frames)
            .filter(|&t| {
                let seg = frame_segmentation(scene, t).unwrap();
                let inst = seg.instances.get(id).expect("object in view");
                inst.visible.is_empty()
            })
            .collect()
    }

    #[test]
    fn bridging_scenes_hide_exactly_one_frame() {
        let scenes = occlusion_bridging_scenes();
        let (bridging, control) = scenes.split_at(scenes.len() - 1);
        for s in bridging {
            let hidden = hidden_frames(s, 2);
            assert_eq!(hidden.len(), 1, "{hidden:?}");
            assert!(hidden[0] > 0 && hidden[0] + 1 < s.frames);
        }
        assert!(hidden_frames(&control[0], 2).is_empty());
    }

    #[test]
    fn infill_fixtures_have_occlusion() {
        for s in infill_fixtures() {
            let seg = frame_segmentation(&s, 0).unwrap();
            assert!(seg.instances.instances().iter().any(|i| i.visible.count() < i.amodal.count()));
            assert!(seg.instances.instances().iter().all(|i| !i.visible.is_empty()));
        }
    }
}
