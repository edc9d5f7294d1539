use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::motion::{background_flow, object_flow};
use super::render::{compose_visibility, render_background_depth, render_object_depth, ObjectDepth};
use super::SceneSpec;
use crate::error::{Error, Result};
use crate::flow::{FlowField, LayeredFlowStack, LevelField};
use crate::io;
use crate::raster::{DepthMap, IdMap, Mask};
use crate::stratify::{stratify, InstanceMaskSet, OcclusionEvidence, OcclusionGraph};

/// Rendering and stratification of a single frame.
#[derive(Debug, Clone)]
pub struct FrameSegmentation {
    pub instances: InstanceMaskSet,
    /// Amodal depth per instance, in the instance set's order.
    pub object_depths: Vec<DepthMap>,
    pub background_depth: DepthMap,
    pub visible_ids: IdMap,
    pub graph: OcclusionGraph,
}

/// Complete labels for the frame pair `(t, t + 1)`.
#[derive(Debug, Clone)]
pub struct FrameGroundTruth {
    pub segmentation: FrameSegmentation,
    pub modal_flow: FlowField,
    pub amodal_stack: LayeredFlowStack,
}

pub fn frame_segmentation(scene: &SceneSpec, t: usize) -> Result<FrameSegmentation> {
    if t >= scene.frames {
        return Err(Error::Scene(format!("frame {t} outside a {}-frame scene", scene.frames)));
    }
    let cam = &scene.camera;
    let cam_pose = &scene.camera_poses[t];
    let rendered = scene
        .objects
        .iter()
        .map(|o| {
            Ok(ObjectDepth {
                id: o.id,
                class_label: o.class.clone(),
                depth: render_object_depth(&o.shape, &o.poses[t], cam_pose, cam)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let background_depth = render_background_depth(&scene.background, cam_pose, cam);
    let (visible_ids, instances) = compose_visibility(&rendered, &background_depth)?;
    let object_depths: Vec<DepthMap> = instances
        .instances()
        .iter()
        .map(|inst| {
            rendered
                .iter()
                .find(|r| r.id == inst.id)
                .expect("instance comes from a rendered object")
                .depth
                .clone()
        })
        .collect();
    let graph = stratify(&instances, OcclusionEvidence::Depth(&object_depths))?;
    Ok(FrameSegmentation {
        instances,
        object_depths,
        background_depth,
        visible_ids,
        graph,
    })
}

/// Ground truth for the pair `(t, t + 1)`, anchored at frame `t`.
pub fn frame_ground_truth(scene: &SceneSpec, t: usize) -> Result<FrameGroundTruth> {
    if t + 1 >= scene.frames {
        return Err(Error::Scene(format!(
            "frame {t} has no successor in a {}-frame scene",
            scene.frames
        )));
    }
    let seg = frame_segmentation(scene, t)?;
    let cam = &scene.camera;
    let (w, h) = (cam.width, cam.height);
    let (cam_t, cam_t1) = (&scene.camera_poses[t], &scene.camera_poses[t + 1]);

    let bg = background_flow(cam_t, cam_t1, &seg.background_depth, cam)?;
    let mut object_flows = Vec::with_capacity(seg.instances.len());
    for (inst, depth) in seg.instances.instances().iter().zip(&seg.object_depths) {
        let obj = scene
            .objects
            .iter()
            .find(|o| o.id == inst.id)
            .expect("instance comes from a scene object");
        object_flows.push(object_flow(&obj.poses[t], &obj.poses[t + 1], cam_t, cam_t1, depth, cam)?);
    }

    let num_levels = seg.graph.num_levels();
    let mut levels = vec![LevelField {
        mask: bg.valid.clone(),
        flow: bg.flow.clone(),
    }];
    for n in 1..num_levels {
        let mut mask = Mask::empty(w, h);
        let mut flow = FlowField::zeros(w, h);
        for (inst, motion) in seg.instances.instances().iter().zip(&object_flows) {
            if seg.graph.level(inst.id) != Some(n) {
                continue;
            }
            for (x, y) in motion.valid.pixels() {
                // exact depth ties can overlap within a level; lower id keeps the pixel
                if !mask.get(x, y) {
                    mask.set(x, y, true);
                    flow.set(x, y, motion.flow.get(x, y));
                }
            }
        }
        levels.push(LevelField { mask, flow });
    }

    let mut modal_flow = bg.flow.clone();
    for (inst, motion) in seg.instances.instances().iter().zip(&object_flows) {
        for (x, y) in inst.visible.pixels() {
            modal_flow.set(x, y, motion.flow.get(x, y));
        }
    }

    Ok(FrameGroundTruth {
        segmentation: seg,
        modal_flow,
        amodal_stack: LayeredFlowStack::new(levels)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestObject {
    pub id: u32,
    pub class: String,
    pub level: usize,
    pub amodal_pixels: usize,
    pub visible_pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub frame: usize,
    /// Whether the frame directory holds a flow stack (every frame but the last).
    pub has_flow: bool,
    pub num_levels: usize,
    pub objects: Vec<ManifestObject>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub frames: Vec<ManifestFrame>,
}

pub const MANIFEST_NAME: &str = "manifest.json";
pub const MODAL_FLOW_NAME: &str = "modal.flo";
pub const ID_MAP_NAME: &str = "ids.png";

fn write_segmentation(seg: &FrameSegmentation, dir: &Path) -> Result<()> {
    io::write_id_png(&seg.visible_ids, dir.join(ID_MAP_NAME))?;
    for inst in seg.instances.instances() {
        io::write_mask_png(&inst.amodal, dir.join(io::amodal_mask_name(inst.id)))?;
    }
    Ok(())
}

fn manifest_frame(frame: usize, has_flow: bool, seg: &FrameSegmentation) -> ManifestFrame {
    let objects = seg
        .instances
        .instances()
        .iter()
        .map(|inst| ManifestObject {
            id: inst.id,
            class: inst.class_label.clone(),
            level: seg.graph.level(inst.id).unwrap_or(1),
            amodal_pixels: inst.amodal.count(),
            visible_pixels: inst.visible.count(),
        })
        .collect();
    ManifestFrame {
        frame,
        has_flow,
        num_levels: seg.graph.num_levels(),
        objects,
    }
}

/// Renders every frame of `scene` into `out_dir`.
///
/// Frame `t` gets `ids.png` and `inst_<id>_amodal.png`; every frame with a
/// successor additionally gets `modal.flo` and the layered stack. Frames are
/// processed on the current rayon pool; the output does not depend on its size.
pub fn generate(scene: &SceneSpec, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    scene.validate()?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let frames = (0..scene.frames)
        .into_par_iter()
        .map(|t| -> Result<ManifestFrame> {
            let dir = out_dir.join(io::frame_dir_name(t));
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            if t + 1 < scene.frames {
                let gt = frame_ground_truth(scene, t)?;
                write_segmentation(&gt.segmentation, &dir)?;
                io::write_flo(&gt.modal_flow, dir.join(MODAL_FLOW_NAME))?;
                io::write_stack_dir(&gt.amodal_stack, &dir)?;
                Ok(manifest_frame(t, true, &gt.segmentation))
            } else {
                let seg = frame_segmentation(scene, t)?;
                write_segmentation(&seg, &dir)?;
                Ok(manifest_frame(t, false, &seg))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        width: scene.camera.width,
        height: scene.camera.height,
        frame_count: scene.frames,
        frames,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    io::write_atomic(&out_dir.join(MANIFEST_NAME), text.as_bytes())?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{evaluate_stack, LevelWeights};
    use crate::synthgen::scenes;

    #[test]
    fn single_moving_object_static_camera() {
        let scene = scenes::translation_scene();
        let gt = frame_ground_truth(&scene, 0).unwrap();
        assert_eq!(gt.amodal_stack.num_levels(), 2);
        let l1 = &gt.amodal_stack.levels()[1];
        assert!(l1.mask.count() > 0);
        for (x, y) in l1.mask.pixels() {
            let (u, v) = l1.flow.get(x, y);
            assert!((u - 10.0).abs() <= 1e-4 && v.abs() <= 1e-4);
        }
        let l0 = &gt.amodal_stack.levels()[0];
        assert!(l0.flow.u().iter().chain(l0.flow.v()).all(|&x| x == 0.0));
        assert_eq!(l0.mask.count(), l0.mask.bits().len());
    }

    #[test]
    fn occlusion_chain_gives_four_levels() {
        let scene = scenes::chain_scene();
        let gt = frame_ground_truth(&scene, 0).unwrap();
        let g = &gt.segmentation.graph;
        assert_eq!(gt.amodal_stack.num_levels(), 4);
        assert_eq!((g.level(1), g.level(2), g.level(3), g.level(4)), (Some(1), Some(2), Some(3), Some(1)));
    }

    #[test]
    fn modal_flow_matches_winner_level() {
        let scene = scenes::demo_scene();
        for t in [0, 4] {
            let gt = frame_ground_truth(&scene, t).unwrap();
            let seg = &gt.segmentation;
            let (w, _) = gt.modal_flow.dims();
            for (p, &id) in seg.visible_ids.data().iter().enumerate() {
                let level = if id == 0 { 0 } else { seg.graph.level(id).unwrap() };
                let lf = &gt.amodal_stack.levels()[level].flow;
                assert_eq!(gt.modal_flow.get(p % w, p / w), lf.get(p % w, p / w));
            }
            // same-level object masks never overlap
            for n in 1..gt.amodal_stack.num_levels() {
                let members = seg.graph.members(n);
                for (i, a) in members.iter().enumerate() {
                    for b in &members[i + 1..] {
                        let ma = &seg.instances.get(*a).unwrap().amodal;
                        let mb = &seg.instances.get(*b).unwrap().amodal;
                        assert!(!seg.graph.has_edge(*a, *b) && !seg.graph.has_edge(*b, *a));
                        assert_eq!(ma.intersection_count(mb).unwrap(), 0);
                    }
                }
            }
        }
    }

    #[test]
    fn self_evaluation_is_perfect() {
        let scene = scenes::demo_scene();
        let gt = frame_ground_truth(&scene, 2).unwrap();
        let r = evaluate_stack(&gt.amodal_stack, &gt.amodal_stack, &LevelWeights::default()).unwrap();
        assert_eq!(r.afq, Some(1.0));
    }

    #[test]
    fn time_reversal_negates_constant_flow() {
        let scene = scenes::translation_scene();
        let fwd = frame_ground_truth(&scene, 0).unwrap();
        let rev = frame_ground_truth(&scene.reversed(), scene.frames - 2).unwrap();
        let (f1, r1) = (&fwd.amodal_stack.levels()[1], &rev.amodal_stack.levels()[1]);
        // the reversed pair is anchored one step later: shift by the flow
        assert_eq!(f1.mask.count(), r1.mask.count());
        for (x, y) in f1.mask.pixels() {
            let (u, v) = f1.flow.get(x, y);
            let (rx, ry) = (x + u.round() as usize, (y as f32 + v.round()) as usize);
            assert!(r1.mask.get(rx, ry));
            assert_eq!(r1.flow.get(rx, ry), (-u, -v));
        }
    }

    #[test]
    fn generate_writes_layout() {
        let dir = tempfile::tempdir().unwrap();
        let scene = scenes::chain_scene();
        let manifest = generate(&scene, dir.path()).unwrap();
        assert_eq!(manifest.frames.len(), scene.frames);
        let f0 = dir.path().join("frame_000000");
        for name in ["ids.png", "modal.flo", "level_0.flo", "level_3_mask.png", "inst_2_amodal.png"] {
            assert!(f0.join(name).is_file(), "{name}");
        }
        let last = dir.path().join(io::frame_dir_name(scene.frames - 1));
        assert!(last.join("ids.png").is_file() && !last.join("level_0.flo").exists());
        let gt = frame_ground_truth(&scene, 0).unwrap();
        assert_eq!(io::read_stack_dir(&f0).unwrap(), gt.amodal_stack);
        let back: Manifest =
            serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_NAME)).unwrap()).unwrap();
        assert_eq!(back, manifest);
    }
}
