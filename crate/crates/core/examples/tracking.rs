//! Tracks a panel passing behind a pillar with modal and amodal flow.
//!
//!     cargo run --example tracking

use amflow::synthgen::{frame_ground_truth, frame_segmentation, scenes};
use amflow::tracking::{detections_from_instances, track_and_score, FlowSource, TrackMode, DEFAULT_MIN_IOU};

fn main() -> amflow::Result<()> {
    let scene = &scenes::occlusion_bridging_scenes()[0];
    let frames = scene.frames;
    let gts = (0..frames - 1)
        .map(|t| frame_ground_truth(scene, t))
        .collect::<amflow::Result<Vec<_>>>()?;
    let last = frame_segmentation(scene, frames - 1)?;
    let segs: Vec<_> = gts.iter().map(|g| &g.segmentation).chain([&last]).collect();

    for mode in [TrackMode::Modal, TrackMode::Amodal] {
        let dets: Vec<_> = segs.iter().map(|s| detections_from_instances(&s.instances, mode)).collect();
        let flows: Vec<FlowSource> = gts
            .iter()
            .map(|g| match mode {
                TrackMode::Modal => FlowSource::Modal(&g.modal_flow),
                TrackMode::Amodal => FlowSource::Amodal(&g.amodal_stack),
            })
            .collect();
        let report = track_and_score(&dets, &flows, mode, DEFAULT_MIN_IOU)?;
        println!("{mode:?}: {} id switch(es) over {} checks", report.score.id_switches, report.score.checks);
        for f in &report.frames {
            let ids: Vec<String> = f.assignments.iter().map(|a| format!("{}->{}", a.instance, a.track)).collect();
            println!("  frame {}: {}", f.frame, ids.join(" "));
        }
    }
    Ok(())
}
