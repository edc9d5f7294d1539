//! Orders instances into occlusion levels from pairwise relations,
//! including a cycle that has to be broken.
//!
//!     cargo run --example stratify

use amflow::stratify::{stratify, InstanceMask, InstanceMaskSet, OcclusionEvidence, PairwiseOcclusion};
use amflow::Mask;

fn main() -> amflow::Result<()> {
    let (w, h) = (40, 20);
    let boxes = [(1, 2, 2, 14, 12), (2, 8, 6, 22, 18), (3, 18, 1, 30, 10), (4, 26, 8, 38, 19)];
    let instances = boxes
        .iter()
        .map(|&(id, x0, y0, x1, y1)| InstanceMask {
            id,
            class_label: "box".into(),
            amodal: Mask::rect(w, h, x0, y0, x1, y1),
            visible: Mask::empty(w, h),
            mean_depth: None,
        })
        .collect();
    let set = InstanceMaskSet::new(w, h, instances)?;

    let edge = |front, behind, pixels| PairwiseOcclusion { front, behind, pixels };
    // 1 > 2 > 3 > 1 is a cycle; its weakest edge (3 over 1) goes
    let pairs = [edge(1, 2, 24), edge(2, 3, 16), edge(3, 1, 3), edge(3, 4, 8)];
    let graph = stratify(&set, OcclusionEvidence::Pairs(&pairs))?;

    for e in graph.removed_edges() {
        println!("dropped {} over {} ({} px)", e.front, e.behind, e.pixels);
    }
    for level in 1..graph.num_levels() {
        println!("level {level}: {:?}", graph.members(level));
    }
    Ok(())
}
