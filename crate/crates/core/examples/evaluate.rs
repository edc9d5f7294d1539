//! Scores a perturbed prediction against rendered ground truth.
//!
//!     cargo run --example evaluate

use amflow::metrics::{evaluate_stack, level_weights};
use amflow::synthgen::{frame_ground_truth, scenes};
use amflow::{FlowField, LayeredFlowStack, LevelField};

fn main() -> amflow::Result<()> {
    let gt = frame_ground_truth(&scenes::demo_scene(), 0)?.amodal_stack;
    let weights = level_weights(8, 3, 0.25)?;
    println!("level weights {:?}", weights.weights());

    // shift every vector by half a pixel and drop the deepest level's mask
    let deepest = gt.num_levels() - 1;
    let levels = gt
        .levels()
        .iter()
        .enumerate()
        .map(|(n, l)| {
            let flow = FlowField::from_fn(l.flow.width(), l.flow.height(), |x, y| {
                let (u, v) = l.flow.get(x, y);
                (u + 0.5, v)
            })?;
            let mask = if n == deepest { amflow::Mask::empty(l.mask.width(), l.mask.height()) } else { l.mask.clone() };
            LevelField::new(mask, flow)
        })
        .collect::<amflow::Result<Vec<_>>>()?;
    let pred = LayeredFlowStack::new(levels)?;

    print!("{}", evaluate_stack(&pred, &gt, &weights)?.to_table());
    Ok(())
}
