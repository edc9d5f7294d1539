//! Runs every infilling baseline on one demo frame and scores it.
//!
//!     cargo run --example baselines

use amflow::baselines::{InfillInput, InfillMethod};
use amflow::metrics::{evaluate_stack, level_weights};
use amflow::synthgen::{frame_ground_truth, scenes};

fn main() -> amflow::Result<()> {
    let gt = frame_ground_truth(&scenes::demo_scene(), 0)?;
    let seg = &gt.segmentation;
    let background = &gt.amodal_stack.levels()[0].flow;
    let weights = level_weights(8, 3, 0.25)?;

    for method in InfillMethod::ALL {
        for (label, bg) in [("modal background", None), ("true background", Some(background))] {
            let input = InfillInput::new(&gt.modal_flow, bg, &seg.instances, &seg.graph)?;
            let pred = method.run(&input)?;
            let r = evaluate_stack(&pred, &gt.amodal_stack, &weights)?;
            println!(
                "{:<14} {:<17} AFQ {:.4}  mWAUC {:.4}  mIoU {:.4}",
                method.name(),
                label,
                r.afq.unwrap_or(f64::NAN),
                r.mwauc,
                r.miou.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
