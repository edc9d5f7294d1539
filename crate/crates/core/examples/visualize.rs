//! Writes color-coded modal flow and the layered composite for a demo frame.
//!
//!     cargo run --example visualize -- [out_dir]

use amflow::io::write_rgb_png;
use amflow::synthgen::{frame_ground_truth, scenes};
use amflow::viz::{colorize, composite_visualization};

fn main() -> amflow::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(std::env::temp_dir);
    let gt = frame_ground_truth(&scenes::demo_scene(), 3)?;
    let modal = out.join("demo_modal.png");
    let layered = out.join("demo_layered.png");
    write_rgb_png(&colorize(&gt.modal_flow, None), &modal)?;
    write_rgb_png(&composite_visualization(&gt.amodal_stack), &layered)?;
    println!("wrote {} and {}", modal.display(), layered.display());
    Ok(())
}
