//! Direction and du/dx histograms of the demo scene's modal flow.
//!
//!     cargo run --example flow_stats

use amflow::stats::{flow_statistics, FlowStatistics};
use amflow::synthgen::{frame_ground_truth, scenes};

fn main() -> amflow::Result<()> {
    let scene = scenes::demo_scene();
    let mut stats = FlowStatistics::default();
    for t in 0..scene.frames - 1 {
        stats.merge(&flow_statistics(&frame_ground_truth(&scene, t)?.modal_flow));
    }
    let peak = *stats.direction.counts().iter().max().unwrap_or(&1).max(&1);
    println!("direction ({} vectors)", stats.direction.total());
    for (i, &c) in stats.direction.counts().iter().enumerate() {
        let (lo, _) = stats.direction.bin_edges(i);
        println!("{:>7.1} deg {:<40} {c}", lo.to_degrees(), "#".repeat((40 * c / peak) as usize));
    }
    let zero = stats.du_dx.bin_of(0.0);
    println!(
        "du/dx: {} of {} differences in the zero bin",
        stats.du_dx.counts()[zero],
        stats.du_dx.total()
    );
    Ok(())
}
