//! Maximum-score assignment of predicted tracks to detections.
//!
//!     cargo run --example hungarian

use amflow::tracking::hungarian_max;

fn main() -> amflow::Result<()> {
    // rows: warped track masks, columns: detections, entries: IoU
    let iou = vec![
        vec![0.80, 0.10, 0.00, 0.00],
        vec![0.75, 0.70, 0.05, 0.00],
        vec![0.00, 0.20, 0.00, 0.60],
    ];
    let a = hungarian_max(&iou)?;
    for (row, col) in &a.pairs {
        println!("track {row} -> detection {col} (IoU {:.2})", iou[*row][*col]);
    }
    println!("total {:.2}", a.total);
    Ok(())
}
