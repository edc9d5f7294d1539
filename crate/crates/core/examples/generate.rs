//! Renders a scene file (or the demo scene) to a ground-truth directory.
//!
//!     cargo run --example generate -- [scene.json] [out_dir]

use amflow::synthgen::{generate, scenes, SceneSpec};

fn main() -> amflow::Result<()> {
    let mut args = std::env::args().skip(1);
    let scene = match args.next() {
        Some(path) => SceneSpec::load(path)?,
        None => scenes::demo_scene(),
    };
    let out = args
        .next()
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("amflow_demo_gt"));
    let manifest = generate(&scene, &out)?;
    println!("{}x{}, {} frames -> {}", manifest.width, manifest.height, manifest.frame_count, out.display());
    for f in &manifest.frames {
        let hidden: usize = f.objects.iter().map(|o| o.amodal_pixels - o.visible_pixels).sum();
        println!(
            "frame {:>2}: {} levels, {} objects, {hidden} occluded px{}",
            f.frame,
            f.num_levels,
            f.objects.len(),
            if f.has_flow { "" } else { " (no successor, no flow)" }
        );
    }
    Ok(())
}
