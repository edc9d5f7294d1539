//! Round trips flow fields and layered stacks through the on-disk formats.
//!
//!     cargo run --example flow_io -- [out_dir]

use amflow::io;
use amflow::synthgen::{frame_ground_truth, scenes};

fn main() -> amflow::Result<()> {
    let out: std::path::PathBuf = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("amflow_io"));
    std::fs::create_dir_all(&out).map_err(|e| amflow::Error::Io { path: out.clone(), source: e })?;
    let gt = frame_ground_truth(&scenes::chain_scene(), 0)?;

    let flo = out.join("modal.flo");
    io::write_flo(&gt.modal_flow, &flo)?;
    assert_eq!(io::read_flo(&flo)?, gt.modal_flow);

    let dir = out.join("stack");
    io::write_stack_dir(&gt.amodal_stack, &dir)?;
    let amfl = out.join("stack.amfl");
    io::write_amfl(&gt.amodal_stack, &amfl)?;
    assert_eq!(io::read_stack(&dir)?, io::read_stack(&amfl)?);

    println!(
        "{} levels of {}x{} written to {} and {}",
        gt.amodal_stack.num_levels(),
        gt.amodal_stack.width(),
        gt.amodal_stack.height(),
        dir.display(),
        amfl.display()
    );
    Ok(())
}
