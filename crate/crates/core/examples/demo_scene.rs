//! Prints the built-in demo scene as JSON, or writes it to the given path.
//!
//!     cargo run --example demo_scene -- data/demo_scene.json

use amflow::synthgen::scenes;

fn main() -> amflow::Result<()> {
    let json = scenes::demo_scene().to_json();
    match std::env::args().nth(1) {
        Some(path) => std::fs::write(&path, json).map_err(|e| amflow::Error::Io {
            path: path.into(),
            source: e,
        })?,
        None => print!("{json}"),
    }
    Ok(())
}
