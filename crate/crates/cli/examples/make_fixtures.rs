//! Regenerates the JSON fixtures in the repository's `fixtures/` directory.

use std::path::PathBuf;

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    std::fs::create_dir_all(&dir)?;
    for (name, text) in splint::fixtures::bundled_files()? {
        std::fs::write(dir.join(name), text)?;
        println!("wrote fixtures/{name}");
    }
    Ok(())
}
