//! Generate a synthetic scene with ground truth and write it to disk.
//!
//! Usage: cargo run --example synth_scene [OUT_DIR]

use std::path::PathBuf;

use hsi_maturity::cube::save_cube;
use hsi_maturity::report;
use hsi_maturity::synthgen::{make_scene, SceneSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "example-out/synth".into())
        .into();
    std::fs::create_dir_all(&out)?;

    let spec = SceneSpec::default_scene(42);
    let scene = make_scene(&spec)?;

    save_cube(&scene.raw, out.join("raw.hdr"))?;
    save_cube(&scene.refs.white, out.join("white.hdr"))?;
    save_cube(&scene.refs.dark, out.join("dark.hdr"))?;
    report::write_labels(out.join("labels.csv"), &scene.labels)?;
    report::write_region_map(out.join("truth_regions.pgm"), &scene.truth_regions)?;
    report::write_endmembers_csv(out.join("endmembers.csv"), &scene.truth_endmembers)?;

    println!(
        "wrote {}x{} scene with {} bands and {} labelled disks to {}",
        scene.raw.width(),
        scene.raw.height(),
        scene.raw.bands(),
        scene.labels.len(),
        out.display()
    );
    Ok(())
}
