//! Segment a reflectance cube into indexed foreground regions with 2-means
//! clustering plus connected components, and save the region map.
//!
//! Usage: cargo run --example segment_scene [OUT_DIR]

use std::path::PathBuf;

use hsi_maturity::cube::calibrate;
use hsi_maturity::pipeline::{prepare_scene, PipelineConfig};
use hsi_maturity::report;
use hsi_maturity::synthgen::{make_scene, SceneSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "example-out/segment".into())
        .into();
    std::fs::create_dir_all(&out)?;

    let scene = make_scene(&SceneSpec::default_scene(42))?;
    let reflectance = calibrate(&scene.raw, &scene.refs)?;

    let mut cfg = PipelineConfig::default();
    cfg.smooth = false; // synthetic spectra are already smooth
    let prepared = prepare_scene(&reflectance, &cfg)?;

    println!("found {} regions:", prepared.regions.region_count());
    for (i, size) in prepared.regions.region_sizes.iter().enumerate() {
        println!("  region {:2}: {size} px", i + 1);
    }

    report::write_region_map(out.join("regions.pgm"), &prepared.regions)?;
    report::write_preview(out.join("preview.ppm"), &prepared.preview)?;
    println!("region map and RGB preview written to {}", out.display());
    Ok(())
}
