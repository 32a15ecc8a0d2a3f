//! Estimate class endmembers from labelled regions and unmix every
//! foreground pixel with fully constrained least squares.

use hsi_maturity::cube::calibrate;
use hsi_maturity::pipeline::{prepare_scene, PipelineConfig};
use hsi_maturity::synthgen::{make_scene, SceneSpec};
use hsi_maturity::unmixing::{
    estimate_endmembers, unmix_regions, LabelGrouping, LabeledRegionSpectra,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = make_scene(&SceneSpec::default_scene(42))?;
    let reflectance = calibrate(&scene.raw, &scene.refs)?;

    let mut cfg = PipelineConfig::default();
    cfg.smooth = false;
    let prepared = prepare_scene(&reflectance, &cfg)?;

    // gather each labelled region's pixel spectra
    let grouping = LabelGrouping::default_colors();
    let mut training = Vec::new();
    for (id, color) in &scene.labels {
        let spectra: Vec<Vec<f64>> = prepared
            .regions
            .pixels_of(*id)
            .into_iter()
            .map(|i| prepared.cropped.spectrum_at(i).to_vec())
            .collect();
        training.push(LabeledRegionSpectra {
            region: *id,
            label: color.clone(),
            axis: prepared.cropped.axis().clone(),
            spectra,
        });
    }
    let endmembers = estimate_endmembers(&training, &grouping)?;
    println!("endmember classes: {:?}", endmembers.class_names());

    let unmixed = unmix_regions(&prepared.cropped, &prepared.regions, &endmembers)?;
    let m = unmixed.map.classes();
    for id in 1..=prepared.regions.region_count() as u32 {
        let mut mean = vec![0.0; m];
        let mut n = 0usize;
        for i in prepared.regions.pixels_of(id) {
            let p = unmixed.map.pixel(i).unwrap();
            for (acc, v) in mean.iter_mut().zip(p) {
                *acc += v;
            }
            n += 1;
        }
        for v in &mut mean {
            *v /= n as f64;
        }
        println!(
            "region {id:2} ({:>6}): mean proportions {:?}",
            scene.labels[(id - 1) as usize].1,
            mean.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        );
    }
    Ok(())
}
