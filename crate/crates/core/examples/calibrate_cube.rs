//! Turn a raw-intensity cube into smoothed, band-cropped reflectance.
//!
//! The scene is generated in memory; the same calls work on cubes loaded
//! with `load_cube`.

use hsi_maturity::cube::{calibrate, crop_bands, savgol_smooth};
use hsi_maturity::synthgen::{make_scene, SceneSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = make_scene(&SceneSpec::default_scene(7))?;

    let reflectance = calibrate(&scene.raw, &scene.refs)?;
    let smoothed = savgol_smooth(&reflectance, 4, 25)?;
    let cropped = crop_bands(&smoothed, 650.0, 1000.0)?;

    let means = cropped.band_means();
    let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "calibrated {} bands over {:.0}-{:.0} nm, band means in [{lo:.4}, {hi:.4}]",
        cropped.bands(),
        cropped.axis().min_nm(),
        cropped.axis().max_nm()
    );

    // a mid-scene pixel spectrum, first few bands
    let spectrum = cropped.spectrum(cropped.width() / 2, cropped.height() / 2);
    println!("center pixel starts with {:?}", &spectrum[..5.min(spectrum.len())]);
    Ok(())
}
