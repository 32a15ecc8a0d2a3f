//! Hyperspectral data model: cubes, spectra, reflectance calibration,
//! spectral smoothing and band-range cropping.
//!
//! A [`HyperCube`] stores `width x height` pixel spectra over a shared
//! [`WavelengthAxis`]. Data are kept pixel-interleaved in memory so a pixel
//! spectrum is one contiguous slice, which is the dominant access pattern for
//! smoothing and unmixing.

mod io;
mod savgol;

pub use io::{load_cube, save_cube, save_cube_with, Interleave, SampleType};
pub use savgol::{savgol_smooth, savgol_smooth_spectrum};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-band wavelength coordinate in nanometres, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavelengthAxis {
    wavelengths_nm: Vec<f64>,
}

impl WavelengthAxis {
    pub fn new(wavelengths_nm: Vec<f64>) -> Result<Self> {
        if wavelengths_nm.is_empty()
            || wavelengths_nm.iter().any(|w| !w.is_finite())
            || wavelengths_nm.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::BadAxis);
        }
        Ok(Self { wavelengths_nm })
    }

    /// Uniformly spaced axis over `[lo_nm, hi_nm]` with `bands` samples.
    pub fn uniform(lo_nm: f64, hi_nm: f64, bands: usize) -> Result<Self> {
        if bands < 2 || !(lo_nm < hi_nm) {
            return Err(Error::BadAxis);
        }
        let step = (hi_nm - lo_nm) / (bands - 1) as f64;
        Self::new((0..bands).map(|i| lo_nm + step * i as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.wavelengths_nm.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: length >= 1
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths_nm
    }

    pub fn min_nm(&self) -> f64 {
        self.wavelengths_nm[0]
    }

    pub fn max_nm(&self) -> f64 {
        *self.wavelengths_nm.last().unwrap()
    }

    /// Index of the band whose wavelength is closest to `nm` (ties toward the
    /// lower band).
    pub fn nearest_band(&self, nm: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, w) in self.wavelengths_nm.iter().enumerate() {
            let d = (w - nm).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Elementwise equality within `tol` nanometres.
    pub fn approx_eq(&self, other: &WavelengthAxis, tol: f64) -> bool {
        self.len() == other.len()
            && self
                .wavelengths_nm
                .iter()
                .zip(&other.wavelengths_nm)
                .all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// One reflectance vector over a wavelength axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub axis: WavelengthAxis,
    pub values: Vec<f64>,
}

impl Spectrum {
    pub fn new(axis: WavelengthAxis, values: Vec<f64>) -> Result<Self> {
        if values.len() != axis.len() {
            return Err(Error::DimensionMismatch(format!(
                "spectrum has {} values for a {}-band axis",
                values.len(),
                axis.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { axis, values })
    }
}

/// `width x height x bands` reflectance raster.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube {
    width: usize,
    height: usize,
    axis: WavelengthAxis,
    // pixel-interleaved: value(x, y, b) = values[(y * width + x) * bands + b]
    values: Vec<f64>,
}

impl HyperCube {
    pub fn new(width: usize, height: usize, axis: WavelengthAxis, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::DimensionMismatch("zero spatial dimension".into()));
        }
        if values.len() != width * height * axis.len() {
            return Err(Error::DimensionMismatch(format!(
                "cube {}x{}x{} needs {} values, got {}",
                width,
                height,
                axis.len(),
                width * height * axis.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            width,
            height,
            axis,
            values,
        })
    }

    /// Cube filled with a constant value.
    pub fn constant(width: usize, height: usize, axis: WavelengthAxis, value: f64) -> Result<Self> {
        let n = width * height * axis.len();
        Self::new(width, height, axis, vec![value; n])
    }

    /// Build a cube from a per-pixel spectrum function, row-major.
    pub fn from_fn(
        width: usize,
        height: usize,
        axis: WavelengthAxis,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let bands = axis.len();
        let mut values = Vec::with_capacity(width * height * bands);
        for y in 0..height {
            for x in 0..width {
                for b in 0..bands {
                    values.push(f(x, y, b));
                }
            }
        }
        Self::new(width, height, axis, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.axis.len()
    }

    pub fn axis(&self) -> &WavelengthAxis {
        &self.axis
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, x: usize, y: usize, band: usize) -> f64 {
        self.values[(y * self.width + x) * self.axis.len() + band]
    }

    /// Contiguous spectrum of pixel `(x, y)`.
    pub fn spectrum(&self, x: usize, y: usize) -> &[f64] {
        let bands = self.axis.len();
        let start = (y * self.width + x) * bands;
        &self.values[start..start + bands]
    }

    /// Spectrum of the pixel at row-major index `i`.
    pub fn spectrum_at(&self, i: usize) -> &[f64] {
        let bands = self.axis.len();
        &self.values[i * bands..(i + 1) * bands]
    }

    /// Per-band mean over all pixels.
    pub fn band_means(&self) -> Vec<f64> {
        let bands = self.axis.len();
        let mut sums = vec![0.0; bands];
        for i in 0..self.pixel_count() {
            let s = self.spectrum_at(i);
            for (acc, v) in sums.iter_mut().zip(s) {
                *acc += v;
            }
        }
        let n = self.pixel_count() as f64;
        for acc in &mut sums {
            *acc /= n;
        }
        sums
    }
}

/// White/dark reference measurements for reflectance calibration.
#[derive(Debug, Clone)]
pub struct CalibrationRefs {
    pub white: HyperCube,
    pub dark: HyperCube,
    /// Nominal reflectance of the diffuse standard, in (0, 1].
    pub reflectivity: f64,
}

impl CalibrationRefs {
    pub fn new(white: HyperCube, dark: HyperCube, reflectivity: f64) -> Result<Self> {
        if white.width() != dark.width()
            || white.height() != dark.height()
            || white.bands() != dark.bands()
        {
            return Err(Error::DimensionMismatch(
                "white and dark reference shapes differ".into(),
            ));
        }
        if !(reflectivity > 0.0 && reflectivity <= 1.0) {
            return Err(Error::BadReflectivity(reflectivity));
        }
        Ok(Self {
            white,
            dark,
            reflectivity,
        })
    }
}

/// Convert a raw-intensity cube to relative reflectance:
/// `R = reflectivity * (raw - dark) / (white - dark)`, clamped below at 0.
///
/// The white and dark references are averaged per band over their own pixels
/// before the division.
pub fn calibrate(raw: &HyperCube, refs: &CalibrationRefs) -> Result<HyperCube> {
    let bands = raw.bands();
    if refs.white.bands() != bands {
        return Err(Error::DimensionMismatch(format!(
            "reference has {} bands, raw cube has {}",
            refs.white.bands(),
            bands
        )));
    }
    let white = refs.white.band_means();
    let dark = refs.dark.band_means();
    for b in 0..bands {
        if white[b] <= dark[b] {
            return Err(Error::DegenerateReference {
                band: b,
                white: white[b],
                dark: dark[b],
            });
        }
    }
    let rho = refs.reflectivity;
    let scale: Vec<f64> = (0..bands).map(|b| rho / (white[b] - dark[b])).collect();

    let values: Vec<f64> = raw
        .values()
        .par_chunks(bands)
        .flat_map_iter(|spec| {
            spec.iter()
                .enumerate()
                .map(|(b, v)| ((v - dark[b]) * scale[b]).max(0.0))
                .collect::<Vec<_>>()
        })
        .collect();
    HyperCube::new(raw.width(), raw.height(), raw.axis().clone(), values)
}

/// Keep exactly the bands with `lo_nm <= wavelength <= hi_nm`.
pub fn crop_bands(cube: &HyperCube, lo_nm: f64, hi_nm: f64) -> Result<HyperCube> {
    if !(lo_nm < hi_nm) {
        return Err(Error::InvalidRange { lo: lo_nm, hi: hi_nm });
    }
    let keep: Vec<usize> = cube
        .axis()
        .wavelengths()
        .iter()
        .enumerate()
        .filter(|(_, w)| lo_nm <= **w && **w <= hi_nm)
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyBandSelection { lo: lo_nm, hi: hi_nm });
    }
    if keep.len() == cube.bands() {
        return Ok(cube.clone());
    }
    let axis = WavelengthAxis::new(keep.iter().map(|&i| cube.axis().wavelengths()[i]).collect())?;
    let bands = cube.bands();
    let values: Vec<f64> = cube
        .values()
        .chunks(bands)
        .flat_map(|spec| keep.iter().map(|&i| spec[i]))
        .collect();
    HyperCube::new(cube.width(), cube.height(), axis, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(ws: &[f64]) -> WavelengthAxis {
        WavelengthAxis::new(ws.to_vec()).unwrap()
    }

    #[test]
    fn axis_rejects_non_increasing() {
        assert!(WavelengthAxis::new(vec![400.0, 400.0]).is_err());
        assert!(WavelengthAxis::new(vec![500.0, 400.0]).is_err());
        assert!(WavelengthAxis::new(vec![]).is_err());
    }

    #[test]
    fn nearest_band_ties_low() {
        let a = axis(&[400.0, 500.0, 600.0]);
        assert_eq!(a.nearest_band(450.0), 0);
        assert_eq!(a.nearest_band(460.0), 1);
        assert_eq!(a.nearest_band(1000.0), 2);
    }

    #[test]
    fn cube_rejects_non_finite() {
        let a = axis(&[400.0, 500.0]);
        assert!(matches!(
            HyperCube::new(1, 1, a, vec![0.0, f64::NAN]),
            Err(Error::NonFinite)
        ));
    }

    #[test]
    fn calibrate_white_gives_reflectivity() {
        let a = axis(&[400.0, 500.0, 600.0]);
        let white = HyperCube::from_fn(2, 1, a.clone(), |_, _, b| 1000.0 + b as f64).unwrap();
        let dark = HyperCube::constant(2, 1, a.clone(), 80.0).unwrap();
        let refs = CalibrationRefs::new(white.clone(), dark, 0.99).unwrap();
        let raw = HyperCube::from_fn(3, 2, a, |_, _, b| 1000.0 + b as f64).unwrap();
        let out = calibrate(&raw, &refs).unwrap();
        for v in out.values() {
            assert!((v - 0.99).abs() < 1e-12);
        }
    }

    #[test]
    fn calibrate_dark_gives_zero() {
        let a = axis(&[400.0, 500.0]);
        let white = HyperCube::constant(1, 1, a.clone(), 900.0).unwrap();
        let dark = HyperCube::constant(1, 1, a.clone(), 50.0).unwrap();
        let refs = CalibrationRefs::new(white, dark, 0.99).unwrap();
        let raw = HyperCube::constant(4, 4, a, 50.0).unwrap();
        let out = calibrate(&raw, &refs).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn calibrate_midpoint() {
        // raw = dark + 0.5 * (white - dark) -> 0.495 with reflectivity 0.99
        let a = axis(&[400.0, 500.0, 600.0]);
        let white = HyperCube::from_fn(1, 1, a.clone(), |_, _, b| 2000.0 + 10.0 * b as f64).unwrap();
        let dark = HyperCube::from_fn(1, 1, a.clone(), |_, _, b| 100.0 + b as f64).unwrap();
        let raw = HyperCube::from_fn(2, 2, a.clone(), |_, _, b| {
            let w = 2000.0 + 10.0 * b as f64;
            let d = 100.0 + b as f64;
            d + 0.5 * (w - d)
        })
        .unwrap();
        let refs = CalibrationRefs::new(white, dark, 0.99).unwrap();
        let out = calibrate(&raw, &refs).unwrap();
        for v in out.values() {
            assert!((v - 0.495).abs() < 1e-12);
        }
    }

    #[test]
    fn calibrate_degenerate_reference_names_band() {
        let a = axis(&[400.0, 500.0, 600.0]);
        let mut w = vec![900.0; 3];
        w[1] = 40.0; // below dark
        let white = HyperCube::new(1, 1, a.clone(), w).unwrap();
        let dark = HyperCube::constant(1, 1, a.clone(), 50.0).unwrap();
        let refs = CalibrationRefs::new(white, dark, 0.99).unwrap();
        let raw = HyperCube::constant(1, 1, a, 100.0).unwrap();
        match calibrate(&raw, &refs) {
            Err(Error::DegenerateReference { band, .. }) => assert_eq!(band, 1),
            other => panic!("expected degenerate reference, got {other:?}"),
        }
    }

    #[test]
    fn crop_boundary_inclusive() {
        let a = axis(&[400.0, 650.0, 900.0, 1005.0]);
        let c = HyperCube::from_fn(1, 1, a, |_, _, b| b as f64).unwrap();
        let out = crop_bands(&c, 650.0, 1000.0).unwrap();
        assert_eq!(out.axis().wavelengths(), &[650.0, 900.0]);
        assert_eq!(out.values(), &[1.0, 2.0]);
    }

    #[test]
    fn crop_full_range_is_identity() {
        let a = axis(&[400.0, 650.0, 900.0]);
        let c = HyperCube::from_fn(2, 2, a.clone(), |x, y, b| (x + 2 * y + b) as f64).unwrap();
        let out = crop_bands(&c, a.min_nm(), a.max_nm()).unwrap();
        assert_eq!(out, c);
    }

    #[test]
    fn crop_uniform_axis_band_count() {
        let a = WavelengthAxis::uniform(400.0, 1000.0, 467).unwrap();
        let c = HyperCube::constant(2, 1, a.clone(), 0.5).unwrap();
        let out = crop_bands(&c, 650.0, 1000.0).unwrap();
        // count grid points >= 650 directly from the spacing
        let step = 600.0 / 466.0;
        let expected = (0..467).filter(|&i| 400.0 + step * i as f64 >= 650.0).count();
        assert_eq!(out.bands(), expected);
    }

    #[test]
    fn crop_empty_selection_errors() {
        let a = axis(&[400.0, 500.0]);
        let c = HyperCube::constant(1, 1, a, 0.1).unwrap();
        assert!(matches!(
            crop_bands(&c, 700.0, 800.0),
            Err(Error::EmptyBandSelection { .. })
        ));
    }
}
