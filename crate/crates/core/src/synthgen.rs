//! Deterministic synthetic-scene generation with known ground truth: a grid
//! of disk-shaped samples over a flat background, planted proportions, a
//! synthetic white/dark reference pair, and labels. Everything is a pure
//! function of the spec (including its seed), so reruns are bit-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cube::{CalibrationRefs, HyperCube, WavelengthAxis};
use crate::error::{Error, Result};
use crate::segmentation::RegionSet;
use crate::unmixing::{EndmemberSet, ProportionMap};

/// How truth endmember spectra are produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum EndmemberShape {
    /// Two smooth sigmoid-shaped spectra (mature below immature) separated
    /// by at least `min_gap` at every band.
    SigmoidPair { min_gap: f64 },
    /// Load spectra from a CSV of `wavelength_nm,class1,class2,...` rows
    /// with a header naming the classes.
    FromCsv { path: String, min_gap: f64 },
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Build truth endmembers on `axis`, enforcing a minimum band-wise gap
/// between the two classes.
pub fn make_endmembers(axis: &WavelengthAxis, shape: &EndmemberShape) -> Result<EndmemberSet> {
    match shape {
        EndmemberShape::SigmoidPair { min_gap } => {
            let mature: Vec<f64> = axis
                .wavelengths()
                .iter()
                .map(|&w| 0.22 + 0.18 * sigmoid((w - 760.0) / 60.0))
                .collect();
            let immature_base: Vec<f64> = axis
                .wavelengths()
                .iter()
                .map(|&w| 0.40 + 0.30 * sigmoid((w - 700.0) / 55.0))
                .collect();
            let base_gap = mature
                .iter()
                .zip(&immature_base)
                .map(|(m, i)| i - m)
                .fold(f64::INFINITY, f64::min);
            if base_gap <= 0.0 {
                return Err(Error::Separation("base pair is not separated".into()));
            }
            // rescale the difference so the minimum band-wise gap is exact
            let scale = min_gap / base_gap;
            if scale > 2.0 {
                return Err(Error::Separation(format!(
                    "requested gap {min_gap} is out of reach for the sigmoid pair"
                )));
            }
            let immature: Vec<f64> = mature
                .iter()
                .zip(&immature_base)
                .map(|(m, i)| m + scale * (i - m))
                .collect();
            EndmemberSet::new(
                vec!["mature".into(), "immature".into()],
                axis.clone(),
                vec![mature, immature],
            )
        }
        EndmemberShape::FromCsv { path, min_gap } => {
            let set = load_endmember_csv(path, axis)?;
            check_separation(&set, *min_gap)?;
            Ok(set)
        }
    }
}

fn check_separation(set: &EndmemberSet, min_gap: f64) -> Result<()> {
    for j in 0..set.len() {
        for k in j + 1..set.len() {
            let gap = set
                .spectrum(j)
                .iter()
                .zip(set.spectrum(k))
                .map(|(a, b)| (a - b).abs())
                .fold(f64::INFINITY, f64::min);
            if gap < min_gap {
                return Err(Error::Separation(format!(
                    "classes '{}' and '{}' have band-wise gap {gap} < {min_gap}",
                    set.class_names()[j],
                    set.class_names()[k]
                )));
            }
        }
    }
    Ok(())
}

fn load_endmember_csv(path: &str, axis: &WavelengthAxis) -> Result<EndmemberSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Separation("empty endmember csv".into()))?;
    let names: Vec<String> = header
        .split(',')
        .skip(1)
        .map(|s| s.trim().to_string())
        .collect();
    if names.is_empty() {
        return Err(Error::Separation("endmember csv has no class columns".into()));
    }
    let mut wavelengths = Vec::new();
    let mut spectra: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let w: f64 = parts
            .next()
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| Error::Separation("bad wavelength in endmember csv".into()))?;
        wavelengths.push(w);
        for s in spectra.iter_mut() {
            let v: f64 = parts
                .next()
                .and_then(|t| t.trim().parse().ok())
                .ok_or_else(|| Error::Separation("bad value in endmember csv".into()))?;
            s.push(v);
        }
    }
    let file_axis = WavelengthAxis::new(wavelengths)?;
    if !file_axis.approx_eq(axis, 1e-6) {
        return Err(Error::AxisMismatch(
            "endmember csv wavelengths do not match the scene axis".into(),
        ));
    }
    EndmemberSet::new(names, axis.clone(), spectra)
}

/// Per-pixel proportion model inside a disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ProportionModel {
    /// Each disk is a pure pixel of its class.
    Pure,
    /// Immature proportion is a per-class base plus a left-to-right gradient
    /// across the disk.
    Mixed {
        immature_base: f64,
        mature_base: f64,
        gradient: f64,
    },
}

/// Full description of a synthetic scene. Fields missing from a TOML spec
/// file fall back to the default verification scene.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub cols: usize,
    pub rows: usize,
    pub disk_radius: usize,
    pub width: usize,
    pub height: usize,
    pub lo_nm: f64,
    pub hi_nm: f64,
    pub bands: usize,
    pub endmember_shape: EndmemberShape,
    /// Colour label per disk in row-major order; length `cols * rows`.
    pub region_labels: Vec<String>,
    pub proportions: ProportionModel,
    /// Gaussian noise sigma in reflectance units.
    pub noise_sigma: f64,
    pub background_reflectance: f64,
    pub reflectivity: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self::default_scene(0)
    }
}

impl SceneSpec {
    /// 5x3 disk grid, 8 immature / 7 mature, pure pixels, matching the
    /// default verification scene.
    pub fn default_scene(seed: u64) -> Self {
        let colors = ["yellow", "black", "orange", "brown"];
        let region_labels = (0..15).map(|i| colors[i % 4].to_string()).collect();
        SceneSpec {
            cols: 5,
            rows: 3,
            disk_radius: 14,
            width: 256,
            height: 160,
            lo_nm: 650.0,
            hi_nm: 1000.0,
            bands: 350,
            endmember_shape: EndmemberShape::SigmoidPair { min_gap: 0.1 },
            region_labels,
            proportions: ProportionModel::Pure,
            noise_sigma: 0.005,
            background_reflectance: 0.08,
            reflectivity: 0.99,
            seed,
        }
    }
}

/// Everything `make_scene` produces: the raw-intensity cube, the reference
/// pair that inverts it back to reflectance, and ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub raw: HyperCube,
    pub refs: CalibrationRefs,
    pub truth_endmembers: EndmemberSet,
    pub truth_regions: RegionSet,
    pub truth_proportions: ProportionMap,
    /// `(region_id, colour label)` in region-id order.
    pub labels: Vec<(u32, String)>,
}

fn immature_class_of(label: &str) -> Result<usize> {
    // index into [mature, immature]
    match label {
        "black" | "brown" => Ok(0),
        "orange" | "yellow" => Ok(1),
        other => Err(Error::UnknownLabel(other.into())),
    }
}

/// Generate the scene described by `spec`.
pub fn make_scene(spec: &SceneSpec) -> Result<SyntheticScene> {
    let axis = WavelengthAxis::uniform(spec.lo_nm, spec.hi_nm, spec.bands)?;
    let endmembers = make_endmembers(&axis, &spec.endmember_shape)?;
    let n_regions = spec.cols * spec.rows;
    if spec.region_labels.len() != n_regions {
        return Err(Error::SceneLayout(format!(
            "{} labels for {} disks",
            spec.region_labels.len(),
            n_regions
        )));
    }
    let cell_w = spec.width / spec.cols;
    let cell_h = spec.height / spec.rows;
    let r = spec.disk_radius;
    if 2 * r + 2 > cell_w.min(cell_h) {
        return Err(Error::SceneLayout(format!(
            "disk radius {r} does not fit in {cell_w}x{cell_h} grid cells without overlap"
        )));
    }

    // region label map: disks in row-major center order
    let mut label_map = vec![0u32; spec.width * spec.height];
    let mut region_sizes = vec![0usize; n_regions];
    let mut centers = Vec::with_capacity(n_regions);
    for row in 0..spec.rows {
        for col in 0..spec.cols {
            centers.push((col * cell_w + cell_w / 2, row * cell_h + cell_h / 2));
        }
    }
    for y in 0..spec.height {
        for x in 0..spec.width {
            for (i, &(cx, cy)) in centers.iter().enumerate() {
                let dx = x as i64 - cx as i64;
                let dy = y as i64 - cy as i64;
                if dx * dx + dy * dy <= (r * r) as i64 {
                    label_map[y * spec.width + x] = i as u32 + 1;
                    region_sizes[i] += 1;
                    break;
                }
            }
        }
    }

    // truth proportions over [mature, immature]
    let mut proportions = vec![0.0f64; spec.width * spec.height * 2];
    let mut valid = vec![false; spec.width * spec.height];
    for y in 0..spec.height {
        for x in 0..spec.width {
            let i = y * spec.width + x;
            let id = label_map[i];
            if id == 0 {
                continue;
            }
            let region = (id - 1) as usize;
            let class = immature_class_of(&spec.region_labels[region])?;
            let p_im = match &spec.proportions {
                ProportionModel::Pure => class as f64,
                ProportionModel::Mixed {
                    immature_base,
                    mature_base,
                    gradient,
                } => {
                    let base = if class == 1 { *immature_base } else { *mature_base };
                    let (cx, _) = centers[region];
                    let t = (x as f64 - cx as f64) / r as f64; // -1..1 across the disk
                    (base + gradient * t).clamp(0.0, 1.0)
                }
            };
            proportions[i * 2] = 1.0 - p_im;
            proportions[i * 2 + 1] = p_im;
            valid[i] = true;
        }
    }

    // reflectance cube = E^T p + noise, background flat
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let bands = spec.bands;
    let mut reflectance = vec![0.0f64; spec.width * spec.height * bands];
    for i in 0..spec.width * spec.height {
        for b in 0..bands {
            let mut v = if valid[i] {
                proportions[i * 2] * endmembers.spectrum(0)[b]
                    + proportions[i * 2 + 1] * endmembers.spectrum(1)[b]
            } else {
                spec.background_reflectance
            };
            if spec.noise_sigma > 0.0 {
                v += spec.noise_sigma * normal.sample(&mut rng);
            }
            reflectance[i * bands + b] = v.max(0.0);
        }
    }

    // synthetic reference pair; constant over their own pixels so per-band
    // averaging is exact and calibrate() inverts the embedding
    let dark_level = |b: usize| 60.0 + 0.05 * b as f64;
    let white_level = |b: usize| 3200.0 + 0.6 * b as f64;
    let dark = HyperCube::from_fn(4, 1, axis.clone(), |_, _, b| dark_level(b))?;
    let white = HyperCube::from_fn(4, 1, axis.clone(), |_, _, b| white_level(b))?;
    let refs = CalibrationRefs::new(white, dark, spec.reflectivity)?;

    let raw = HyperCube::from_fn(spec.width, spec.height, axis.clone(), |x, y, b| {
        let v = reflectance[(y * spec.width + x) * bands + b];
        dark_level(b) + (white_level(b) - dark_level(b)) * v / spec.reflectivity
    })?;

    let labels = spec
        .region_labels
        .iter()
        .enumerate()
        .map(|(i, l)| (i as u32 + 1, l.clone()))
        .collect();

    Ok(SyntheticScene {
        raw,
        refs,
        truth_endmembers: endmembers,
        truth_regions: RegionSet {
            width: spec.width,
            height: spec.height,
            label_map,
            region_sizes,
        },
        truth_proportions: ProportionMap {
            width: spec.width,
            height: spec.height,
            class_names: vec!["mature".into(), "immature".into()],
            proportions,
            valid,
        },
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::calibrate;
    use crate::unmixing::unmix_regions;

    fn small_spec(seed: u64, sigma: f64) -> SceneSpec {
        let mut spec = SceneSpec::default_scene(seed);
        spec.width = 100;
        spec.height = 60;
        spec.bands = 40;
        spec.disk_radius = 7;
        spec.noise_sigma = sigma;
        spec
    }

    #[test]
    fn sigmoid_pair_honors_min_gap() {
        let axis = WavelengthAxis::uniform(650.0, 1000.0, 100).unwrap();
        let e = make_endmembers(&axis, &EndmemberShape::SigmoidPair { min_gap: 0.1 }).unwrap();
        let gap = e
            .spectrum(0)
            .iter()
            .zip(e.spectrum(1))
            .map(|(a, b)| (a - b).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(gap >= 0.1 - 1e-12);
    }

    #[test]
    fn identical_csv_spectra_fail_separation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        let axis = WavelengthAxis::uniform(650.0, 1000.0, 3).unwrap();
        let mut text = String::from("wavelength,mature,immature\n");
        for w in axis.wavelengths() {
            text.push_str(&format!("{w},0.5,0.5\n"));
        }
        std::fs::write(&p, text).unwrap();
        let shape = EndmemberShape::FromCsv {
            path: p.to_string_lossy().into_owned(),
            min_gap: 0.05,
        };
        assert!(matches!(
            make_endmembers(&axis, &shape),
            Err(Error::Separation(_))
        ));
    }

    #[test]
    fn default_pair_not_collinear() {
        let axis = WavelengthAxis::uniform(650.0, 1000.0, 50).unwrap();
        let e = make_endmembers(&axis, &EndmemberShape::SigmoidPair { min_gap: 0.1 }).unwrap();
        let dot: f64 = e.spectrum(0).iter().zip(e.spectrum(1)).map(|(a, b)| a * b).sum();
        let n0: f64 = e.spectrum(0).iter().map(|v| v * v).sum::<f64>().sqrt();
        let n1: f64 = e.spectrum(1).iter().map(|v| v * v).sum::<f64>().sqrt();
        let cos = dot / (n0 * n1);
        assert!(cos < 1.0 - 1e-6, "spectra are collinear (cos = {cos})");
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = small_spec(7, 0.01);
        let a = make_scene(&spec).unwrap();
        let b = make_scene(&spec).unwrap();
        assert_eq!(a.raw, b.raw);
        assert_eq!(a.truth_regions, b.truth_regions);
        assert_eq!(a.truth_proportions, b.truth_proportions);
    }

    #[test]
    fn noiseless_scene_inverts_exactly() {
        let spec = small_spec(1, 0.0);
        let scene = make_scene(&spec).unwrap();
        let reflectance = calibrate(&scene.raw, &scene.refs).unwrap();
        let unmixed =
            unmix_regions(&reflectance, &scene.truth_regions, &scene.truth_endmembers).unwrap();
        for i in 0..reflectance.pixel_count() {
            if let (Some(got), Some(want)) =
                (unmixed.map.pixel(i), scene.truth_proportions.pixel(i))
            {
                for (g, w) in got.iter().zip(want) {
                    assert!((g - w).abs() < 1e-6, "{g} vs {w}");
                }
            }
        }
    }

    #[test]
    fn overlapping_disks_rejected() {
        let mut spec = small_spec(0, 0.0);
        spec.disk_radius = 30;
        assert!(matches!(make_scene(&spec), Err(Error::SceneLayout(_))));
    }

    #[test]
    fn label_count_must_match_grid() {
        let mut spec = small_spec(0, 0.0);
        spec.region_labels.pop();
        assert!(matches!(make_scene(&spec), Err(Error::SceneLayout(_))));
    }

    #[test]
    fn segmentation_recovers_truth_regions_on_noiseless_scene() {
        use crate::pipeline::{prepare_scene, PipelineConfig};
        let spec = small_spec(3, 0.0);
        let scene = make_scene(&spec).unwrap();
        let reflectance = calibrate(&scene.raw, &scene.refs).unwrap();
        let cfg = PipelineConfig {
            smooth: false,
            band_range_nm: (spec.lo_nm, spec.hi_nm),
            ..PipelineConfig::default()
        };
        let p = prepare_scene(&reflectance, &cfg).unwrap();
        assert_eq!(p.regions.region_count(), scene.truth_regions.region_count());
        let agree = p
            .regions
            .label_map
            .iter()
            .zip(&scene.truth_regions.label_map)
            .filter(|(a, b)| a == b)
            .count();
        let total = p.regions.label_map.len();
        assert!(agree as f64 / total as f64 >= 0.99);
    }
}
