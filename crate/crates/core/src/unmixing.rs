//! Endmember estimation by class-mean averaging and fully constrained
//! least-squares (FCLS) abundance estimation under the linear mixture model.
//!
//! `unmix_pixel` minimises `||x - E^T p||^2` subject to `p >= 0` and
//! `sum(p) = 1` with an active-set method: the sum-to-one equality is handled
//! through a bordered normal-equation system, negative coordinates are
//! clamped to the active face one at a time, and a KKT check decides whether
//! a clamped coordinate must be released. A projected-gradient fallback with
//! diminishing steps covers singular normal equations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::{HyperCube, WavelengthAxis};
use crate::error::{Error, Result};
use crate::linalg;
use crate::segmentation::RegionSet;

/// Map from region labels (mesocarp colours) to class names. The class order
/// of every derived [`EndmemberSet`] follows first appearance in the map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelGrouping {
    pairs: Vec<(String, String)>,
}

impl LabelGrouping {
    pub fn new(pairs: Vec<(String, String)>) -> Self {
        Self { pairs }
    }

    /// The paper's colour vocabulary: black/brown are mature, orange/yellow
    /// immature.
    pub fn default_colors() -> Self {
        Self::new(vec![
            ("black".into(), "mature".into()),
            ("brown".into(), "mature".into()),
            ("orange".into(), "immature".into()),
            ("yellow".into(), "immature".into()),
        ])
    }

    /// Parse `label=class,label=class,...`.
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        let mut pairs = Vec::new();
        for part in s.split(',') {
            let (label, class) = part
                .split_once('=')
                .ok_or_else(|| format!("bad grouping entry '{part}'"))?;
            pairs.push((label.trim().to_string(), class.trim().to_string()));
        }
        if pairs.is_empty() {
            return Err("empty grouping".into());
        }
        Ok(Self::new(pairs))
    }

    /// Class names in first-appearance order.
    pub fn classes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (_, class) in &self.pairs {
            if !out.contains(class) {
                out.push(class.clone());
            }
        }
        out
    }

    pub fn class_of(&self, label: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, c)| c.as_str())
    }
}

/// Matrix of class endmember spectra plus class names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndmemberSet {
    class_names: Vec<String>,
    axis: WavelengthAxis,
    spectra: Vec<Vec<f64>>,
}

impl EndmemberSet {
    pub fn new(class_names: Vec<String>, axis: WavelengthAxis, spectra: Vec<Vec<f64>>) -> Result<Self> {
        if class_names.is_empty() || class_names.len() != spectra.len() {
            return Err(Error::DimensionMismatch(
                "class name count does not match endmember count".into(),
            ));
        }
        for s in &spectra {
            if s.len() != axis.len() {
                return Err(Error::DimensionMismatch(
                    "endmember length does not match axis".into(),
                ));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self {
            class_names,
            axis,
            spectra,
        })
    }

    pub fn len(&self) -> usize {
        self.spectra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.is_empty()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn axis(&self) -> &WavelengthAxis {
        &self.axis
    }

    pub fn spectrum(&self, k: usize) -> &[f64] {
        &self.spectra[k]
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    /// Crop every endmember to `[lo_nm, hi_nm]`.
    pub fn crop(&self, lo_nm: f64, hi_nm: f64) -> Result<Self> {
        if !(lo_nm < hi_nm) {
            return Err(Error::InvalidRange { lo: lo_nm, hi: hi_nm });
        }
        let keep: Vec<usize> = self
            .axis
            .wavelengths()
            .iter()
            .enumerate()
            .filter(|(_, w)| lo_nm <= **w && **w <= hi_nm)
            .map(|(i, _)| i)
            .collect();
        if keep.is_empty() {
            return Err(Error::EmptyBandSelection { lo: lo_nm, hi: hi_nm });
        }
        let axis = WavelengthAxis::new(keep.iter().map(|&i| self.axis.wavelengths()[i]).collect())?;
        let spectra = self
            .spectra
            .iter()
            .map(|s| keep.iter().map(|&i| s[i]).collect())
            .collect();
        Self::new(self.class_names.clone(), axis, spectra)
    }
}

/// Pixel spectra of one labelled training region.
#[derive(Debug, Clone)]
pub struct LabeledRegionSpectra {
    pub region: u32,
    pub label: String,
    pub axis: WavelengthAxis,
    pub spectra: Vec<Vec<f64>>,
}

/// Class endmembers as arithmetic means of all training pixel spectra whose
/// region label maps to the class.
pub fn estimate_endmembers(
    training: &[LabeledRegionSpectra],
    grouping: &LabelGrouping,
) -> Result<EndmemberSet> {
    let classes = grouping.classes();
    let axis = training
        .first()
        .map(|t| t.axis.clone())
        .ok_or_else(|| Error::EmptyClass(classes.first().cloned().unwrap_or_default()))?;
    let bands = axis.len();
    let mut sums = vec![vec![0.0f64; bands]; classes.len()];
    let mut counts = vec![0usize; classes.len()];

    for region in training {
        if !region.axis.approx_eq(&axis, 1e-9) {
            return Err(Error::AxisMismatch(
                "training spectra are not on a shared axis".into(),
            ));
        }
        let class = grouping
            .class_of(&region.label)
            .ok_or_else(|| Error::UnknownLabel(region.label.clone()))?;
        let k = classes.iter().position(|c| c == class).unwrap();
        for s in &region.spectra {
            if s.len() != bands {
                return Err(Error::DimensionMismatch(
                    "pixel spectrum length does not match axis".into(),
                ));
            }
            for (acc, v) in sums[k].iter_mut().zip(s) {
                *acc += v;
            }
            counts[k] += 1;
        }
    }

    for (k, &n) in counts.iter().enumerate() {
        if n == 0 {
            return Err(Error::EmptyClass(classes[k].clone()));
        }
        let inv = 1.0 / n as f64;
        for v in &mut sums[k] {
            *v *= inv;
        }
    }
    EndmemberSet::new(classes, axis, sums)
}

/// Proportion vector for one pixel plus solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Unmixed {
    pub proportions: Vec<f64>,
    /// Endmembers coincide within tolerance; the minimiser is not unique.
    pub non_unique: bool,
}

///// Closed-form FCLS for two endmembers:
/// `p2 = clamp((e1 - e2) . (e1 - x) / ||e1 - e2||^2, 0, 1)`.
pub fn pair_closed_form(x: &[f64], e1: &[f64], e2: &[f64]) -> Option<[f64; 2]> {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..x.len() {
        let d = e1[i] - e2[i];
        num += d * (e1[i] - x[i]);
        den += d * d;
    }
    if den == 0.0 {
        return None;
    }
    let p2 = (num / den).clamp(0.0, 1.0);
    Some([1.0 - p2, p2])
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve the sum-to-one equality-constrained least squares restricted to the
/// free coordinate set, via the bordered normal-equation system. `jitter` is
/// added to the Gram diagonal.
fn solve_face(gram: &[f64], b: &[f64], m: usize, free: &[usize], jitter: f64) -> Option<Vec<f64>> {
    let f = free.len();
    let n = f + 1;
    let mut a = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for (r, &i) in free.iter().enumerate() {
        for (c, &j) in free.iter().enumerate() {
            a[r * n + c] = 2.0 * gram[i * m + j];
        }
        a[r * n + r] += 2.0 * jitter;
        a[r * n + f] = 1.0;
        a[f * n + r] = 1.0;
        rhs[r] = 2.0 * b[i];
    }
    rhs[f] = 1.0;
    linalg::solve(&a, &rhs, n)
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(p: &mut [f64]) {
    let mut sorted = p.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        acc += v;
        let t = (acc - 1.0) / (i + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    for v in p.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
}

/// Projected gradient with diminishing steps; fallback for singular faces.
fn projected_gradient(gram: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let trace: f64 = (0..m).map(|k| gram[k * m + k]).sum();
    let lipschitz = 2.0 * trace.max(1e-12);
    let mut p = vec![1.0 / m as f64; m];
    let mut grad = vec![0.0; m];
    for t in 0..5000 {
        for k in 0..m {
            grad[k] = 2.0 * ((0..m).map(|j| gram[k * m + j] * p[j]).sum::<f64>() - b[k]);
        }
        let eta = 1.0 / (lipschitz * (1.0 + t as f64 / 500.0));
        for k in 0..m {
            p[k] -= eta * grad[k];
        }
        project_simplex(&mut p);
    }
    p
}

const KKT_TOL: f64 = 1e-9;

fn unmix_gram(gram: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut active = vec![false; m];
    // worst case visits each face once in and once out; generously bounded
    for _ in 0..4 * m + 8 {
        let free: Vec<usize> = (0..m).filter(|&k| !active[k]).collect();
        if free.len() == 1 {
            let mut p = vec![0.0; m];
            p[free[0]] = 1.0;
            return p;
        }
        let scale = (0..m).map(|k| gram[k * m + k].abs()).fold(1e-30, f64::max);
        let sol = solve_face(gram, b, m, &free, 0.0)
            .or_else(|| solve_face(gram, b, m, &free, 1e-10 * scale));
        let Some(sol) = sol else {
            return projected_gradient(gram, b, m);
        };
        let tol = 1e-12 * scale.max(1.0);
        if let Some((worst_pos, _)) = free
            .iter()
            .enumerate()
            .map(|(r, _)| (r, sol[r]))
            .filter(|&(_, v)| v < -tol)
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        {
            active[free[worst_pos]] = true;
            continue;
        }
        // feasible on this face; assemble and check the clamped multipliers
        let mut p = vec![0.0; m];
        for (r, &k) in free.iter().enumerate() {
            p[k] = sol[r].max(0.0);
        }
        let lambda = sol[free.len()];
        let mut released = false;
        let mut worst = -KKT_TOL * scale.max(1.0);
        let mut worst_k = usize::MAX;
        for k in 0..m {
            if !active[k] {
                continue;
            }
            // stationarity: grad_k + lambda must be >= 0 on the boundary
            let grad_k = 2.0 * ((0..m).map(|j| gram[k * m + j] * p[j]).sum::<f64>() - b[k]);
            let mu = grad_k + lambda;
            if mu < worst {
                worst = mu;
                worst_k = k;
                released = true;
            }
        }
        if released {
            active[worst_k] = false;
            continue;
        }
        return p;
    }
    projected_gradient(gram, b, m)
}

fn duplicate_endmembers(e: &EndmemberSet) -> bool {
    let m = e.len();
    let scale = (0..m)
        .map(|k| dot(e.spectrum(k), e.spectrum(k)))
        .fold(1.0f64, f64::max);
    for j in 0..m {
        for k in j + 1..m {
            let d2: f64 = e
                .spectrum(j)
                .iter()
                .zip(e.spectrum(k))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d2 <= 1e-16 * scale {
                return true;
            }
        }
    }
    false
}

/// FCLS abundance estimate for one pixel spectrum.
pub fn unmix_pixel(x: &[f64], endmembers: &EndmemberSet) -> Result<Unmixed> {
    let m = endmembers.len();
    let d = endmembers.axis().len();
    if x.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "pixel spectrum has {} bands, endmembers have {}",
            x.len(),
            d
        )));
    }
    if m > d {
        return Err(Error::DimensionMismatch(format!(
            "{m} endmembers over only {d} bands"
        )));
    }
    if m == 1 {
        return Ok(Unmixed {
            proportions: vec![1.0],
            non_unique: false,
        });
    }

    let non_unique = duplicate_endmembers(endmembers);
    if m == 2 && non_unique {
        return Ok(Unmixed {
            proportions: vec![0.5, 0.5],
            non_unique: true,
        });
    }

    let mut gram = vec![0.0; m * m];
    let mut b = vec![0.0; m];
    for j in 0..m {
        b[j] = dot(endmembers.spectrum(j), x);
        for k in j..m {
            let g = dot(endmembers.spectrum(j), endmembers.spectrum(k));
            gram[j * m + k] = g;
            gram[k * m + j] = g;
        }
    }
    let mut p = unmix_gram(&gram, &b, m);
    // guard the simplex against roundoff
    let mut sum = 0.0;
    for v in &mut p {
        *v = v.max(0.0);
        sum += *v;
    }
    if (sum - 1.0).abs() > 1e-12 && sum > 0.0 {
        for v in &mut p {
            *v /= sum;
        }
    }
    Ok(Unmixed {
        proportions: p,
        non_unique,
    })
}

/// Per-pixel proportion vectors over a spatial grid; proportions are defined
/// only where `valid` is set (foreground pixels).
#[derive(Debug, Clone, PartialEq)]
pub struct ProportionMap {
    pub width: usize,
    pub height: usize,
    pub class_names: Vec<String>,
    /// `class_names.len()` values per pixel, row-major.
    pub proportions: Vec<f64>,
    pub valid: Vec<bool>,
}

impl ProportionMap {
    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn pixel(&self, i: usize) -> Option<&[f64]> {
        if self.valid[i] {
            let m = self.classes();
            Some(&self.proportions[i * m..(i + 1) * m])
        } else {
            None
        }
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }
}

/// Result of unmixing a whole scene.
#[derive(Debug, Clone)]
pub struct SceneUnmix {
    pub map: ProportionMap,
    /// Per region (index `id - 1`): count of pixels flagged non-unique.
    pub flagged_pixels: Vec<usize>,
}

/// Apply [`unmix_pixel`] to every foreground pixel of `cube`.
pub fn unmix_regions(
    cube: &HyperCube,
    regions: &RegionSet,
    endmembers: &EndmemberSet,
) -> Result<SceneUnmix> {
    if cube.width() != regions.width || cube.height() != regions.height {
        return Err(Error::DimensionMismatch(
            "cube and region set dimensions differ".into(),
        ));
    }
    if !cube.axis().approx_eq(endmembers.axis(), 1e-9) {
        return Err(Error::AxisMismatch(
            "cube axis does not match endmember axis (crop to the analysis range first)".into(),
        ));
    }
    let m = endmembers.len();
    let n = cube.pixel_count();

    let per_pixel: Vec<Option<Unmixed>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if regions.label_map[i] == 0 {
                None
            } else {
                Some(unmix_pixel(cube.spectrum_at(i), endmembers).expect("dims already checked"))
            }
        })
        .collect();

    let mut proportions = vec![0.0; n * m];
    let mut valid = vec![false; n];
    let mut flagged_pixels = vec![0usize; regions.region_count()];
    for (i, u) in per_pixel.into_iter().enumerate() {
        if let Some(u) = u {
            proportions[i * m..(i + 1) * m].copy_from_slice(&u.proportions);
            valid[i] = true;
            if u.non_unique {
                flagged_pixels[(regions.label_map[i] - 1) as usize] += 1;
            }
        }
    }
    Ok(SceneUnmix {
        map: ProportionMap {
            width: cube.width(),
            height: cube.height(),
            class_names: endmembers.class_names().to_vec(),
            proportions,
            valid,
        },
        flagged_pixels,
    })
}
