//! Foreground extraction: RGB preview, 2-means clustering on pixel colours
//! and connected-component indexing of the foreground into regions.

use std::collections::VecDeque;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cube::HyperCube;
use crate::error::{Error, Result};

/// RGB preview image with channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f64; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }
}

/// Slice the cube at the bands nearest the requested red/green/blue
/// wavelengths, clamping each channel to `[0, 1]`.
pub fn extract_rgb(cube: &HyperCube, r_nm: f64, g_nm: f64, b_nm: f64) -> RgbImage {
    let axis = cube.axis();
    let chans = [axis.nearest_band(r_nm), axis.nearest_band(g_nm), axis.nearest_band(b_nm)];
    let pixels = (0..cube.pixel_count())
        .map(|i| {
            let s = cube.spectrum_at(i);
            [
                s[chans[0]].clamp(0.0, 1.0),
                s[chans[1]].clamp(0.0, 1.0),
                s[chans[2]].clamp(0.0, 1.0),
            ]
        })
        .collect();
    RgbImage {
        width: cube.width(),
        height: cube.height(),
        pixels,
    }
}

/// Default preview wavelengths (nm).
pub const DEFAULT_RGB_NM: (f64, f64, f64) = (640.0, 550.0, 460.0);

/// Outcome of 2-means clustering on pixel colours.
#[derive(Debug, Clone)]
pub struct Kmeans2 {
    /// Per-pixel cluster id, 0 or 1, row-major.
    pub assignment: Vec<u8>,
    pub centroids: [[f64; 3]; 2],
    /// Set when the image has fewer than two distinct colours and only a
    /// single cluster exists.
    pub degenerate: bool,
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    let d2 = a[2] - b[2];
    d0 * d0 + d1 * d1 + d2 * d2
}

/// Lloyd's algorithm with `k = 2` on `(r, g, b)` features.
///
/// Initialisation is a seeded farthest-point pick: one random pixel colour,
/// then the colour farthest from it. A pixel equidistant to both centroids
/// joins centroid 0. Deterministic for a fixed seed.
pub fn kmeans2(image: &RgbImage, seed: u64, max_iter: usize) -> Kmeans2 {
    let n = image.pixels.len();
    assert!(n > 0, "kmeans2 on empty image");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c0 = image.pixels[rng.random_range(0..n)];
    let mut far = 0usize;
    let mut far_d = -1.0;
    for (i, p) in image.pixels.iter().enumerate() {
        let d = dist2(p, &c0);
        if d > far_d {
            far_d = d;
            far = i;
        }
    }
    if far_d == 0.0 {
        return Kmeans2 {
            assignment: vec![0; n],
            centroids: [c0, c0],
            degenerate: true,
        };
    }
    let mut centroids = [c0, image.pixels[far]];

    let mut assignment = vec![0u8; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, p) in image.pixels.iter().enumerate() {
            let a = if dist2(p, &centroids[0]) <= dist2(p, &centroids[1]) {
                0
            } else {
                1
            };
            if assignment[i] != a {
                assignment[i] = a;
                changed = true;
            }
        }
        // centroid update in fixed row-major order per cluster
        let mut sums = [[0.0f64; 3]; 2];
        let mut counts = [0usize; 2];
        for (p, &a) in image.pixels.iter().zip(&assignment) {
            let a = a as usize;
            sums[a][0] += p[0];
            sums[a][1] += p[1];
            sums[a][2] += p[2];
            counts[a] += 1;
        }
        for c in 0..2 {
            if counts[c] > 0 {
                let k = counts[c] as f64;
                centroids[c] = [sums[c][0] / k, sums[c][1] / k, sums[c][2] / k];
            }
        }
        if !changed {
            break;
        }
    }

    Kmeans2 {
        assignment,
        centroids,
        degenerate: false,
    }
}

/// Which k-means cluster is treated as foreground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForegroundRule {
    /// The cluster with fewer pixels (samples occupy less area than
    /// background).
    #[default]
    Minority,
    /// The cluster with the brighter centroid.
    Bright,
    /// The cluster with the darker centroid.
    Dark,
}

impl FromStr for ForegroundRule {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "minority" => Ok(ForegroundRule::Minority),
            "bright" => Ok(ForegroundRule::Bright),
            "dark" => Ok(ForegroundRule::Dark),
            other => Err(format!("unknown foreground rule '{other}'")),
        }
    }
}

/// Pixel connectivity for region labelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl FromStr for Connectivity {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "4" => Ok(Connectivity::Four),
            "8" => Ok(Connectivity::Eight),
            other => Err(format!("connectivity must be 4 or 8, got '{other}'")),
        }
    }
}

/// Indexed foreground regions over a spatial grid. Label 0 is background,
/// labels `1..=region_count` identify connected regions in row-major
/// discovery order.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSet {
    pub width: usize,
    pub height: usize,
    pub label_map: Vec<u32>,
    pub region_sizes: Vec<usize>,
}

impl RegionSet {
    pub fn region_count(&self) -> usize {
        self.region_sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.region_sizes.is_empty()
    }

    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.label_map[y * self.width + x]
    }

    /// Row-major pixel indices of region `id` (1-based).
    pub fn pixels_of(&self, id: u32) -> Vec<usize> {
        self.label_map
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == id)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Pick the foreground cluster, label its connected components and discard
/// components smaller than `min_region_area`.
///
/// Zero surviving regions is a valid outcome (`RegionSet::is_empty`); callers
/// must not proceed to unmixing on an empty set.
pub fn segment_regions(
    image: &RgbImage,
    clustering: &Kmeans2,
    min_region_area: usize,
    connectivity: Connectivity,
    rule: ForegroundRule,
) -> Result<RegionSet> {
    if clustering.assignment.len() != image.pixels.len() {
        return Err(Error::DimensionMismatch(
            "cluster assignment does not match image".into(),
        ));
    }
    let counts = clustering.assignment.iter().fold([0usize; 2], |mut acc, &a| {
        acc[a as usize] += 1;
        acc
    });
    let brightness = |c: &[f64; 3]| c[0] + c[1] + c[2];
    let fg: u8 = match rule {
        ForegroundRule::Minority => {
            if counts[0] < counts[1] {
                0
            } else if counts[1] < counts[0] {
                1
            } else if brightness(&clustering.centroids[0]) >= brightness(&clustering.centroids[1]) {
                0
            } else {
                1
            }
        }
        ForegroundRule::Bright => {
            if brightness(&clustering.centroids[0]) >= brightness(&clustering.centroids[1]) {
                0
            } else {
                1
            }
        }
        ForegroundRule::Dark => {
            if brightness(&clustering.centroids[0]) < brightness(&clustering.centroids[1]) {
                0
            } else {
                1
            }
        }
    };

    let (w, h) = (image.width, image.height);
    let mut label_map = vec![0u32; w * h];
    let mut region_sizes = Vec::new();
    let mut visited = vec![false; w * h];
    let mut queue = VecDeque::new();

    for start in 0..w * h {
        if visited[start] || clustering.assignment[start] != fg {
            continue;
        }
        // flood fill one component
        let mut component = Vec::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            component.push(i);
            let (x, y) = (i % w, i / w);
            let mut push = |nx: i64, ny: i64| {
                if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                    return;
                }
                let j = ny as usize * w + nx as usize;
                if !visited[j] && clustering.assignment[j] == fg {
                    visited[j] = true;
                    queue.push_back(j);
                }
            };
            let (x, y) = (x as i64, y as i64);
            push(x - 1, y);
            push(x + 1, y);
            push(x, y - 1);
            push(x, y + 1);
            if connectivity == Connectivity::Eight {
                push(x - 1, y - 1);
                push(x + 1, y - 1);
                push(x - 1, y + 1);
                push(x + 1, y + 1);
            }
        }
        if component.len() >= min_region_area {
            let id = region_sizes.len() as u32 + 1;
            for i in component.iter() {
                label_map[*i] = id;
            }
            region_sizes.push(component.len());
        }
    }

    Ok(RegionSet {
        width: w,
        height: h,
        label_map,
        region_sizes,
    })
}
