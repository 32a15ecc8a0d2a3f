//! Savitzky-Golay spectral smoothing.
//!
//! Each pixel spectrum is replaced, band by band, by the value at the window
//! centre of a least-squares polynomial fit over the surrounding `width`
//! samples. Near the spectrum edges the window is truncated to the available
//! samples and the fit degree reduced to `min(order, window_len - 1)`; no
//! data are invented outside the measured range.

use rayon::prelude::*;

use crate::cube::HyperCube;
use crate::error::{Error, Result};
use crate::linalg;

/// Convolution weights for one output position: the smoothed value is the dot
/// product of `weights` with `spectrum[lo..lo + weights.len()]`.
struct Window {
    lo: usize,
    weights: Vec<f64>,
}

/// Least-squares weights for evaluating a degree-`deg` polynomial fit at
/// offset `center` within a window of `len` samples.
fn window_weights(len: usize, center: usize, deg: usize) -> Vec<f64> {
    let cols = deg + 1;
    // Vandermonde in positions relative to the evaluation point
    let mut a = vec![0.0; len * cols];
    for j in 0..len {
        let t = j as f64 - center as f64;
        let mut pw = 1.0;
        for k in 0..cols {
            a[j * cols + k] = pw;
            pw *= t;
        }
    }
    // normal matrix N = A^T A
    let mut n = vec![0.0; cols * cols];
    for j in 0..len {
        for r in 0..cols {
            for c in 0..cols {
                n[r * cols + c] += a[j * cols + r] * a[j * cols + c];
            }
        }
    }
    // w_j = row_j(A) . N^{-1} e_0
    let mut e0 = vec![0.0; cols];
    e0[0] = 1.0;
    let z = linalg::solve(&n, &e0, cols).expect("SG normal matrix is positive definite");
    (0..len)
        .map(|j| (0..cols).map(|k| a[j * cols + k] * z[k]).sum())
        .collect()
}

fn build_windows(bands: usize, order: usize, width: usize) -> Vec<Window> {
    let half = width / 2;
    (0..bands)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(bands);
            let len = hi - lo;
            let deg = order.min(len - 1);
            Window {
                lo,
                weights: window_weights(len, i - lo, deg),
            }
        })
        .collect()
}

/// Smooth every pixel spectrum of `cube` with a Savitzky-Golay filter.
pub fn savgol_smooth(cube: &HyperCube, order: usize, width: usize) -> Result<HyperCube> {
    if width % 2 == 0 {
        return Err(Error::EvenWindow(width));
    }
    if order >= width {
        return Err(Error::OrderTooHigh { order, width });
    }
    let bands = cube.bands();
    let windows = build_windows(bands, order, width);

    let values: Vec<f64> = cube
        .values()
        .par_chunks(bands)
        .flat_map_iter(|spec| {
            windows
                .iter()
                .map(|w| {
                    w.weights
                        .iter()
                        .zip(&spec[w.lo..w.lo + w.weights.len()])
                        .map(|(c, v)| c * v)
                        .sum::<f64>()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    HyperCube::new(cube.width(), cube.height(), cube.axis().clone(), values)
}

/// Smooth a single spectrum; used by tests and spot checks.
pub fn savgol_smooth_spectrum(values: &[f64], order: usize, width: usize) -> Result<Vec<f64>> {
    if width % 2 == 0 {
        return Err(Error::EvenWindow(width));
    }
    if order >= width {
        return Err(Error::OrderTooHigh { order, width });
    }
    let windows = build_windows(values.len(), order, width);
    Ok(windows
        .iter()
        .map(|w| {
            w.weights
                .iter()
                .zip(&values[w.lo..w.lo + w.weights.len()])
                .map(|(c, v)| c * v)
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::WavelengthAxis;

    /// Independent oracle: per output index, fit a polynomial by solving the
    /// normal equations directly on the raw monomials (no weight
    /// precomputation, positions not re-centred) and evaluate at the centre.
    fn oracle(values: &[f64], order: usize, width: usize) -> Vec<f64> {
        let n = values.len();
        let half = width / 2;
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(half);
                let hi = (i + half + 1).min(n);
                let deg = order.min(hi - lo - 1);
                let cols = deg + 1;
                // normal equations sum_j t^r t^c, centred at window start
                let mut m = vec![0.0; cols * cols];
                let mut rhs = vec![0.0; cols];
                for j in lo..hi {
                    let t = (j - lo) as f64;
                    for r in 0..cols {
                        rhs[r] += t.powi(r as i32) * values[j];
                        for c in 0..cols {
                            m[r * cols + c] += t.powi((r + c) as i32);
                        }
                    }
                }
                let coef = crate::linalg::solve(&m, &rhs, cols).unwrap();
                let t = (i - lo) as f64;
                (0..cols).map(|k| coef[k] * t.powi(k as i32)).sum()
            })
            .collect()
    }

    fn cube_from_spectrum(values: &[f64]) -> HyperCube {
        let axis = WavelengthAxis::uniform(650.0, 1000.0, values.len()).unwrap();
        HyperCube::new(1, 1, axis, values.to_vec()).unwrap()
    }

    #[test]
    fn preserves_cubic_at_order_4_width_25() {
        let n = 60;
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let x = i as f64 / n as f64;
                2.0 * x * x * x - x + 0.1
            })
            .collect();
        let c = cube_from_spectrum(&vals);
        let out = savgol_smooth(&c, 4, 25).unwrap();
        for (a, b) in out.values().iter().zip(&vals) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn preserves_constant() {
        let c = cube_from_spectrum(&vec![0.7; 40]);
        let out = savgol_smooth(&c, 4, 25).unwrap();
        for v in out.values() {
            assert!((v - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_windowed_polyfit_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let vals: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
        let got = savgol_smooth_spectrum(&vals, 2, 5).unwrap();
        let want = oracle(&vals, 2, 5);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn linearity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..80).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = (0..80).map(|_| rng.random::<f64>()).collect();
        let (a, b) = (1.7, -0.4);
        let mixed: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| a * x + b * y).collect();
        let sx = savgol_smooth_spectrum(&xs, 4, 25).unwrap();
        let sy = savgol_smooth_spectrum(&ys, 4, 25).unwrap();
        let sm = savgol_smooth_spectrum(&mixed, 4, 25).unwrap();
        for i in 0..80 {
            assert!((sm[i] - (a * sx[i] + b * sy[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn short_spectrum_is_fine() {
        // fewer bands than the window: every window truncated, degree reduced
        let vals = [0.1, 0.4, 0.2, 0.9, 0.3];
        let got = savgol_smooth_spectrum(&vals, 4, 25).unwrap();
        // 5 points, degree 4 -> exact interpolation everywhere
        for (a, b) in got.iter().zip(&vals) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn parameter_validation() {
        let c = cube_from_spectrum(&vec![0.5; 30]);
        assert!(matches!(savgol_smooth(&c, 4, 24), Err(Error::EvenWindow(24))));
        assert!(matches!(
            savgol_smooth(&c, 7, 7),
            Err(Error::OrderTooHigh { .. })
        ));
    }
}
