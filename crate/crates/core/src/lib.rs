//! Hyperspectral unmixing and maturity classification toolkit.
//!
//! The pipeline goes: calibrate a raw-intensity cube to relative reflectance,
//! smooth each pixel spectrum with a Savitzky-Golay filter, crop to the
//! analysis wavelength range, segment foreground samples with 2-means
//! clustering and connected-component indexing, estimate class endmembers by
//! spectrum averaging, unmix every foreground pixel with fully constrained
//! least squares, aggregate per-region confidences, and either train a
//! classification threshold or classify with a persisted model.
//!
//! See the `examples/` directory for one runnable example per capability and
//! the `hsi-maturity` binary for the command-line front end.

pub mod cube;
pub mod error;
pub mod maturity;
pub mod netpbm;
pub mod pipeline;
pub mod report;
pub mod segmentation;
pub mod synthgen;
pub mod unmixing;

mod linalg;

pub use error::{Error, Result};
