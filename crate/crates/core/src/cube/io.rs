//! Cube file pair: a `key = value` text header (`.hdr`) plus a raw
//! little-endian binary payload (`.raw`), following the ENVI convention.
//!
//! Required header keys: `samples`, `lines`, `bands`, `interleave`
//! (`bsq` or `bil`), `data type` (`float32`, `float64` or `uint16`) and
//! `wavelength = {comma list}`. `float64` is the default on save so that
//! save/load is bit-exact for any cube.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::cube::{HyperCube, WavelengthAxis};
use crate::error::{Error, Result};

/// Band ordering of the raw payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interleave {
    /// Band-sequential: all pixels of band 0, then band 1, ...
    Bsq,
    /// Band-interleaved-by-line: per image line, all bands of that line.
    Bil,
}

impl fmt::Display for Interleave {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Interleave::Bsq => "bsq",
            Interleave::Bil => "bil",
        })
    }
}

impl FromStr for Interleave {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bsq" => Ok(Interleave::Bsq),
            "bil" => Ok(Interleave::Bil),
            other => Err(format!("unsupported interleave '{other}'")),
        }
    }
}

/// On-disk sample encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleType {
    Float32,
    Float64,
    Uint16,
}

impl SampleType {
    pub fn bytes(self) -> usize {
        match self {
            SampleType::Float32 => 4,
            SampleType::Float64 => 8,
            SampleType::Uint16 => 2,
        }
    }
}

impl fmt::Display for SampleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SampleType::Float32 => "float32",
            SampleType::Float64 => "float64",
            SampleType::Uint16 => "uint16",
        })
    }
}

impl FromStr for SampleType {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "float32" => Ok(SampleType::Float32),
            "float64" => Ok(SampleType::Float64),
            "uint16" => Ok(SampleType::Uint16),
            other => Err(format!("unsupported sample type '{other}'")),
        }
    }
}

fn raw_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("raw")
}

fn header_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Header {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

struct Header {
    samples: usize,
    lines: usize,
    bands: usize,
    interleave: Interleave,
    sample_type: SampleType,
    wavelengths: Vec<f64>,
}

fn parse_header(path: &Path, text: &str) -> Result<Header> {
    let mut samples = None;
    let mut lines_n = None;
    let mut bands = None;
    let mut interleave = None;
    let mut sample_type = None;
    let mut wavelengths: Option<Vec<f64>> = None;

    // merge physical lines while a brace block is open
    let mut entries: Vec<String> = Vec::new();
    let mut depth = 0usize;
    for line in text.lines() {
        if depth > 0 {
            let last = entries.last_mut().unwrap();
            last.push(' ');
            last.push_str(line);
        } else if !line.trim().is_empty() {
            entries.push(line.to_string());
        } else {
            continue;
        }
        depth += line.matches('{').count();
        depth = depth.saturating_sub(line.matches('}').count());
    }

    for entry in entries {
        let Some((key, value)) = entry.split_once('=') else {
            return Err(header_err(path, format!("line without '=': '{}'", entry.trim())));
        };
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        match key.as_str() {
            "samples" | "lines" | "bands" => {
                let n: usize = value
                    .parse()
                    .map_err(|_| header_err(path, format!("bad integer for {key}: '{value}'")))?;
                match key.as_str() {
                    "samples" => samples = Some(n),
                    "lines" => lines_n = Some(n),
                    _ => bands = Some(n),
                }
            }
            "interleave" => {
                interleave = Some(value.parse().map_err(|e| header_err(path, e))?);
            }
            "data type" => {
                sample_type = Some(value.parse().map_err(|e| header_err(path, e))?);
            }
            "wavelength" => {
                let inner = value
                    .strip_prefix('{')
                    .and_then(|v| v.strip_suffix('}'))
                    .ok_or_else(|| header_err(path, "wavelength list must be brace-delimited"))?;
                let ws: std::result::Result<Vec<f64>, _> = inner
                    .split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect();
                wavelengths =
                    Some(ws.map_err(|_| header_err(path, "bad number in wavelength list"))?);
            }
            _ => {} // unknown keys are ignored
        }
    }

    let header = Header {
        samples: samples.ok_or_else(|| header_err(path, "missing key 'samples'"))?,
        lines: lines_n.ok_or_else(|| header_err(path, "missing key 'lines'"))?,
        bands: bands.ok_or_else(|| header_err(path, "missing key 'bands'"))?,
        interleave: interleave.ok_or_else(|| header_err(path, "missing key 'interleave'"))?,
        sample_type: sample_type.ok_or_else(|| header_err(path, "missing key 'data type'"))?,
        wavelengths: wavelengths.ok_or_else(|| header_err(path, "missing key 'wavelength'"))?,
    };
    if header.wavelengths.len() != header.bands {
        return Err(header_err(
            path,
            format!(
                "bands = {} but wavelength list has {} entries",
                header.bands,
                header.wavelengths.len()
            ),
        ));
    }
    Ok(header)
}

fn decode_sample(bytes: &[u8], sample_type: SampleType, i: usize) -> f64 {
    match sample_type {
        SampleType::Float32 => {
            f32::from_le_bytes(bytes[i * 4..i * 4 + 4].try_into().unwrap()) as f64
        }
        SampleType::Float64 => f64::from_le_bytes(bytes[i * 8..i * 8 + 8].try_into().unwrap()),
        SampleType::Uint16 => u16::from_le_bytes(bytes[i * 2..i * 2 + 2].try_into().unwrap()) as f64,
    }
}

/// Read a cube from its header path; the raw payload is expected next to the
/// header with a `.raw` extension.
pub fn load_cube(header_path: impl AsRef<Path>) -> Result<HyperCube> {
    let header_path = header_path.as_ref();
    let text = fs::read_to_string(header_path).map_err(|e| Error::io(header_path, e))?;
    let header = parse_header(header_path, &text)?;
    let axis = WavelengthAxis::new(header.wavelengths)?;

    let raw = raw_path(header_path);
    let bytes = fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
    let n = header.samples * header.lines * header.bands;
    let expected = (n * header.sample_type.bytes()) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::PayloadSize {
            path: raw,
            expected,
            actual: bytes.len() as u64,
        });
    }

    let (w, h, bands) = (header.samples, header.lines, header.bands);
    let mut values = vec![0.0f64; n];
    match header.interleave {
        Interleave::Bsq => {
            for b in 0..bands {
                for p in 0..w * h {
                    values[p * bands + b] = decode_sample(&bytes, header.sample_type, b * w * h + p);
                }
            }
        }
        Interleave::Bil => {
            for y in 0..h {
                for b in 0..bands {
                    for x in 0..w {
                        values[(y * w + x) * bands + b] =
                            decode_sample(&bytes, header.sample_type, (y * bands + b) * w + x);
                    }
                }
            }
        }
    }
    HyperCube::new(w, h, axis, values)
}

/// Write `cube` as band-sequential float64 (lossless round-trip).
pub fn save_cube(cube: &HyperCube, header_path: impl AsRef<Path>) -> Result<()> {
    save_cube_with(cube, header_path, Interleave::Bsq, SampleType::Float64)
}

/// Write `cube` with an explicit interleave and sample encoding.
pub fn save_cube_with(
    cube: &HyperCube,
    header_path: impl AsRef<Path>,
    interleave: Interleave,
    sample_type: SampleType,
) -> Result<()> {
    let header_path = header_path.as_ref();
    let (w, h, bands) = (cube.width(), cube.height(), cube.bands());

    let encode = |out: &mut Vec<u8>, v: f64, index: usize| -> Result<()> {
        match sample_type {
            SampleType::Float32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            SampleType::Float64 => out.extend_from_slice(&v.to_le_bytes()),
            SampleType::Uint16 => {
                if v < 0.0 || v > u16::MAX as f64 || v.fract() != 0.0 {
                    return Err(Error::SampleRange {
                        value: v,
                        index,
                        sample_type: "uint16",
                    });
                }
                out.extend_from_slice(&(v as u16).to_le_bytes());
            }
        }
        Ok(())
    };

    let mut payload = Vec::with_capacity(w * h * bands * sample_type.bytes());
    match interleave {
        Interleave::Bsq => {
            for b in 0..bands {
                for p in 0..w * h {
                    encode(&mut payload, cube.values()[p * bands + b], b * w * h + p)?;
                }
            }
        }
        Interleave::Bil => {
            for y in 0..h {
                for b in 0..bands {
                    for x in 0..w {
                        encode(
                            &mut payload,
                            cube.values()[(y * w + x) * bands + b],
                            (y * bands + b) * w + x,
                        )?;
                    }
                }
            }
        }
    }

    let wavelengths = cube
        .axis()
        .wavelengths()
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    let header = format!(
        "samples = {w}\nlines = {h}\nbands = {bands}\ninterleave = {interleave}\ndata type = {sample_type}\nwavelength = {{{wavelengths}}}\n"
    );

    let mut f = fs::File::create(header_path).map_err(|e| Error::io(header_path, e))?;
    f.write_all(header.as_bytes())
        .map_err(|e| Error::io(header_path, e))?;
    let raw = raw_path(header_path);
    fs::write(&raw, payload).map_err(|e| Error::io(&raw, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cube() -> HyperCube {
        let axis = WavelengthAxis::new(vec![460.0, 550.0, 640.0]).unwrap();
        HyperCube::from_fn(2, 2, axis, |x, y, b| {
            0.25 * (x as f64) + 0.125 * (y as f64) + 0.5 * (b as f64)
        })
        .unwrap()
    }

    #[test]
    fn round_trip_f64_bsq() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.hdr");
        let c = small_cube();
        save_cube(&c, &p).unwrap();
        assert_eq!(load_cube(&p).unwrap(), c);
    }

    #[test]
    fn round_trip_f32_bil() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.hdr");
        let c = small_cube(); // values exactly representable in f32
        save_cube_with(&c, &p, Interleave::Bil, SampleType::Float32).unwrap();
        assert_eq!(load_cube(&p).unwrap(), c);
    }

    #[test]
    fn round_trip_u16() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.hdr");
        let axis = WavelengthAxis::new(vec![400.0, 500.0]).unwrap();
        let c = HyperCube::from_fn(3, 2, axis, |x, y, b| (100 * x + 10 * y + b) as f64).unwrap();
        save_cube_with(&c, &p, Interleave::Bsq, SampleType::Uint16).unwrap();
        assert_eq!(load_cube(&p).unwrap(), c);
    }

    #[test]
    fn one_band_cube_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("one.hdr");
        let axis = WavelengthAxis::new(vec![700.0]).unwrap();
        let c = HyperCube::from_fn(3, 2, axis, |x, y, _| (x + y) as f64 * 0.25).unwrap();
        save_cube(&c, &p).unwrap();
        assert_eq!(load_cube(&p).unwrap(), c);
    }

    #[test]
    fn truncated_payload_is_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.hdr");
        let c = small_cube();
        save_cube(&c, &p).unwrap();
        // drop one band worth of data
        let raw = p.with_extension("raw");
        let bytes = std::fs::read(&raw).unwrap();
        std::fs::write(&raw, &bytes[..bytes.len() - 4 * 8]).unwrap();
        assert!(matches!(load_cube(&p), Err(Error::PayloadSize { .. })));
    }

    #[test]
    fn missing_raw_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.hdr");
        save_cube(&small_cube(), &p).unwrap();
        std::fs::remove_file(p.with_extension("raw")).unwrap();
        assert!(matches!(load_cube(&p), Err(Error::Io { .. })));
    }

    #[test]
    fn non_increasing_wavelengths_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.hdr");
        save_cube(&small_cube(), &p).unwrap();
        let text = std::fs::read_to_string(&p)
            .unwrap()
            .replace("{460, 550, 640}", "{640, 550, 460}");
        std::fs::write(&p, text).unwrap();
        assert!(matches!(load_cube(&p), Err(Error::BadAxis)));
    }

    #[test]
    fn unsupported_sample_type_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.hdr");
        save_cube(&small_cube(), &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap().replace("float64", "int32");
        std::fs::write(&p, text).unwrap();
        assert!(matches!(load_cube(&p), Err(Error::Header { .. })));
    }

    #[test]
    fn wavelength_list_may_wrap_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.hdr");
        let c = small_cube();
        save_cube(&c, &p).unwrap();
        let text = std::fs::read_to_string(&p)
            .unwrap()
            .replace("{460, 550, 640}", "{460,\n 550,\n 640}");
        std::fs::write(&p, text).unwrap();
        assert_eq!(load_cube(&p).unwrap(), c);
    }

    #[test]
    fn u16_rejects_fractional_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.hdr");
        let c = small_cube();
        assert!(matches!(
            save_cube_with(&c, &p, Interleave::Bsq, SampleType::Uint16),
            Err(Error::SampleRange { .. })
        ));
    }

    #[test]
    fn file_size_matches_arithmetic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.hdr");
        let axis = WavelengthAxis::uniform(650.0, 1000.0, 50).unwrap();
        let c = HyperCube::from_fn(16, 16, axis, |x, y, b| ((x + y + b) % 7) as f64 * 0.1).unwrap();
        save_cube(&c, &p).unwrap();
        let raw_len = std::fs::metadata(p.with_extension("raw")).unwrap().len();
        assert_eq!(raw_len, 16 * 16 * 50 * 8);
    }
}
