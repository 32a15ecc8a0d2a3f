//! Minimal Netpbm writers/readers: binary PGM (P5) for label and proportion
//! maps, binary PPM (P6) for RGB previews.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Write a binary PGM. `maxval` above 255 switches to 16-bit big-endian
/// samples, per the format.
pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, data: &[u16], maxval: u16) -> Result<()> {
    let path = path.as_ref();
    assert_eq!(data.len(), width * height);
    assert!(maxval > 0);
    let mut out = Vec::with_capacity(32 + data.len() * 2);
    write!(out, "P5\n{width} {height}\n{maxval}\n").unwrap();
    if maxval > 255 {
        for &v in data {
            out.extend_from_slice(&v.to_be_bytes());
        }
    } else {
        out.extend(data.iter().map(|&v| v as u8));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Write a binary PPM from `[0, 1]` RGB triples.
pub fn write_ppm(path: impl AsRef<Path>, width: usize, height: usize, pixels: &[[f64; 3]]) -> Result<()> {
    let path = path.as_ref();
    assert_eq!(pixels.len(), width * height);
    let mut out = Vec::with_capacity(32 + pixels.len() * 3);
    write!(out, "P6\n{width} {height}\n255\n").unwrap();
    for p in pixels {
        for c in p {
            out.push((c.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn parse_netpbm_header<'a>(path: &Path, bytes: &'a [u8], magic: &str) -> Result<(usize, usize, u16, &'a [u8])> {
    let bad = |msg: &str| Error::Header {
        path: path.to_path_buf(),
        msg: msg.into(),
    };
    let mut fields = Vec::new();
    let mut i = 0;
    // magic + 3 whitespace-separated integers, then a single whitespace byte
    while fields.len() < 4 && i < bytes.len() {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        fields.push(std::str::from_utf8(&bytes[start..i]).map_err(|_| bad("non-ascii header"))?);
    }
    if fields.len() != 4 || fields[0] != magic {
        return Err(bad("bad netpbm header"));
    }
    let w: usize = fields[1].parse().map_err(|_| bad("bad width"))?;
    let h: usize = fields[2].parse().map_err(|_| bad("bad height"))?;
    let maxval: u16 = fields[3].parse().map_err(|_| bad("bad maxval"))?;
    Ok((w, h, maxval, &bytes[i + 1..]))
}

/// Read a binary PGM written by [`write_pgm`].
pub fn read_pgm(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u16>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (w, h, maxval, body) = parse_netpbm_header(path, &bytes, "P5")?;
    let data = if maxval > 255 {
        if body.len() != w * h * 2 {
            return Err(Error::Header {
                path: path.to_path_buf(),
                msg: "short pgm payload".into(),
            });
        }
        body.chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        if body.len() != w * h {
            return Err(Error::Header {
                path: path.to_path_buf(),
                msg: "short pgm payload".into(),
            });
        }
        body.iter().map(|&b| b as u16).collect()
    };
    Ok((w, h, data))
}

/// Read a binary PPM written by [`write_ppm`]; returns `[0, 1]` triples.
pub fn read_ppm(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<[f64; 3]>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (w, h, _maxval, body) = parse_netpbm_header(path, &bytes, "P6")?;
    if body.len() != w * h * 3 {
        return Err(Error::Header {
            path: path.to_path_buf(),
            msg: "short ppm payload".into(),
        });
    }
    let pixels = body
        .chunks(3)
        .map(|c| [c[0] as f64 / 255.0, c[1] as f64 / 255.0, c[2] as f64 / 255.0])
        .collect();
    Ok((w, h, pixels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip_8bit() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        let data: Vec<u16> = (0..12).map(|i| (i * 20) as u16).collect();
        write_pgm(&p, 4, 3, &data, 255).unwrap();
        let (w, h, got) = read_pgm(&p).unwrap();
        assert_eq!((w, h), (4, 3));
        assert_eq!(got, data);
    }

    #[test]
    fn pgm_round_trip_16bit() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.pgm");
        let data: Vec<u16> = (0..6).map(|i| 300 + i as u16).collect();
        write_pgm(&p, 3, 2, &data, 1000).unwrap();
        let (_, _, got) = read_pgm(&p).unwrap();
        assert_eq!(got, data);
    }

    #[test]
    fn ppm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.ppm");
        let pixels = vec![[0.0, 0.5, 1.0], [1.0, 0.0, 0.25]];
        write_ppm(&p, 2, 1, &pixels).unwrap();
        let (w, h, got) = read_ppm(&p).unwrap();
        assert_eq!((w, h), (2, 1));
        for (a, b) in got.iter().zip(&pixels) {
            for d in 0..3 {
                assert!((a[d] - b[d]).abs() <= 0.5 / 255.0 + 1e-12);
            }
        }
    }
}
