//! Binary PGM (P5) read/write. Intensities are 16-bit big-endian per the
//! netpbm convention; masks use 8-bit PGM with 255 = valid.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

const MAX16: f64 = 65535.0;

/// Writes intensities in [0,1] as a 16-bit PGM; values are clamped then
/// rounded to the nearest level.
pub fn write_pgm16(path: &Path, image: &Array2<f64>) -> Result<()> {
    let (h, w) = image.dim();
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P5\n{w} {h}\n65535\n")?;
    for v in image.iter() {
        let q = (v.clamp(0.0, 1.0) * MAX16).round() as u16;
        out.write_all(&q.to_be_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a 16-bit PGM back to intensities in [0,1].
pub fn read_pgm16(path: &Path) -> Result<Array2<f64>> {
    let (w, h, maxval, mut r) = read_header(path)?;
    if maxval != 65535 {
        return Err(Error::format(
            path,
            0,
            format!("expected maxval 65535, found {maxval}"),
        ));
    }
    let mut data = vec![0u8; w * h * 2];
    r.read_exact(&mut data)
        .map_err(|_| Error::format(path, 0, "truncated pixel data"))?;
    let pixels: Vec<f64> = data
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / MAX16)
        .collect();
    Array2::from_shape_vec((h, w), pixels).map_err(|e| Error::Shape(e.to_string()))
}

/// Writes arbitrary values linearly mapped from [min, max] onto the 16-bit
/// range. `min == max` writes all zeros.
pub fn write_pgm16_scaled(path: &Path, image: &Array2<f64>, min: f64, max: f64) -> Result<()> {
    let span = max - min;
    let scaled = image.mapv(|v| {
        if span > 0.0 {
            ((v - min) / span).clamp(0.0, 1.0)
        } else {
            0.0
        }
    });
    write_pgm16(path, &scaled)
}

pub fn write_pgm8_mask(path: &Path, mask: &Array2<bool>) -> Result<()> {
    let (h, w) = mask.dim();
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P5\n{w} {h}\n255\n")?;
    for &m in mask.iter() {
        out.write_all(&[if m { 255 } else { 0 }])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_pgm8_mask(path: &Path) -> Result<Array2<bool>> {
    let (w, h, maxval, mut r) = read_header(path)?;
    if maxval != 255 {
        return Err(Error::format(
            path,
            0,
            format!("expected maxval 255, found {maxval}"),
        ));
    }
    let mut data = vec![0u8; w * h];
    r.read_exact(&mut data)
        .map_err(|_| Error::format(path, 0, "truncated pixel data"))?;
    let flags: Vec<bool> = data.iter().map(|&b| b != 0).collect();
    Array2::from_shape_vec((h, w), flags).map_err(|e| Error::Shape(e.to_string()))
}

/// Parses "P5 <width> <height> <maxval>" allowing `#` comments, returning
/// the reader positioned at the first pixel byte.
fn read_header(path: &Path) -> Result<(usize, usize, u32, BufReader<File>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 2];
    r.read_exact(&mut magic)
        .map_err(|_| Error::format(path, 0, "missing magic"))?;
    if &magic != b"P5" {
        return Err(Error::format(path, 0, "expected P5 magic"));
    }
    let mut fields = [0u64; 3];
    for field in fields.iter_mut() {
        *field = read_token(&mut r, path)?;
    }
    let w = fields[0] as usize;
    let h = fields[1] as usize;
    if w == 0 || h == 0 {
        return Err(Error::format(path, 0, "zero image dimension"));
    }
    Ok((w, h, fields[2] as u32, r))
}

fn read_token(r: &mut BufReader<File>, path: &Path) -> Result<u64> {
    let mut byte = [0u8; 1];
    // Skip whitespace and comment lines.
    loop {
        r.read_exact(&mut byte)
            .map_err(|_| Error::format(path, 0, "truncated header"))?;
        match byte[0] {
            b' ' | b'\t' | b'\r' | b'\n' => continue,
            b'#' => {
                while byte[0] != b'\n' {
                    r.read_exact(&mut byte)
                        .map_err(|_| Error::format(path, 0, "truncated header"))?;
                }
            }
            _ => break,
        }
    }
    let mut value: u64 = 0;
    let mut seen = false;
    loop {
        match byte[0] {
            b'0'..=b'9' => {
                seen = true;
                value = value * 10 + (byte[0] - b'0') as u64;
            }
            b' ' | b'\t' | b'\r' | b'\n' => break,
            _ => return Err(Error::format(path, 0, "non-numeric header token")),
        }
        r.read_exact(&mut byte)
            .map_err(|_| Error::format(path, 0, "truncated header"))?;
    }
    if !seen {
        return Err(Error::format(path, 0, "missing header token"));
    }
    Ok(value)
}
