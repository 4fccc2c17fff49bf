//! Wrapped/unwrapped phase maps and the wrap convention used everywhere.

use std::f64::consts::{PI, TAU};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::pgm;

/// Wraps `x` into `[-pi, pi)`, with `+pi` mapped to `-pi` so the boundary
/// has a single representative.
pub fn wrap(x: f64) -> f64 {
    let w = (x + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to TAU when x + PI is a tiny negative number.
    if w >= PI {
        -PI
    } else {
        w
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseKind {
    Wrapped,
    Unwrapped,
    /// Dimensionless estimator diagnostics stored in the same container.
    SelfTest,
}

impl PhaseKind {
    fn to_flag(self) -> u32 {
        match self {
            PhaseKind::Wrapped => 0,
            PhaseKind::Unwrapped => 1,
            PhaseKind::SelfTest => 2,
        }
    }

    fn from_flag(flag: u32) -> Option<Self> {
        match flag {
            0 => Some(PhaseKind::Wrapped),
            1 => Some(PhaseKind::Unwrapped),
            2 => Some(PhaseKind::SelfTest),
            _ => None,
        }
    }
}

/// Per-pixel phase values in radians with a validity mask.
///
/// Arrays are indexed `[y, x]` (row, column).
#[derive(Clone, Debug)]
pub struct PhaseMap {
    pub values: Array2<f64>,
    pub kind: PhaseKind,
    pub mask: Array2<bool>,
}

const MAGIC: &[u8; 4] = b"PMAP";
const HEADER_LEN: u64 = 24;

impl PhaseMap {
    pub fn new(values: Array2<f64>, kind: PhaseKind, mask: Array2<bool>) -> Result<Self> {
        if values.dim() != mask.dim() {
            return Err(Error::Shape(format!(
                "mask dimensions {:?} do not match values {:?}",
                mask.dim(),
                values.dim()
            )));
        }
        Ok(PhaseMap { values, kind, mask })
    }

    /// All-valid map of the given kind.
    pub fn full(values: Array2<f64>, kind: PhaseKind) -> Self {
        let mask = Array2::from_elem(values.dim(), true);
        PhaseMap { values, kind, mask }
    }

    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    pub fn height(&self) -> usize {
        self.values.nrows()
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Writes the 24-byte header (magic, width, height, kind flag) followed
    /// by row-major little-endian f64 values; the mask goes to a sidecar
    /// 8-bit PGM next to `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&(self.width() as u64).to_le_bytes())?;
        w.write_all(&(self.height() as u64).to_le_bytes())?;
        w.write_all(&self.kind.to_flag().to_le_bytes())?;
        for v in self.values.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        pgm::write_pgm8_mask(&mask_path(path), &self.mask)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        read_exact_at(&mut r, &mut magic, path, 0)?;
        if &magic != MAGIC {
            return Err(Error::format(path, 0, "bad magic, expected PMAP"));
        }
        let mut buf8 = [0u8; 8];
        read_exact_at(&mut r, &mut buf8, path, 4)?;
        let width = u64::from_le_bytes(buf8) as usize;
        read_exact_at(&mut r, &mut buf8, path, 12)?;
        let height = u64::from_le_bytes(buf8) as usize;
        let mut buf4 = [0u8; 4];
        read_exact_at(&mut r, &mut buf4, path, 20)?;
        let flag = u32::from_le_bytes(buf4);
        let kind = PhaseKind::from_flag(flag)
            .ok_or_else(|| Error::format(path, 20, format!("unknown kind flag {flag}")))?;

        let count = width
            .checked_mul(height)
            .ok_or_else(|| Error::format(path, 4, "width*height overflows"))?;
        let mut data = Vec::with_capacity(count);
        for i in 0..count {
            read_exact_at(&mut r, &mut buf8, path, HEADER_LEN + 8 * i as u64)?;
            data.push(f64::from_le_bytes(buf8));
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(Error::format(
                path,
                HEADER_LEN + 8 * count as u64,
                "trailing bytes after pixel data",
            ));
        }
        let values = Array2::from_shape_vec((height, width), data)
            .map_err(|e| Error::Shape(e.to_string()))?;
        let mask = pgm::read_pgm8_mask(&mask_path(path))?;
        PhaseMap::new(values, kind, mask)
    }
}

fn mask_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".mask.pgm");
    std::path::PathBuf::from(s)
}

fn read_exact_at(r: &mut impl Read, buf: &mut [u8], path: &Path, offset: u64) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::format(path, offset, "unexpected end of file"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_convention() {
        assert_eq!(wrap(PI), -PI);
        assert_eq!(wrap(-PI), -PI);
        assert_eq!(wrap(0.0), 0.0);
        // 3*pi lands on the boundary representative.
        assert!((wrap(3.0 * PI) - (-PI)).abs() < 1e-12);
        assert!((wrap(-PI - 0.1) - (PI - 0.1)).abs() < 1e-12);
        assert!((wrap(0.5) - 0.5).abs() < 1e-15);
        assert!((wrap(TAU + 0.25) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn wrap_stays_in_range() {
        let mut x = -50.0;
        while x < 50.0 {
            let w = wrap(x);
            assert!((-PI..PI).contains(&w), "wrap({x}) = {w} out of range");
            x += 0.0137;
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pmap");
        let values = Array2::from_shape_fn((5, 7), |(y, x)| (y as f64) - 0.31 * x as f64);
        let mut mask = Array2::from_elem((5, 7), true);
        mask[[2, 3]] = false;
        let map = PhaseMap::new(values, PhaseKind::Unwrapped, mask).unwrap();
        map.save(&path).unwrap();
        let back = PhaseMap::load(&path).unwrap();
        assert_eq!(back.kind, PhaseKind::Unwrapped);
        assert_eq!(back.values, map.values);
        assert_eq!(back.mask, map.mask);
    }

    #[test]
    fn load_rejects_truncation_and_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pmap");
        let map = PhaseMap::full(Array2::zeros((3, 3)), PhaseKind::Wrapped);
        map.save(&path).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(PhaseMap::load(&path), Err(Error::Format { .. })));

        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(PhaseMap::load(&path), Err(Error::Format { .. })));
    }
}
