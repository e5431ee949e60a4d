//! On-disk formats for grid fields.
//!
//! Binary layout: the magic `TOTF`, then `n1`, `n2` and a flag word as
//! little-endian `u32` (bit 0 = zero-mean), then `n1·n2` little-endian `f64`
//! values in row-major order (`x1` slow).
//!
//! CSV layout: header `x1,x2,value`, one row per node in the same order,
//! numbers printed with 17 significant digits.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, ScalarField};

pub const MAGIC: &[u8; 4] = b"TOTF";
pub const FLAG_ZERO_MEAN: u32 = 1;

pub fn encode(field: &ScalarField) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(16 + 8 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.n1() as u32).to_le_bytes());
    out.extend_from_slice(&(g.n2() as u32).to_le_bytes());
    let flags = if field.is_zero_mean() { FLAG_ZERO_MEAN } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<ScalarField> {
    if bytes.len() < 16 || &bytes[0..4] != MAGIC {
        return Err(Error::Format("missing TOTF header".into()));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().unwrap());
    let (n1, n2, flags) = (word(4) as usize, word(8) as usize, word(12));
    let grid = PeriodicGrid::new(n1, n2)
        .map_err(|e| Error::Format(format!("bad header: {e}")))?;
    let expected = 16 + 8 * grid.len();
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "expected {expected} bytes for {n1}×{n2}, found {}",
            bytes.len()
        )));
    }
    let values = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let field = ScalarField::from_values(grid, values)?;
    let zero_mean = flags & FLAG_ZERO_MEAN != 0;
    if zero_mean {
        let scale = field.sup_norm();
        if field.mean().abs() > 1e-13 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Format(format!(
                "field flagged zero-mean has mean {:.3e}",
                field.mean()
            )));
        }
    }
    Ok(field.with_zero_mean_flag(zero_mean))
}

pub fn write_binary(path: impl AsRef<Path>, field: &ScalarField) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(&encode(field))?;
    f.flush()?;
    Ok(())
}

pub fn read_binary(path: impl AsRef<Path>) -> Result<ScalarField> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

/// Format with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_csv(field: &ScalarField) -> String {
    let g = field.grid();
    let mut s = String::from("x1,x2,value\n");
    for i in 0..g.n1() {
        for j in 0..g.n2() {
            s.push_str(&fmt17(g.x1(i)));
            s.push(',');
            s.push_str(&fmt17(g.x2(j)));
            s.push(',');
            s.push_str(&fmt17(field.at(i, j)));
            s.push('\n');
        }
    }
    s
}

pub fn write_csv(path: impl AsRef<Path>, field: &ScalarField) -> Result<()> {
    std::fs::write(path, to_csv(field))?;
    Ok(())
}
