//! Field snapshot files and CSV emission.
//!
//! Snapshot format (EVF1), all integers and floats little-endian:
//!
//! ```text
//! bytes 0..4    magic "EVF1"
//! u32           dim (1..=3)
//! dim x u32     points per axis
//! dim x f64     period per axis
//! u32           label byte length, then that many UTF-8 bytes
//! n_total x f64 row-major samples
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, RealField};

const MAGIC: &[u8; 4] = b"EVF1";

pub fn write_field(path: &Path, field: &RealField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    let grid = field.grid;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    for &n in grid.points() {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    for &l in grid.lengths() {
        w.write_all(&l.to_le_bytes())?;
    }
    let label = field.label.as_bytes();
    w.write_all(&(label.len() as u32).to_le_bytes())?;
    w.write_all(label)?;
    for v in &field.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<RealField> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic {:?}, expected EVF1",
            path.display(),
            magic
        )));
    }
    let dim = read_u32(&mut r)? as usize;
    if !(1..=3).contains(&dim) {
        return Err(Error::Format(format!("bad dim {dim}")));
    }
    let mut points = Vec::with_capacity(dim);
    for _ in 0..dim {
        points.push(read_u32(&mut r)? as usize);
    }
    let mut lengths = Vec::with_capacity(dim);
    for _ in 0..dim {
        lengths.push(read_f64(&mut r)?);
    }
    let label_len = read_u32(&mut r)? as usize;
    if label_len > 1 << 20 {
        return Err(Error::Format(format!(
            "label length {label_len} implausible"
        )));
    }
    let mut label = vec![0u8; label_len];
    r.read_exact(&mut label)?;
    let label =
        String::from_utf8(label).map_err(|e| Error::Format(format!("label not UTF-8: {e}")))?;
    let grid = Grid::new(dim, &points, &lengths)?;
    let total = grid.total_points();
    let mut values = Vec::with_capacity(total);
    for _ in 0..total {
        values.push(read_f64(&mut r)?);
    }
    RealField::new(grid, values, &label)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Plain CSV with deterministic float formatting (shortest round-trip form).
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v}")
    }
}
