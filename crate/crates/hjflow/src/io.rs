//! File formats: CSV field dumps, PGM masks/heatmaps, JSON reports.

use crate::error::{Error, Result};
use crate::geometry::GridDomain;
use std::io::Write;
use std::path::Path;

/// 17 significant digits; round-trips f64 exactly. Infinities spell "inf".
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v.is_nan() {
        "nan".into()
    } else {
        format!("{:.16e}", v)
    }
}

/// Write a node field as CSV rows (i, j, x1, x2, value), header included.
/// Nodes outside the mask are skipped.
pub fn write_field_csv(path: &Path, grid: &GridDomain, values: &[f64]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "i,j,x1,x2,value")?;
    for node in grid.inside_nodes() {
        let (i, j) = grid.coords(node);
        let p = grid.pos(node);
        writeln!(
            out,
            "{},{},{},{},{}",
            i,
            j,
            fmt_f64(p.x),
            fmt_f64(p.y),
            fmt_f64(values[node])
        )?;
    }
    Ok(())
}

/// Write front node sets as CSV rows (k, i, j).
pub fn write_fronts_csv(path: &Path, grid: &GridDomain, fronts: &[Vec<usize>]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "k,i,j")?;
    for (k, nodes) in fronts.iter().enumerate() {
        for node in nodes {
            let (i, j) = grid.coords(*node);
            writeln!(out, "{},{},{}", k, i, j)?;
        }
    }
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Binary PGM (P5) heatmap of a field; non-finite and outside nodes map to 0.
pub fn write_pgm_heatmap(path: &Path, grid: &GridDomain, values: &[f64]) -> Result<()> {
    let (nx, ny) = grid.dims();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for node in grid.inside_nodes() {
        let v = values[node];
        if v.is_finite() && v.abs() < 1e11 {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || hi <= lo {
        lo = 0.0;
        hi = 1.0;
    }
    let mut data = vec![0u8; nx * ny];
    for node in grid.inside_nodes() {
        let (i, j) = grid.coords(node);
        let v = values[node];
        let g = if v.is_finite() && v.abs() < 1e11 {
            (1.0 + 254.0 * (v - lo) / (hi - lo)).round() as u8
        } else {
            0
        };
        // image row 0 is the top of the domain
        data[(ny - 1 - j) * nx + i] = g;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "P5\n{} {}\n255\n", nx, ny)?;
    out.write_all(&data)?;
    Ok(())
}

/// Read a PGM mask (P2 or P5); returns (width, height, pixels) with row 0 at the top.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = std::fs::read(path)?;
    let header_err = || Error::Parse(format!("{}: not a valid PGM", path.display()));
    let mut pos = 0usize;
    let mut tokens: Vec<(usize, String)> = Vec::new();
    // tokenize the header (magic, width, height, maxval), honoring comments
    while tokens.len() < 4 && pos < bytes.len() {
        let b = bytes[pos];
        if b == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else if b.is_ascii_whitespace() {
            pos += 1;
        } else {
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            tokens.push((start, String::from_utf8_lossy(&bytes[start..pos]).into_owned()));
        }
    }
    if tokens.len() < 4 {
        return Err(header_err());
    }
    let magic = tokens[0].1.clone();
    let w: usize = tokens[1].1.parse().map_err(|_| header_err())?;
    let h: usize = tokens[2].1.parse().map_err(|_| header_err())?;
    let _maxval: usize = tokens[3].1.parse().map_err(|_| header_err())?;
    match magic.as_str() {
        "P5" => {
            let data_start = pos + 1; // single whitespace after maxval
            if bytes.len() < data_start + w * h {
                return Err(header_err());
            }
            Ok((w, h, bytes[data_start..data_start + w * h].to_vec()))
        }
        "P2" => {
            let text = String::from_utf8_lossy(&bytes[pos..]);
            let vals: Vec<u8> = text
                .split_whitespace()
                .take(w * h)
                .map(|t| t.parse::<u32>().map(|v| v.min(255) as u8))
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| header_err())?;
            if vals.len() != w * h {
                return Err(header_err());
            }
            Ok((w, h, vals))
        }
        _ => Err(header_err()),
    }
}
