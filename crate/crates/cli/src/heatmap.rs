//! Scalar fields as CSV tables and grayscale PPM images.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use pgt_core::ScalarField;

use crate::CliError;

/// Rows `x1,x2,value`, one per node in storage order.
pub fn write_csv(field: &ScalarField, path: &Path) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "x1,x2,value")?;
    let grid = field.grid();
    for (idx, v) in field.values().iter().enumerate() {
        let x = grid.coords(idx);
        writeln!(w, "{:.17e},{:.17e},{:.17e}", x[0], x[1], v)?;
    }
    w.flush()?;
    Ok(())
}

/// Gray levels after min–max normalisation; a constant field is mid-gray.
pub fn gray_levels(field: &ScalarField) -> Vec<u8> {
    let (lo, hi) = field
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    field
        .values()
        .iter()
        .map(|&v| {
            if hi > lo {
                (255.0 * (v - lo) / (hi - lo)).round().clamp(0.0, 255.0) as u8
            } else {
                128
            }
        })
        .collect()
}

/// Binary PPM with equal channels. Image rows run over `x²` from the top,
/// columns over `x¹`.
pub fn ppm_bytes(field: &ScalarField) -> Vec<u8> {
    let n = field.grid().n();
    let gray = gray_levels(field);
    let mut out = format!("P6\n{n} {n}\n255\n").into_bytes();
    for row in (0..n).rev() {
        for col in 0..n {
            let g = gray[field.grid().index(col, row)];
            out.extend_from_slice(&[g, g, g]);
        }
    }
    out
}

/// Write `<prefix>.csv` and `<prefix>.ppm`; returns both paths.
pub fn emit_heatmap(field: &ScalarField, prefix: &Path) -> Result<(PathBuf, PathBuf), CliError> {
    field.check_finite()?;
    let csv = prefix.with_extension("csv");
    let ppm = prefix.with_extension("ppm");
    write_csv(field, &csv)?;
    std::fs::write(&ppm, ppm_bytes(field))?;
    Ok((csv, ppm))
}
