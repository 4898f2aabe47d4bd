//! Plot-ready CSV artifacts and the JSON run manifest.
//!
//! All numeric values are written with 17 significant digits so emitted
//! files re-parse to the exact in-memory doubles, and the byte content is a
//! pure function of the run configuration.

use std::fs;
use std::path::Path;

use kinetic_core::montecarlo::Histogram;

use crate::CliError;

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content)
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}

/// Histogram CSV: header plus one `bin_left,bin_right,density` row per bin.
pub fn emit_histogram_csv(h: &Histogram, path: &Path) -> Result<(), CliError> {
    let mut out = String::from("bin_left,bin_right,density\n");
    for b in 0..h.density().len() {
        out.push_str(&fmt(h.edges()[b]));
        out.push(',');
        out.push_str(&fmt(h.edges()[b + 1]));
        out.push(',');
        out.push_str(&fmt(h.density()[b]));
        out.push('\n');
    }
    write_file(path, &out)
}

/// Trace CSV: `t,<name1>,<name2>,...` with one row per sample time.
pub fn emit_trace_csv(
    times: &[f64],
    columns: &[(&str, Vec<f64>)],
    path: &Path,
) -> Result<(), CliError> {
    let mut out = String::from("t");
    for (name, values) in columns {
        assert_eq!(values.len(), times.len(), "column {name} length mismatch");
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (k, &t) in times.iter().enumerate() {
        out.push_str(&fmt(t));
        for (_, values) in columns {
            out.push(',');
            out.push_str(&fmt(values[k]));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

/// Overlay CSV: an analytic density sampled on the histogram bin centers.
pub fn emit_overlay_csv(centers: &[f64], density: &[f64], path: &Path) -> Result<(), CliError> {
    assert_eq!(centers.len(), density.len());
    let mut out = String::from("bin_center,density\n");
    for (c, d) in centers.iter().zip(density) {
        out.push_str(&fmt(*c));
        out.push(',');
        out.push_str(&fmt(*d));
        out.push('\n');
    }
    write_file(path, &out)
}

/// Parse a histogram CSV back (used by the round-trip checks).
pub fn parse_histogram_csv(text: &str) -> Result<Vec<(f64, f64, f64)>, CliError> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            continue;
        }
        let mut parts = line.split(',');
        let mut next = || -> Result<f64, CliError> {
            parts
                .next()
                .ok_or_else(|| CliError::Runtime(format!("short row {idx}")))?
                .parse::<f64>()
                .map_err(|e| CliError::Runtime(format!("row {idx}: {e}")))
        };
        rows.push((next()?, next()?, next()?));
    }
    Ok(rows)
}
