//! CSV/JSON writers and text formatting shared by the CLI.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::montecarlo::{HistogramBin, SweepResult};

pub const SWEEP_CSV_HEADER: [&str; 5] = ["sample_size", "mc_delta", "analytic_delta", "lower", "upper"];

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_sweep_csv<W: Write>(sweep: &SweepResult, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(SWEEP_CSV_HEADER)?;
    for row in &sweep.rows {
        writer.write_record([
            row.sample_size.to_string(),
            row.mc_delta.to_string(),
            row.analytic_delta.to_string(),
            row.lower.to_string(),
            row.upper.to_string(),
        ])?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_histogram_csv<W: Write>(bins: &[HistogramBin], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["count_value", "frequency"])?;
    for bin in bins {
        writer.write_record([bin.count_value.to_string(), bin.frequency.to_string()])?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn save_sweep_csv(sweep: &SweepResult, path: &Path) -> Result<()> {
    write_sweep_csv(sweep, create(path)?)
}

pub fn save_histogram_csv(bins: &[HistogramBin], path: &Path) -> Result<()> {
    write_histogram_csv(bins, create(path)?)
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn save_bytes(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut out = create(path)?;
    write(&mut out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

/// Formats `x` with `digits` significant digits, without exponent for
/// everyday magnitudes.
pub fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-5..=15).contains(&magnitude) {
        return format!("{:.*e}", digits.saturating_sub(1), x);
    }
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}
