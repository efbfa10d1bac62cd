//! Output files, all written to a temporary sibling and renamed into place.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use tempfile::NamedTempFile;

use srlrtr::metrics::MetricsReport;
use srlrtr::npy::{write_cube_to, Dtype};
use srlrtr::{Cube, Mat};

use crate::error::{CliError, CliResult};

pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_cube(path: &Path, cube: &Cube<f64>, dtype: Dtype) -> CliResult<()> {
    let mut buf = Vec::with_capacity(128 + cube.dims().len() * dtype.size());
    write_cube_to(cube, dtype, &mut buf).map_err(|source| CliError::Cube {
        path: path.to_path_buf(),
        source,
    })?;
    write_atomic(path, &buf)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_vec_pretty(value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push(b'\n');
    write_atomic(path, &text)
}

/// One row per band plus a final `mean` row carrying the global values.
pub fn metrics_csv(report: &MetricsReport) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["band", "psnr_db", "ssim", "ergas_paper", "ergas_standard"])?;
    for (k, (p, s)) in report.psnr.iter().zip(&report.ssim).enumerate() {
        w.write_record([(k + 1).to_string(), p.to_string(), s.to_string(), String::new(), String::new()])?;
    }
    w.write_record([
        "mean".to_string(),
        report.mpsnr.to_string(),
        report.mssim.to_string(),
        report.ergas_paper.to_string(),
        report.ergas_standard.to_string(),
    ])?;
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}

pub fn write_metrics_csv(path: &Path, report: &MetricsReport) -> CliResult<()> {
    let bytes = metrics_csv(report).map_err(|source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    write_atomic(path, &bytes)
}

/// Maps `[lo, hi]` linearly onto 0..=255, clamping outside values.
pub fn scale_to_byte(v: f64, lo: f64, hi: f64) -> u8 {
    let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
    if t.is_nan() {
        return 0;
    }
    (t * 255.0).round() as u8
}

/// Binary 8-bit portable graymap (P5).
pub fn pgm_bytes(band: &Mat<f64>, lo: f64, hi: f64) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", band.cols(), band.rows()).into_bytes();
    out.extend(band.as_slice().iter().map(|&v| scale_to_byte(v, lo, hi)));
    out
}
