//! Full-reference quality metrics: per-band PSNR and SSIM, their spectral
//! means, and ERGAS.
//!
//! All metrics are accumulated in `f64` regardless of the cube scalar.
//! SSIM follows the usual reference formulation: 11x11 Gaussian window with
//! standard deviation 1.5, `C1 = (0.01 L)^2`, `C2 = (0.03 L)^2`, `L = 1`, and
//! the map is averaged over window positions that fit entirely inside the
//! image.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{Cube, Mat};

/// Returned for identical inputs instead of infinity.
pub const PSNR_CAP_DB: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErgasVariant {
    /// `sqrt(1/K sum_k ||test_k - ref_k||_F^2 / mu_k^2)`
    Paper,
    /// `100 sqrt(1/K sum_k MSE_k / mu_k^2)`
    Standard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub psnr: Vec<f64>,
    pub ssim: Vec<f64>,
    pub mpsnr: f64,
    pub mssim: f64,
    pub ergas_paper: f64,
    pub ergas_standard: f64,
}

fn check_mats<T: Real>(op: &'static str, a: &Mat<T>, b: &Mat<T>) -> Result<()> {
    if (a.rows(), a.cols()) != (b.rows(), b.cols()) {
        return Err(Error::shape(
            op,
            format!("{}x{}", a.rows(), a.cols()),
            format!("{}x{}", b.rows(), b.cols()),
        ));
    }
    if a.as_slice().is_empty() {
        return Err(Error::param("image", "band is empty"));
    }
    Ok(())
}

fn mse(a: &[impl Real], b: &[impl Real]) -> f64 {
    let n = a.len() as f64;
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x.to_f64_lossy() - y.to_f64_lossy();
            d * d
        })
        .sum::<f64>()
        / n
}

fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB)
}

/// `10 log10(peak^2 / MSE)`, capped at [`PSNR_CAP_DB`].
pub fn psnr_band<T: Real>(reference: &Mat<T>, test: &Mat<T>, peak: f64) -> Result<f64> {
    check_mats("psnr_band", reference, test)?;
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::param("peak", format!("must be finite and > 0, got {peak}")));
    }
    Ok(psnr_from_mse(mse(reference.as_slice(), test.as_slice()), peak))
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|t| {
            let d = t as f64 - half;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" correlation of a row-major image with `w` along both axes.
fn filter_valid(img: &[f64], rows: usize, cols: usize, w: &[f64]) -> Vec<f64> {
    let n = w.len();
    let (or, oc) = (rows + 1 - n, cols + 1 - n);
    let mut horiz = vec![0.0; rows * oc];
    for r in 0..rows {
        let src = &img[r * cols..(r + 1) * cols];
        for c in 0..oc {
            horiz[r * oc + c] = w.iter().zip(&src[c..c + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; or * oc];
    for r in 0..or {
        for c in 0..oc {
            out[r * oc + c] = w.iter().enumerate().map(|(t, a)| a * horiz[(r + t) * oc + c]).sum();
        }
    }
    out
}

/// Mean structural similarity of one band; both sides must be at least 11x11.
pub fn ssim_band<T: Real>(reference: &Mat<T>, test: &Mat<T>) -> Result<f64> {
    check_mats("ssim_band", reference, test)?;
    let (rows, cols) = (reference.rows(), reference.cols());
    if rows < SSIM_WINDOW || cols < SSIM_WINDOW {
        return Err(Error::param(
            "image",
            format!("SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {rows}x{cols}"),
        ));
    }
    let x: Vec<f64> = reference.as_slice().iter().map(|v| v.to_f64_lossy()).collect();
    let y: Vec<f64> = test.as_slice().iter().map(|v| v.to_f64_lossy()).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
    let w = gaussian_window();
    let [mx, my, sxx, syy, sxy] = [&x, &y, &xx, &yy, &xy].map(|img| filter_valid(img, rows, cols, &w));
    let n = mx.len();
    let total: f64 = (0..n)
        .map(|p| {
            let (ux, uy) = (mx[p], my[p]);
            let vx = sxx[p] - ux * ux;
            let vy = syy[p] - uy * uy;
            let cov = sxy[p] - ux * uy;
            ((2.0 * ux * uy + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((ux * ux + uy * uy + SSIM_C1) * (vx + vy + SSIM_C2))
        })
        .sum();
    Ok(total / n as f64)
}

/// Relative dimensionless global error; errors on a reference band with zero mean.
pub fn ergas<T: Real>(reference: &Cube<T>, test: &Cube<T>, variant: ErgasVariant) -> Result<f64> {
    reference.check_same("ergas", test)?;
    let dims = reference.dims();
    if dims.is_empty() {
        return Err(Error::param("cube", "cube is empty"));
    }
    let mut acc = 0.0;
    for k in 0..dims.bands {
        let (r, t) = (reference.band(k), test.band(k));
        let mu = r.iter().map(|v| v.to_f64_lossy()).sum::<f64>() / r.len() as f64;
        if mu == 0.0 {
            return Err(Error::ZeroBandMean { band: k + 1 });
        }
        let err = match variant {
            ErgasVariant::Paper => mse(r, t) * r.len() as f64,
            ErgasVariant::Standard => mse(r, t),
        };
        acc += err / (mu * mu);
    }
    let root = (acc / dims.bands as f64).sqrt();
    Ok(match variant {
        ErgasVariant::Paper => root,
        ErgasVariant::Standard => 100.0 * root,
    })
}

/// Every metric for one reference/test pair.
pub fn evaluate<T: Real>(reference: &Cube<T>, test: &Cube<T>, peak: f64) -> Result<MetricsReport> {
    reference.check_same("evaluate", test)?;
    let bands = reference.dims().bands;
    let per_band: Vec<(f64, f64)> = (0..bands)
        .into_par_iter()
        .map(|k| {
            let (r, t) = (reference.band_mat(k), test.band_mat(k));
            Ok((psnr_band(&r, &t, peak)?, ssim_band(&r, &t)?))
        })
        .collect::<Result<_>>()?;
    let (psnr, ssim): (Vec<f64>, Vec<f64>) = per_band.into_iter().unzip();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(MetricsReport {
        mpsnr: mean(&psnr),
        mssim: mean(&ssim),
        psnr,
        ssim,
        ergas_paper: ergas(reference, test, ErgasVariant::Paper)?,
        ergas_standard: ergas(reference, test, ErgasVariant::Standard)?,
    })
}

/// Mean PSNR over bands, without the SSIM and ERGAS work.
pub fn mpsnr<T: Real>(reference: &Cube<T>, test: &Cube<T>, peak: f64) -> Result<f64> {
    reference.check_same("mpsnr", test)?;
    let bands = reference.dims().bands;
    let mut total = 0.0;
    for k in 0..bands {
        total += psnr_band(&reference.band_mat(k), &test.band_mat(k), peak)?;
    }
    Ok(total / bands as f64)
}
