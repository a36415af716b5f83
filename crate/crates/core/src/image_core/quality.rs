//! Full-reference quality metrics: PSNR and Gaussian-windowed SSIM.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

use super::raster::Raster;

pub const PEAK: f64 = 255.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("image {0:?} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")]
    TooSmall((usize, usize)),
}

/// Peak signal-to-noise ratio. Identical images get their own variant rather
/// than a float infinity produced by dividing by zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Db(f64),
    Identical,
}

impl Psnr {
    /// Decibel value, `f64::INFINITY` for [`Psnr::Identical`].
    pub fn value(self) -> f64 {
        match self {
            Psnr::Db(v) => v,
            Psnr::Identical => f64::INFINITY,
        }
    }

    pub fn is_identical(self) -> bool {
        matches!(self, Psnr::Identical)
    }
}

impl PartialOrd for Psnr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Psnr::Identical, Psnr::Identical) => Some(Ordering::Equal),
            (Psnr::Identical, _) => Some(Ordering::Greater),
            (_, Psnr::Identical) => Some(Ordering::Less),
            (Psnr::Db(a), Psnr::Db(b)) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // `pad` would truncate "inf" to the precision
        let w = f.width().unwrap_or(0);
        let s = match (self, f.precision()) {
            (Psnr::Db(v), Some(p)) => format!("{v:.p$}"),
            (Psnr::Db(v), None) => v.to_string(),
            (Psnr::Identical, _) => "inf".to_string(),
        };
        write!(f, "{s:>w$}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub psnr: Psnr,
    pub ssim: f64,
}

fn check_dims(a: &Raster, b: &Raster) -> Result<(), MetricError> {
    if a.dims() != b.dims() {
        Err(MetricError::DimensionMismatch(a.dims(), b.dims()))
    } else {
        Ok(())
    }
}

pub fn mse(reference: &Raster, test: &Raster) -> Result<f64, MetricError> {
    check_dims(reference, test)?;
    let sum: f64 = reference.data().iter().zip(test.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / reference.data().len() as f64)
}

pub fn psnr(reference: &Raster, test: &Raster) -> Result<Psnr, MetricError> {
    let mse = mse(reference, test)?;
    if mse == 0.0 {
        return Ok(Psnr::Identical);
    }
    Ok(Psnr::Db(10.0 * (PEAK * PEAK / mse).log10()))
}

/// Normalised 1-D Gaussian taps of length [`SSIM_WINDOW`].
pub fn ssim_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable 'valid' filtering: output is `(w - 10) x (h - 10)`.
fn filter_valid(data: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w + 1 - SSIM_WINDOW;
    let oh = h + 1 - SSIM_WINDOW;
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        let row = &data[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = k.iter().zip(&row[x..x + SSIM_WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut s = 0.0;
            for (i, kv) in k.iter().enumerate() {
                s += kv * tmp[(y + i) * ow + x];
            }
            out[y * ow + x] = s;
        }
    }
    out
}

/// Mean SSIM over every fully-contained 11x11 Gaussian window (sigma 1.5),
/// `K1 = 0.01`, `K2 = 0.03`, `L = 255`.
pub fn ssim(reference: &Raster, test: &Raster) -> Result<f64, MetricError> {
    check_dims(reference, test)?;
    let (w, h) = reference.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricError::TooSmall((w, h)));
    }
    let k = ssim_kernel();
    let x = reference.data();
    let y = test.data();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();

    let mu_x = filter_valid(x, w, h, &k);
    let mu_y = filter_valid(y, w, h, &k);
    let e_xx = filter_valid(&xx, w, h, &k);
    let e_yy = filter_valid(&yy, w, h, &k);
    let e_xy = filter_valid(&xy, w, h, &k);

    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);
    let n = mu_x.len();
    let mut total = 0.0;
    for i in 0..n {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let sxx = e_xx[i] - mx * mx;
        let syy = e_yy[i] - my * my;
        let sxy = e_xy[i] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
    }
    Ok(total / n as f64)
}

pub fn quality(reference: &Raster, test: &Raster) -> Result<QualityReport, MetricError> {
    Ok(QualityReport { psnr: psnr(reference, test)?, ssim: ssim(reference, test)? })
}
