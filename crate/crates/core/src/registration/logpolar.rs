use std::f64::consts::PI;

use super::phase::{phase_correlate, UpsampleSpec};
use super::spectrum::{fft2, fftshift};
use super::RegistrationError;
use crate::image_core::Raster;

/// Upsampling used when correlating log-polar maps.
const LOGPOLAR_KAPPA: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prealignment {
    /// Radians in `(-pi/2, pi/2]`; the magnitude spectrum cannot tell `theta`
    /// from `theta + pi`.
    pub rotation: f64,
    pub scale: f64,
    pub reliable: bool,
}

impl Prealignment {
    pub const IDENTITY: Prealignment = Prealignment { rotation: 0.0, scale: 1.0, reliable: false };
}

fn hann(n: usize, i: usize) -> f64 {
    if n < 2 {
        return 1.0;
    }
    0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos()
}

/// Mean-removed image times a separable Hann window, suppressing the
/// border discontinuities that the DFT would otherwise see.
pub fn hann_taper(img: &Raster) -> Raster {
    let (w, h) = img.dims();
    let m = img.mean();
    Raster::from_fn(w, h, |x, y| (img.get(x, y) - m) * hann(w, x) * hann(h, y))
}

/// Centred magnitude spectrum of the Hann-windowed image, weighted by the
/// high-pass `(1 - X)(2 - X)`, `X = cos(pi u) cos(pi v)` on normalised
/// frequencies `u, v` in `[-1/2, 1/2]`.
pub fn filtered_magnitude(img: &Raster) -> Raster {
    let (w, h) = img.dims();
    let mag = fftshift(&fft2(&hann_taper(img)));
    Raster::from_fn(w, h, |x, y| {
        let u = (x as f64 - (w / 2) as f64) / w as f64;
        let v = (y as f64 - (h / 2) as f64) / h as f64;
        let xx = (PI * u).cos() * (PI * v).cos();
        mag.get(y, x).norm() * (1.0 - xx) * (2.0 - xx)
    })
}

/// Log-polar resampling of a centred spectrum: rows are angles over
/// `[0, pi)`, columns log-spaced radii over `[1, min(w, h) / 2]`, both
/// counts equal to the input size. Radii are measured in cycles per image
/// along the shorter side so non-square inputs stay isotropic.
pub fn log_polar(mag: &Raster) -> (Raster, f64) {
    let (w, h) = mag.dims();
    let m = w.min(h) as f64;
    let r_max = m / 2.0;
    let log_step = r_max.ln() / (w - 1) as f64;
    let (cx, cy) = ((w / 2) as f64, (h / 2) as f64);
    let map = Raster::from_fn(w, h, |j, i| {
        let theta = PI * i as f64 / h as f64;
        let r = (j as f64 * log_step).exp();
        let x = cx + r * theta.cos() * w as f64 / m;
        let y = cy + r * theta.sin() * h as f64 / m;
        bilinear(mag, x, y)
    });
    (map, log_step)
}

fn bilinear(img: &Raster, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as isize, y0 as isize);
    let g = |dx: isize, dy: isize| img.get_or_zero(x0 + dx, y0 + dy);
    (1.0 - fy) * ((1.0 - fx) * g(0, 0) + fx * g(1, 0)) + fy * ((1.0 - fx) * g(0, 1) + fx * g(1, 1))
}

/// Rotation and scale of `moving` relative to `reference` from the phase
/// correlation of their log-polar magnitude spectra. A rotation by `theta`
/// and magnification by `s` of the content shift the map by `theta` along
/// the angle axis and by `-ln s` along the log-radius axis.
pub fn logpolar_prealign(reference: &Raster, moving: &Raster) -> Result<Prealignment, RegistrationError> {
    if reference.dims() != moving.dims() {
        return Err(RegistrationError::DimensionMismatch { reference: reference.dims(), moving: moving.dims() });
    }
    let (lr, log_step) = log_polar(&filtered_magnitude(reference));
    let (lm, _) = log_polar(&filtered_magnitude(moving));
    let r = phase_correlate(&lr, &lm, UpsampleSpec::new(LOGPOLAR_KAPPA).expect("positive"))?;
    if !r.reliable {
        return Ok(Prealignment::IDENTITY);
    }
    let h = reference.height() as f64;
    let mut rotation = r.dy * PI / h;
    // dy lies in [-h/2, h/2); fold onto (-pi/2, pi/2]
    if rotation <= -PI / 2.0 {
        rotation += PI;
    }
    Ok(Prealignment { rotation, scale: (-r.dx * log_step).exp(), reliable: true })
}
