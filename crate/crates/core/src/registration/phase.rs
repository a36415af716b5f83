use num_complex::Complex64;

use super::spectrum::{fft2, is_nyquist, signed_freq, synthesis_kernel, Spectrum};
use super::RegistrationError;
use crate::image_core::Raster;

/// Smallest edge accepted for phase correlation.
pub const MIN_REGISTRATION_SIZE: usize = 16;
/// Side of the refinement window around the 2x estimate, in pixels.
pub const REFINE_WINDOW: f64 = 1.5;
const WHITEN_FLOOR: f64 = 1e-12;

/// Subpixel upsampling factor `kappa >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpsampleSpec {
    kappa: u32,
}

impl UpsampleSpec {
    pub fn new(kappa: u32) -> Result<Self, RegistrationError> {
        if kappa == 0 {
            return Err(RegistrationError::InvalidUpsample);
        }
        Ok(Self { kappa })
    }

    pub fn kappa(self) -> u32 {
        self.kappa
    }
}

impl Default for UpsampleSpec {
    fn default() -> Self {
        Self { kappa: 20 }
    }
}

/// Alignment of a moving image onto a reference.
///
/// `(dy, dx)` is the displacement of the moving image's content, so
/// `moving(y, x) ~ reference(y - dy, x - dx)`. `rotation` and `scale`
/// describe the similarity taking reference content to moving content about
/// the image centre (zero / one when only translation was estimated).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationResult {
    pub dy: f64,
    pub dx: f64,
    pub rotation: f64,
    pub scale: f64,
    /// `sqrt(1 - |c|^2 / (|a|^2 |b|^2))` of the mean-removed images at the
    /// estimated shift; 0 is a perfect match.
    pub error: f64,
    /// Same measure at zero displacement.
    pub baseline_error: f64,
    pub diffphase: f64,
    /// False for degenerate inputs; such results must not be used.
    pub reliable: bool,
}

impl RegistrationResult {
    fn unreliable() -> Self {
        Self {
            dy: 0.0,
            dx: 0.0,
            rotation: 0.0,
            scale: 1.0,
            error: 1.0,
            baseline_error: 1.0,
            diffphase: 0.0,
            reliable: false,
        }
    }
}

/// Cross-correlation samples `c(t) = (1 / (R C)) sum_k S[k] exp(2 pi i k.t / N)`
/// on an `n x n` grid, `n = ceil(region * kappa)`, at pitch `1 / kappa`
/// centred on `center = (ty, tx)`: sample `(i, j)` sits at
/// `center + ((i, j) - n / 2) / kappa`. Evaluated as `Ky * S * Kx`.
pub fn matrix_dft_patch(spectrum: &Spectrum, center: (f64, f64), region: f64, kappa: u32) -> Spectrum {
    let n = ((region * kappa as f64).ceil() as usize).max(1);
    let half = (n / 2) as f64;
    let k = kappa as f64;
    let (rows, cols) = (spectrum.rows, spectrum.cols);
    let ty: Vec<f64> = (0..n).map(|i| center.0 + (i as f64 - half) / k).collect();
    let tx: Vec<f64> = (0..n).map(|j| center.1 + (j as f64 - half) / k).collect();
    // ky: n x rows, kx: cols x n
    let ky: Vec<Complex64> = ty.iter().flat_map(|&t| (0..rows).map(move |r| synthesis_kernel(r, rows, t))).collect();
    let kx: Vec<Complex64> = (0..cols).flat_map(|c| tx.iter().map(move |&t| synthesis_kernel(c, cols, t))).collect();
    // tmp = ky * S: n x cols
    let mut tmp = vec![Complex64::new(0.0, 0.0); n * cols];
    for i in 0..n {
        let out = &mut tmp[i * cols..(i + 1) * cols];
        for r in 0..rows {
            let w = ky[i * rows + r];
            let row = &spectrum.data[r * cols..(r + 1) * cols];
            for (o, s) in out.iter_mut().zip(row) {
                *o += w * s;
            }
        }
    }
    let mut result = Spectrum::zeros(n, n);
    let norm = (rows * cols) as f64;
    for i in 0..n {
        for c in 0..cols {
            let t = tmp[i * cols + c];
            for j in 0..n {
                result.data[i * n + j] += t * kx[c * n + j];
            }
        }
    }
    result.data.iter_mut().for_each(|v| *v /= norm);
    result
}

/// Embeds a spectrum in a grid twice as large in each direction (Nyquist
/// bins split between the two signed positions).
fn embed_2x(s: &Spectrum) -> Spectrum {
    let (r2, c2) = (2 * s.rows, 2 * s.cols);
    let mut out = Spectrum::zeros(r2, c2);
    let place = |k: usize, n: usize, n2: usize| -> Vec<(usize, f64)> {
        let f = signed_freq(k, n) as isize;
        let wrap = |f: isize| f.rem_euclid(n2 as isize) as usize;
        if is_nyquist(k, n) {
            vec![(wrap(f), 0.5), (wrap(-f), 0.5)]
        } else {
            vec![(wrap(f), 1.0)]
        }
    };
    for r in 0..s.rows {
        for c in 0..s.cols {
            let v = s.get(r, c);
            for (rr, wr) in place(r, s.rows, r2) {
                for (cc, wc) in place(c, s.cols, c2) {
                    let i = rr * c2 + cc;
                    out.data[i] += v * (wr * wc);
                }
            }
        }
    }
    // keep the unit-pitch normalisation of the original grid
    let scale = 4.0;
    out.data.iter_mut().for_each(|v| *v *= scale);
    out
}

/// Wraps a circular displacement into `[-n/2, n/2)`.
fn centred(d: f64, n: usize) -> f64 {
    let n = n as f64;
    let w = d.rem_euclid(n);
    if w >= n / 2.0 {
        w - n
    } else {
        w
    }
}

fn argmax_real(s: &Spectrum, candidates: impl Iterator<Item = (usize, usize)>) -> (usize, usize) {
    let mut best = (f64::NEG_INFINITY, (0, 0));
    for (r, c) in candidates {
        let v = s.get(r, c).re;
        if v > best.0 {
            best = (v, (r, c));
        }
    }
    best.1
}

fn mean_removed_energy(img: &Raster) -> f64 {
    let m = img.mean();
    img.data().iter().map(|v| (v - m) * (v - m)).sum()
}

fn normalised_error(c: Complex64, e_ref: f64, e_mov: f64) -> f64 {
    (1.0 - c.norm_sqr() / (e_ref * e_mov)).abs().sqrt().clamp(0.0, 1.0)
}

/// [`RegistrationResult::error`] of the two images as they are.
pub fn zero_shift_error(reference: &Raster, moving: &Raster) -> Result<f64, RegistrationError> {
    if reference.dims() != moving.dims() {
        return Err(RegistrationError::DimensionMismatch { reference: reference.dims(), moving: moving.dims() });
    }
    let e_ref = mean_removed_energy(reference);
    let e_mov = mean_removed_energy(moving);
    if e_ref <= 0.0 || e_mov <= 0.0 {
        return Ok(1.0);
    }
    let (mr, mm) = (reference.mean(), moving.mean());
    let c0: f64 = reference.data().iter().zip(moving.data()).map(|(a, b)| (a - mr) * (b - mm)).sum();
    Ok(normalised_error(Complex64::new(c0, 0.0), e_ref, e_mov))
}

/// Phase correlation with a two-stage subpixel schedule.
///
/// 1. error at zero displacement;
/// 2. whitened cross-power spectrum, inverse FFT, integer peak;
/// 3. the plain cross-power spectrum embedded in a 2x grid, inverse FFT,
///    peak searched within one pixel of the integer estimate;
/// 4. for `kappa > 2`, a 1.5-pixel window around that estimate sampled at
///    pitch `1 / kappa` by [`matrix_dft_patch`].
///
/// Constant inputs give an unreliable zero result.
pub fn phase_correlate(
    reference: &Raster,
    moving: &Raster,
    up: UpsampleSpec,
) -> Result<RegistrationResult, RegistrationError> {
    if reference.dims() != moving.dims() {
        return Err(RegistrationError::DimensionMismatch { reference: reference.dims(), moving: moving.dims() });
    }
    let (w, h) = reference.dims();
    if w < MIN_REGISTRATION_SIZE || h < MIN_REGISTRATION_SIZE {
        return Err(RegistrationError::TooSmall { width: w, height: h });
    }
    let e_ref = mean_removed_energy(reference);
    let e_mov = mean_removed_energy(moving);
    let tiny = 1e-12 * (w * h) as f64;
    if e_ref <= tiny || e_mov <= tiny {
        return Ok(RegistrationResult::unreliable());
    }

    let baseline_error = zero_shift_error(reference, moving)?;

    let fr = fft2(reference);
    let fm = fft2(moving);
    let mut cross = Spectrum::zeros(h, w);
    for ((o, a), b) in cross.data.iter_mut().zip(&fm.data).zip(&fr.data) {
        *o = a * b.conj();
    }
    cross.data[0] = Complex64::new(0.0, 0.0);

    let mut white = cross.clone();
    white.data.iter_mut().for_each(|v| *v /= v.norm().max(WHITEN_FLOOR));
    let pc = white.ifft();
    let (py, px) = argmax_real(&pc, (0..h).flat_map(|r| (0..w).map(move |c| (r, c))));
    let mut dy = centred(py as f64, h);
    let mut dx = centred(px as f64, w);

    let kappa = up.kappa();
    if kappa >= 2 {
        let cc2 = embed_2x(&cross).ifft();
        let (h2, w2) = (2 * h as isize, 2 * w as isize);
        let (cy, cx) = ((2.0 * dy) as isize, (2.0 * dx) as isize);
        let window = (-2..=2).flat_map(|a| (-2..=2).map(move |b| (a, b)));
        let (by, bx) = argmax_real(
            &cc2,
            window.map(|(a, b)| ((cy + a).rem_euclid(h2) as usize, (cx + b).rem_euclid(w2) as usize)),
        );
        dy = centred(by as f64 / 2.0, h);
        dx = centred(bx as f64 / 2.0, w);
    }
    if kappa > 2 {
        let k = kappa as f64;
        let centre = ((dy * k).round() / k, (dx * k).round() / k);
        let patch = matrix_dft_patch(&cross, centre, REFINE_WINDOW, kappa);
        let n = patch.rows;
        let (i, j) = argmax_real(&patch, (0..n).flat_map(|r| (0..n).map(move |c| (r, c))));
        let half = (n / 2) as f64;
        dy = centred(centre.0 + (i as f64 - half) / k, h);
        dx = centred(centre.1 + (j as f64 - half) / k, w);
    }

    let peak = matrix_dft_patch(&cross, (dy, dx), 1.0 / kappa as f64, kappa).data[0];
    Ok(RegistrationResult {
        dy,
        dx,
        rotation: 0.0,
        scale: 1.0,
        error: normalised_error(peak, e_ref, e_mov),
        baseline_error,
        diffphase: peak.im.atan2(peak.re),
        reliable: true,
    })
}

/// Translates `img` by `(dy, dx)` through a Fourier phase ramp (circular):
/// `out(y, x) = img(y - dy, x - dx)` for band-limited content.
pub fn fourier_shift(img: &Raster, dy: f64, dx: f64) -> Raster {
    if dy == 0.0 && dx == 0.0 {
        return img.clone();
    }
    let mut s = fft2(img);
    let (rows, cols) = (s.rows, s.cols);
    // the conjugate kernel of a positive displacement
    let ry: Vec<Complex64> = (0..rows).map(|r| synthesis_kernel(r, rows, -dy)).collect();
    let rx: Vec<Complex64> = (0..cols).map(|c| synthesis_kernel(c, cols, -dx)).collect();
    for (r, &kr) in ry.iter().enumerate() {
        for (c, &kc) in rx.iter().enumerate() {
            let v = s.get(r, c) * kr * kc;
            s.set(r, c, v);
        }
    }
    s.ifft().real()
}
