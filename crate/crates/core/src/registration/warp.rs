use std::f64::consts::PI;

use rayon::prelude::*;

use super::logpolar::{hann_taper, logpolar_prealign};
use super::phase::{fourier_shift, phase_correlate, zero_shift_error, RegistrationResult, UpsampleSpec};
use super::RegistrationError;
use crate::image_core::Raster;
use crate::interp::{bicubic_resize, sample, EdgeMode, ZoomSpec};

/// Pixels within this distance of invalid data are themselves invalid,
/// covering the bicubic footprint and Fourier-shift ringing.
const MASK_MARGIN: isize = 2;

/// Pre-alignments closer to the identity than the log-polar resolution are
/// treated as the identity; resampling blur would otherwise make a spurious
/// warp look better against the smooth ULR.
const MIN_ROTATION_DEG: f64 = 0.5;
const MIN_SCALE_CHANGE: f64 = 0.015;

/// A candidate aligned to the query grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Registered {
    pub image: Raster,
    /// Row-major; true where `image` holds candidate content.
    pub valid: Vec<bool>,
    pub result: RegistrationResult,
}

impl Registered {
    pub fn valid_fraction(&self) -> f64 {
        self.valid.iter().filter(|&&v| v).count() as f64 / self.valid.len() as f64
    }
}

/// Undoes a similarity about the image centre: if `moving` holds the
/// reference content rotated by `rotation` (y-down, x towards y) and
/// magnified by `scale`, the output is that content back in reference
/// position. Bicubic sampling with zero padding; the mask flags output
/// pixels whose source lies inside `moving`.
pub fn unwarp_similarity(moving: &Raster, rotation: f64, scale: f64) -> (Raster, Vec<bool>) {
    let (w, h) = moving.dims();
    if rotation == 0.0 && scale == 1.0 {
        return (moving.clone(), vec![true; w * h]);
    }
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (s, c) = rotation.sin_cos();
    let rows: Vec<(Vec<f64>, Vec<bool>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut vals = Vec::with_capacity(w);
            let mut ok = Vec::with_capacity(w);
            for x in 0..w {
                let (px, py) = (x as f64 - cx, y as f64 - cy);
                let sx = cx + scale * (c * px - s * py);
                let sy = cy + scale * (s * px + c * py);
                vals.push(sample(moving, sx, sy, EdgeMode::Zero));
                ok.push(sx >= 0.0 && sy >= 0.0 && sx <= (w - 1) as f64 && sy <= (h - 1) as f64);
            }
            (vals, ok)
        })
        .collect();
    let mut data = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for (v, o) in rows {
        data.extend(v);
        valid.extend(o);
    }
    (Raster::new(w, h, data).expect("shape").clamp_to_range(), valid)
}

/// Mask of an image translated by `(dy, dx)` without wrap-around.
fn shift_mask(valid: &[bool], w: usize, h: usize, dy: f64, dx: f64) -> Vec<bool> {
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = (x as f64 - dx, y as f64 - dy);
            let xs = [sx.floor() as isize, sx.ceil() as isize];
            let ys = [sy.floor() as isize, sy.ceil() as isize];
            out[y * w + x] = ys.iter().all(|&yy| {
                xs.iter().all(|&xx| {
                    xx >= 0 && yy >= 0 && xx < w as isize && yy < h as isize && valid[yy as usize * w + xx as usize]
                })
            });
        }
    }
    out
}

fn erode(valid: &[bool], w: usize, h: usize, r: isize) -> Vec<bool> {
    let mut out = vec![false; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            out[y as usize * w + x as usize] = (-r..=r).all(|dy| {
                (-r..=r).all(|dx| {
                    let (xx, yy) = (x + dx, y + dy);
                    xx >= 0 && yy >= 0 && xx < w as isize && yy < h as isize && valid[yy as usize * w + xx as usize]
                })
            });
        }
    }
    out
}

/// Aligns a retrieved candidate to the upscaled query.
///
/// Correlation and the reported errors use Hann-tapered, mean-removed
/// images, since web images are not periodic.
///
/// The candidate is bicubic-resized to the query size if needed, its
/// rotation and scale are estimated from log-polar spectra and undone, the
/// remaining translation is found by phase correlation and removed by a
/// Fourier phase ramp. Translation only, `theta` and `theta + pi` are
/// tried; the lowest registration error wins.
pub fn register_to_query(ulr: &Raster, candidate: &Raster, up: UpsampleSpec) -> Result<Registered, RegistrationError> {
    register_candidate(ulr, candidate, up, true)
}

/// [`register_to_query`] with the log-polar stage optional; without it only
/// the translation is estimated.
pub fn register_candidate(
    ulr: &Raster,
    candidate: &Raster,
    up: UpsampleSpec,
    logpolar: bool,
) -> Result<Registered, RegistrationError> {
    let (w, h) = ulr.dims();
    let resized;
    let candidate = if candidate.dims() != ulr.dims() {
        let spec = ZoomSpec::to_size(candidate.width(), candidate.height(), w, h)
            .map_err(|e| RegistrationError::Resize(e.to_string()))?;
        resized =
            bicubic_resize(candidate, &spec, EdgeMode::Clamp).map_err(|e| RegistrationError::Resize(e.to_string()))?;
        &resized
    } else {
        candidate
    };
    let reference = hann_taper(ulr);
    let baseline = zero_shift_error(&reference, &hann_taper(candidate))?;
    let mut hypotheses = vec![(0.0, 1.0)];
    if logpolar {
        let mut pre = logpolar_prealign(ulr, candidate)?;
        if pre.rotation.to_degrees().abs() < MIN_ROTATION_DEG && (pre.scale - 1.0).abs() < MIN_SCALE_CHANGE {
            pre.rotation = 0.0;
            pre.scale = 1.0;
        }
        let flip = if pre.rotation > 0.0 { pre.rotation - PI } else { pre.rotation + PI };
        if pre.reliable && (pre.rotation, pre.scale) != (0.0, 1.0) {
            hypotheses.push((pre.rotation, pre.scale));
        }
        hypotheses.push((flip, pre.scale));
    }

    let mut best: Option<(Raster, Vec<bool>, RegistrationResult)> = None;
    for (rotation, scale) in hypotheses {
        let (warped, mask) = unwarp_similarity(candidate, rotation, scale);
        let mut r = phase_correlate(&reference, &hann_taper(&warped), up)?;
        r.rotation = rotation;
        r.scale = scale;
        let better = match &best {
            None => true,
            Some((_, _, b)) => r.reliable && (!b.reliable || r.error < b.error),
        };
        if better {
            best = Some((warped, mask, r));
        }
    }
    let (warped, mask, mut r) = best.expect("two hypotheses tried");
    let image = fourier_shift(&warped, -r.dy, -r.dx).clamp_to_range();
    let untouched = r.dy == 0.0 && r.dx == 0.0 && mask.iter().all(|&v| v);
    let margin = if untouched { 0 } else { MASK_MARGIN };
    let valid = erode(&shift_mask(&mask, w, h, -r.dy, -r.dx), w, h, margin);
    r.baseline_error = baseline;
    Ok(Registered { image, valid, result: r })
}

/// Registers every candidate independently (in parallel, order kept).
pub fn register_all(
    ulr: &Raster,
    candidates: &[Raster],
    up: UpsampleSpec,
    logpolar: bool,
) -> Vec<Result<Registered, RegistrationError>> {
    candidates.par_iter().map(|c| register_candidate(ulr, c, up, logpolar)).collect()
}
