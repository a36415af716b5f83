use std::f64::consts::TAU;

use super::orientation::{gradient, OrientedKeypoint};
use super::scale_space::ScaleSpace;
use super::{SiftDescriptor, DESCRIPTOR_LEN};

/// Spatial bins per side.
const GRID: usize = 4;
/// Orientation bins per spatial cell.
const ORI_BINS: usize = 8;
/// Width of one spatial bin in units of the keypoint's octave blur.
const BIN_WIDTH_FACTOR: f64 = 3.0;
const CLAMP: f64 = 0.2;

/// Builds the 4x4x8 gradient histogram in the keypoint's rotated frame with
/// trilinear binning, normalises, clamps at 0.2 and renormalises.
///
/// Returns `None` when the unrotated 16x16 sampling grid does not fit
/// inside the octave (or the patch is flat). Rotated samples that fall off
/// the image are skipped.
pub fn compute_descriptor(ss: &ScaleSpace, okp: &OrientedKeypoint) -> Option<SiftDescriptor> {
    let kp = &okp.keypoint;
    let img = &ss.octaves[kp.octave].gaussians[kp.layer];
    let (w, h) = img.dims();
    let bin_width = BIN_WIDTH_FACTOR * kp.octave_sigma(ss);
    let half_grid = 0.5 * GRID as f64 * bin_width;
    if kp.ox - half_grid < 1.0
        || kp.oy - half_grid < 1.0
        || kp.ox + half_grid > (w - 2) as f64
        || kp.oy + half_grid > (h - 2) as f64
    {
        return None;
    }
    // samples reach one bin further for the trilinear spill-over
    let radius = (bin_width * std::f64::consts::SQRT_2 * (GRID as f64 + 1.0) * 0.5).round() as isize;
    let (sin_t, cos_t) = okp.orientation.sin_cos();
    let cx = kp.ox.round() as isize;
    let cy = kp.oy.round() as isize;
    let frac_x = kp.ox - cx as f64;
    let frac_y = kp.oy - cy as f64;
    let weight_scale = -1.0 / (0.5 * (GRID * GRID) as f64);

    let mut hist = [[[0.0f64; ORI_BINS + 2]; GRID + 2]; GRID + 2];
    for j in -radius..=radius {
        let y = cy + j;
        if y < 1 || y >= h as isize - 1 {
            continue;
        }
        for i in -radius..=radius {
            let x = cx + i;
            if x < 1 || x >= w as isize - 1 {
                continue;
            }
            let (dxs, dys) = (i as f64 - frac_x, j as f64 - frac_y);
            // offset in the keypoint frame, in bins
            let xr = (cos_t * dxs + sin_t * dys) / bin_width;
            let yr = (-sin_t * dxs + cos_t * dys) / bin_width;
            let cbin = xr + GRID as f64 / 2.0 - 0.5;
            let rbin = yr + GRID as f64 / 2.0 - 0.5;
            if !(cbin > -1.0 && cbin < GRID as f64 && rbin > -1.0 && rbin < GRID as f64) {
                continue;
            }
            let (gx, gy) = gradient(img, x as usize, y as usize);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let angle = (gy.atan2(gx) - okp.orientation).rem_euclid(TAU);
            let obin = angle * ORI_BINS as f64 / TAU;
            let weight = ((xr * xr + yr * yr) * weight_scale).exp() * mag;

            let (r0, c0, o0) = (rbin.floor(), cbin.floor(), obin.floor());
            let (dr, dc, dob) = (rbin - r0, cbin - c0, obin - o0);
            let (r0, c0) = ((r0 as isize + 1) as usize, (c0 as isize + 1) as usize);
            let o0 = (o0 as usize) % ORI_BINS;
            for (ri, rw) in [(0, 1.0 - dr), (1, dr)] {
                for (ci, cw) in [(0, 1.0 - dc), (1, dc)] {
                    for (oi, ow) in [(0, 1.0 - dob), (1, dob)] {
                        hist[r0 + ri][c0 + ci][o0 + oi] += weight * rw * cw * ow;
                    }
                }
            }
        }
    }

    let mut v = [0.0f64; DESCRIPTOR_LEN];
    for r in 0..GRID {
        for c in 0..GRID {
            let cell = &mut hist[r + 1][c + 1];
            // orientation wrap-around
            cell[0] += cell[ORI_BINS];
            for o in 0..ORI_BINS {
                v[(r * GRID + c) * ORI_BINS + o] = cell[o];
            }
        }
    }
    let v = clamp_normalize(&v)?;
    let mut out = [0.0f32; DESCRIPTOR_LEN];
    for (o, x) in out.iter_mut().zip(v) {
        *o = x as f32;
    }
    Some(SiftDescriptor { v: out, x: kp.x, y: kp.y, s: kp.sigma, o: okp.orientation })
}

/// Unit vector proportional to `v` except that no component exceeds
/// [`CLAMP`]. This is the fixed point of repeated clamp-and-renormalise:
/// the largest components sit at the cap and the rest share the remaining
/// energy in their original proportions. Needs at least `1 / CLAMP^2`
/// non-zero components; returns `None` otherwise.
fn clamp_normalize(v: &[f64; DESCRIPTOR_LEN]) -> Option<[f64; DESCRIPTOR_LEN]> {
    let mut order: Vec<usize> = (0..DESCRIPTOR_LEN).filter(|&i| v[i] > 0.0).collect();
    if (order.len() as f64) * CLAMP * CLAMP < 1.0 - 1e-12 {
        return None;
    }
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    let mut rest: f64 = order.iter().map(|&i| v[i] * v[i]).sum();
    for m in 0..order.len() {
        // m largest components are capped, the others scaled by c
        let budget = 1.0 - m as f64 * CLAMP * CLAMP;
        let c = (budget.max(0.0) / rest).sqrt();
        if c * v[order[m]] <= CLAMP {
            let mut out = [0.0; DESCRIPTOR_LEN];
            for (k, &i) in order.iter().enumerate() {
                out[i] = if k < m { CLAMP } else { c * v[i] };
            }
            return Some(out);
        }
        rest -= v[order[m]] * v[order[m]];
    }
    None
}
