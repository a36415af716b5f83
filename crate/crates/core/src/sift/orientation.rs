use std::f64::consts::TAU;

use super::detect::Keypoint;
use super::scale_space::ScaleSpace;

pub const ORIENTATION_BINS: usize = 36;
const PEAK_RATIO: f64 = 0.8;
const WINDOW_FACTOR: f64 = 1.5;
const RADIUS_FACTOR: f64 = 3.0;

/// A keypoint with one dominant gradient direction, radians in `[0, 2pi)`.
///
/// Angles follow image axes: `atan2(dy, dx)` with `y` pointing down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedKeypoint {
    pub keypoint: Keypoint,
    pub orientation: f64,
}

/// Gradient at an interior pixel by central differences.
#[inline]
pub(crate) fn gradient(img: &crate::image_core::Raster, x: usize, y: usize) -> (f64, f64) {
    (img.get(x + 1, y) - img.get(x - 1, y), img.get(x, y + 1) - img.get(x, y - 1))
}

/// Gaussian-weighted 36-bin gradient orientation histogram, smoothed.
pub fn orientation_histogram(ss: &ScaleSpace, kp: &Keypoint) -> Option<[f64; ORIENTATION_BINS]> {
    let oct = &ss.octaves[kp.octave];
    let img = &oct.gaussians[kp.layer];
    let (w, h) = img.dims();
    let cx = kp.ox.round() as isize;
    let cy = kp.oy.round() as isize;
    if cx < 1 || cy < 1 || cx >= w as isize - 1 || cy >= h as isize - 1 {
        return None;
    }
    let sigma = WINDOW_FACTOR * kp.octave_sigma(ss);
    let radius = (RADIUS_FACTOR * sigma).round() as isize;
    let denom = -1.0 / (2.0 * sigma * sigma);
    let mut raw = [0.0; ORIENTATION_BINS];
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
            let (dx, dy) = gradient(img, x as usize, y as usize);
            let mag = (dx * dx + dy * dy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let angle = dy.atan2(dx).rem_euclid(TAU);
            let weight = ((i * i + j * j) as f64 * denom).exp();
            let bin = ((ORIENTATION_BINS as f64 * angle / TAU).round() as usize) % ORIENTATION_BINS;
            raw[bin] += weight * mag;
        }
    }
    let n = ORIENTATION_BINS;
    let mut hist = [0.0; ORIENTATION_BINS];
    for (b, v) in hist.iter_mut().enumerate() {
        *v = (raw[(b + n - 2) % n] + raw[(b + 2) % n]) / 16.0
            + (raw[(b + n - 1) % n] + raw[(b + 1) % n]) * 4.0 / 16.0
            + raw[b] * 6.0 / 16.0;
    }
    Some(hist)
}

/// One copy of `kp` per histogram peak reaching 80% of the maximum; each
/// peak is refined by a parabola through its neighbours. Keypoints at the
/// octave border yield nothing.
pub fn assign_orientations(ss: &ScaleSpace, kp: &Keypoint) -> Vec<OrientedKeypoint> {
    let Some(hist) = orientation_histogram(ss, kp) else {
        return Vec::new();
    };
    let n = ORIENTATION_BINS;
    let max = hist.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for b in 0..n {
        let l = hist[(b + n - 1) % n];
        let r = hist[(b + 1) % n];
        let c = hist[b];
        if c > l && c > r && c >= PEAK_RATIO * max {
            let offset = 0.5 * (l - r) / (l - 2.0 * c + r);
            let bin = b as f64 + offset;
            let mut orientation = (bin * TAU / n as f64).rem_euclid(TAU);
            // rem_euclid of a tiny negative rounds up to TAU
            if orientation >= TAU {
                orientation = 0.0;
            }
            out.push(OrientedKeypoint { keypoint: *kp, orientation });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image_core::Raster;
    use crate::sift::scale_space::build_scale_space;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn keypoint_at(ss: &ScaleSpace, x: f64, y: f64, layer: usize) -> Keypoint {
        Keypoint {
            x,
            y,
            sigma: ss.layer_sigma(layer as f64),
            octave: 0,
            layer,
            layer_pos: layer as f64,
            ox: x,
            oy: y,
            response: 1.0,
        }
    }

    fn angle_diff(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(TAU);
        d.min(TAU - d)
    }

    #[test]
    fn ramp_points_along_x() {
        let img = Raster::from_fn(64, 64, |x, _| 2.0 * x as f64);
        let ss = build_scale_space(&img, 1, 3, 1.6).unwrap();
        let o = assign_orientations(&ss, &keypoint_at(&ss, 32.0, 32.0, 1));
        assert_eq!(o.len(), 1);
        assert!(angle_diff(o[0].orientation, 0.0) < 0.1, "{}", o[0].orientation);
    }

    #[test]
    fn orthogonal_populations_give_two_copies() {
        // max(x', y'): +x gradient below the diagonal, +y above it
        let img = Raster::from_fn(64, 64, |x, y| {
            let (u, v) = (x as f64 - 32.0, y as f64 - 32.0);
            100.0 + 3.0 * u.max(v)
        });
        let ss = build_scale_space(&img, 1, 3, 1.6).unwrap();
        let o = assign_orientations(&ss, &keypoint_at(&ss, 32.0, 32.0, 1));
        assert_eq!(o.len(), 2, "{o:?}");
        let mut angles: Vec<f64> = o.iter().map(|k| k.orientation).collect();
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(angle_diff(angles[0], 0.0) < 0.1);
        assert!(angle_diff(angles[1], FRAC_PI_2) < 0.1);
    }

    #[test]
    fn rotation_rotates_orientation() {
        // a soft edge whose gradient is dominated by +u, slightly tilted
        let pattern = |u: f64, v: f64| 100.0 + 60.0 * (u / 6.0).tanh() + 15.0 * (v / 9.0).tanh();
        let angle_of = |theta: f64| {
            let (c, s) = (theta.cos(), theta.sin());
            // the pattern rotated by theta about the centre
            let img = Raster::from_fn(80, 80, |x, y| {
                let (dx, dy) = (x as f64 - 40.0, y as f64 - 40.0);
                pattern(c * dx + s * dy, -s * dx + c * dy)
            });
            let ss = build_scale_space(&img, 1, 3, 1.6).unwrap();
            let o = assign_orientations(&ss, &keypoint_at(&ss, 40.0, 40.0, 2));
            assert_eq!(o.len(), 1, "theta {theta}: {o:?}");
            o[0].orientation
        };
        let base = angle_of(0.0);
        for theta in [0.3, 1.0, PI / 2.0, 2.5] {
            let rotated = angle_of(theta);
            assert!(angle_diff(rotated, base + theta) < 0.1, "theta {theta}: {rotated} vs {}", base + theta);
        }
    }
}
