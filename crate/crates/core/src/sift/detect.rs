use super::scale_space::ScaleSpace;

/// Pixels this close to an octave border are never examined.
pub const IMAGE_BORDER: usize = 5;
const MAX_REFINE_STEPS: usize = 5;

/// A refined scale-space extremum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    /// Location in input-image pixels.
    pub x: f64,
    pub y: f64,
    /// Blur in input-image pixels.
    pub sigma: f64,
    pub octave: usize,
    /// Integer DoG layer the extremum was refined onto.
    pub layer: usize,
    /// Fractional layer position, `layer + offset`.
    pub layer_pos: f64,
    /// Location in octave pixels.
    pub ox: f64,
    pub oy: f64,
    /// Interpolated DoG value at the extremum.
    pub response: f64,
}

impl Keypoint {
    /// Blur in octave pixels.
    pub fn octave_sigma(&self, ss: &ScaleSpace) -> f64 {
        ss.layer_sigma(self.layer_pos)
    }
}

fn is_extremum(ss: &ScaleSpace, o: usize, l: usize, x: usize, y: usize) -> bool {
    let dogs = &ss.octaves[o].dogs;
    let v = dogs[l].get(x, y);
    let mut greater = true;
    let mut smaller = true;
    for d in &dogs[l - 1..=l + 1] {
        for yy in y - 1..=y + 1 {
            for xx in x - 1..=x + 1 {
                if std::ptr::eq(d, &dogs[l]) && xx == x && yy == y {
                    continue;
                }
                let n = d.get(xx, yy);
                greater &= v > n;
                smaller &= v < n;
                if !greater && !smaller {
                    return false;
                }
            }
        }
    }
    greater || smaller
}

struct Derivs {
    grad: [f64; 3],
    hess: [[f64; 3]; 3],
}

fn derivatives(ss: &ScaleSpace, o: usize, l: usize, x: usize, y: usize) -> Derivs {
    let d = &ss.octaves[o].dogs;
    let (prev, cur, next) = (&d[l - 1], &d[l], &d[l + 1]);
    let v = cur.get(x, y);
    let dx = 0.5 * (cur.get(x + 1, y) - cur.get(x - 1, y));
    let dy = 0.5 * (cur.get(x, y + 1) - cur.get(x, y - 1));
    let ds = 0.5 * (next.get(x, y) - prev.get(x, y));
    let dxx = cur.get(x + 1, y) + cur.get(x - 1, y) - 2.0 * v;
    let dyy = cur.get(x, y + 1) + cur.get(x, y - 1) - 2.0 * v;
    let dss = next.get(x, y) + prev.get(x, y) - 2.0 * v;
    let dxy = 0.25 * (cur.get(x + 1, y + 1) - cur.get(x - 1, y + 1) - cur.get(x + 1, y - 1) + cur.get(x - 1, y - 1));
    let dxs = 0.25 * (next.get(x + 1, y) - next.get(x - 1, y) - prev.get(x + 1, y) + prev.get(x - 1, y));
    let dys = 0.25 * (next.get(x, y + 1) - next.get(x, y - 1) - prev.get(x, y + 1) + prev.get(x, y - 1));
    Derivs { grad: [dx, dy, ds], hess: [[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]] }
}

/// Solves `h * x = b` for a 3x3 system by Cramer's rule.
fn solve3(h: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let det = h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
        + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
    if det.abs() < 1e-14 {
        return None;
    }
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut m = *h;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        *o = (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))
            / det;
    }
    Some(out)
}

fn refine(
    ss: &ScaleSpace,
    o: usize,
    mut l: usize,
    mut x: usize,
    mut y: usize,
    contrast_thresh: f64,
    edge_ratio: f64,
) -> Option<Keypoint> {
    let oct = &ss.octaves[o];
    let (w, h) = (oct.width(), oct.height());
    let s = ss.scales_per_octave;
    let mut step = 0;
    let (offset, d) = loop {
        let d = derivatives(ss, o, l, x, y);
        let neg = [-d.grad[0], -d.grad[1], -d.grad[2]];
        let offset = solve3(&d.hess, &neg)?;
        if offset.iter().all(|v| v.abs() < 0.5) {
            break (offset, d);
        }
        if offset.iter().any(|v| v.abs() > (w.max(h)) as f64) {
            return None;
        }
        let nx = x as f64 + offset[0].round();
        let ny = y as f64 + offset[1].round();
        let nl = l as f64 + offset[2].round();
        if nl < 1.0
            || nl > s as f64
            || nx < IMAGE_BORDER as f64
            || ny < IMAGE_BORDER as f64
            || nx >= (w - IMAGE_BORDER) as f64
            || ny >= (h - IMAGE_BORDER) as f64
        {
            return None;
        }
        x = nx as usize;
        y = ny as usize;
        l = nl as usize;
        step += 1;
        if step >= MAX_REFINE_STEPS {
            return None;
        }
    };

    let value = oct.dogs[l].get(x, y);
    let contrast = value + 0.5 * (d.grad[0] * offset[0] + d.grad[1] * offset[1] + d.grad[2] * offset[2]);
    if contrast.abs() < contrast_thresh {
        return None;
    }
    let (dxx, dyy, dxy) = (d.hess[0][0], d.hess[1][1], d.hess[0][1]);
    let tr = dxx + dyy;
    let det = dxx * dyy - dxy * dxy;
    if det <= 0.0 || tr * tr * edge_ratio >= (edge_ratio + 1.0) * (edge_ratio + 1.0) * det {
        return None;
    }

    let ox = x as f64 + offset[0];
    let oy = y as f64 + offset[1];
    let layer_pos = l as f64 + offset[2];
    Some(Keypoint {
        x: ss.to_input(o, ox),
        y: ss.to_input(o, oy),
        sigma: ss.layer_sigma(layer_pos) * oct.step,
        octave: o,
        layer: l,
        layer_pos,
        ox,
        oy,
        response: contrast,
    })
}

/// Strict 26-neighbour DoG extrema, refined by a quadratic fit and filtered
/// by contrast and principal-curvature ratio. Contrast is measured on
/// intensities normalised to `[0, 1]`.
pub fn detect_extrema(ss: &ScaleSpace, contrast_thresh: f64, edge_ratio: f64) -> Vec<Keypoint> {
    let s = ss.scales_per_octave;
    let prefilter = 0.5 * contrast_thresh;
    let mut out = Vec::new();
    for (o, oct) in ss.octaves.iter().enumerate() {
        let (w, h) = (oct.width(), oct.height());
        if w <= 2 * IMAGE_BORDER || h <= 2 * IMAGE_BORDER {
            continue;
        }
        for l in 1..=s {
            let dog = &oct.dogs[l];
            for y in IMAGE_BORDER..h - IMAGE_BORDER {
                for x in IMAGE_BORDER..w - IMAGE_BORDER {
                    if dog.get(x, y).abs() <= prefilter || !is_extremum(ss, o, l, x, y) {
                        continue;
                    }
                    if let Some(kp) = refine(ss, o, l, x, y, contrast_thresh, edge_ratio) {
                        out.push(kp);
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image_core::Raster;
    use crate::sift::scale_space::build_scale_space;

    #[test]
    fn solve3_matches_known_system() {
        let h = [[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]];
        let x = [1.0, -2.0, 0.5];
        let b = [2.0 * x[0] + x[1], x[0] + 3.0 * x[1] + x[2], x[1] + 4.0 * x[2]];
        let got = solve3(&h, &b).unwrap();
        for (g, e) in got.iter().zip(x) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_image_has_no_keypoints() {
        let ss = build_scale_space(&Raster::filled(64, 64, 80.0), 3, 3, 1.6).unwrap();
        assert!(detect_extrema(&ss, 0.03, 10.0).is_empty());
    }

    #[test]
    fn gaussian_blob_gives_one_centred_keypoint() {
        let (cx, cy) = (47.3, 50.6);
        let img = Raster::from_fn(96, 96, |x, y| {
            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            30.0 + 200.0 * (-d2 / (2.0 * 16.0)).exp()
        });
        let ss = build_scale_space(&img, 3, 3, 1.6).unwrap();
        let kps = detect_extrema(&ss, 0.03, 10.0);
        assert_eq!(kps.len(), 1, "{kps:?}");
        let kp = kps[0];
        assert!(((kp.x - cx).powi(2) + (kp.y - cy).powi(2)).sqrt() < 1.0, "{kp:?}");
        // a bright blob is a DoG minimum
        assert!(kp.response < 0.0);
    }

    #[test]
    fn step_edge_is_rejected() {
        let img = Raster::from_fn(96, 96, |x, _| if x < 48 { 40.0 } else { 210.0 });
        let ss = build_scale_space(&img, 3, 3, 1.6).unwrap();
        assert!(detect_extrema(&ss, 0.03, 10.0).is_empty());
    }
}
