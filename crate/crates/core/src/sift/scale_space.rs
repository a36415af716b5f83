use crate::image_core::Raster;
use crate::interp::{self, EdgeMode};

use super::{SiftError, SiftParams};

/// Smallest octave edge we are willing to build.
pub const MIN_OCTAVE_SIZE: usize = 8;
/// Smallest accepted input edge.
pub const MIN_INPUT_SIZE: usize = 32;

/// One resolution level: `scales_per_octave + 3` Gaussian layers and their
/// adjacent differences.
#[derive(Debug, Clone)]
pub struct Octave {
    pub gaussians: Vec<Raster>,
    pub dogs: Vec<Raster>,
    /// Blur of each Gaussian layer in this octave's own pixel units.
    pub sigmas: Vec<f64>,
    /// Size of one octave pixel in input-image pixels.
    pub step: f64,
}

impl Octave {
    pub fn width(&self) -> usize {
        self.gaussians[0].width()
    }

    pub fn height(&self) -> usize {
        self.gaussians[0].height()
    }
}

#[derive(Debug, Clone)]
pub struct ScaleSpace {
    pub octaves: Vec<Octave>,
    pub scales_per_octave: usize,
    pub sigma0: f64,
    /// Input-image coordinate of octave-0 pixel 0 (non-zero after the
    /// optional 2x upsampling).
    pub origin: f64,
}

impl ScaleSpace {
    /// Maps an octave-local coordinate back into input-image pixels.
    pub fn to_input(&self, octave: usize, v: f64) -> f64 {
        v * self.octaves[octave].step + self.origin
    }

    /// Octave-local blur for a (possibly fractional) layer index.
    pub fn layer_sigma(&self, layer: f64) -> f64 {
        self.sigma0 * 2f64.powf(layer / self.scales_per_octave as f64)
    }
}

/// Largest octave count keeping every octave at least [`MIN_OCTAVE_SIZE`].
pub fn max_octaves(width: usize, height: usize) -> usize {
    let mut n = 0;
    let mut m = width.min(height);
    while m >= MIN_OCTAVE_SIZE {
        n += 1;
        m /= 2;
    }
    n
}

#[inline]
fn reflect101(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut i = i.rem_euclid(period);
    if i >= n as isize {
        i = period - i;
    }
    i as usize
}

pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur, kernel radius `ceil(3 sigma)`, mirrored borders.
pub fn gaussian_blur(img: &Raster, sigma: f64) -> Raster {
    if sigma <= 0.0 {
        return img.clone();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (w, h) = img.dims();
    let src = img.data();
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut s = 0.0;
            for (t, kv) in k.iter().enumerate() {
                s += kv * row[reflect101(x as isize + t as isize - r, w)];
            }
            tmp[y * w + x] = s;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for (t, kv) in k.iter().enumerate() {
            let sy = reflect101(y as isize + t as isize - r, h);
            let src_row = &tmp[sy * w..(sy + 1) * w];
            let dst = &mut out[y * w..(y + 1) * w];
            for (d, s) in dst.iter_mut().zip(src_row) {
                *d += kv * s;
            }
        }
    }
    Raster::new(w, h, out).expect("blur preserves shape")
}

fn downsample(img: &Raster) -> Raster {
    let (w, h) = (img.width() / 2, img.height() / 2);
    Raster::from_fn(w, h, |x, y| img.get(2 * x, 2 * y))
}

fn difference(a: &Raster, b: &Raster) -> Raster {
    let data = b.data().iter().zip(a.data()).map(|(hi, lo)| hi - lo).collect();
    Raster::new(a.width(), a.height(), data).expect("same shape")
}

/// Gaussian / difference-of-Gaussian pyramid with no initial upsampling and
/// an assumed input blur of 0.5.
pub fn build_scale_space(
    img: &Raster,
    octaves: usize,
    scales_per_octave: usize,
    sigma0: f64,
) -> Result<ScaleSpace, SiftError> {
    let params = SiftParams { octaves: Some(octaves), scales_per_octave, sigma0, ..SiftParams::default() };
    build_scale_space_with(img, &params)
}

pub fn build_scale_space_with(img: &Raster, params: &SiftParams) -> Result<ScaleSpace, SiftError> {
    let (w, h) = img.dims();
    if w < MIN_INPUT_SIZE || h < MIN_INPUT_SIZE {
        return Err(SiftError::TooSmall { width: w, height: h, octaves: params.octaves.unwrap_or(1) });
    }
    if params.scales_per_octave < 2 {
        return Err(SiftError::InvalidParams("scales_per_octave must be >= 2".into()));
    }
    if !(params.sigma0 > 0.0) {
        return Err(SiftError::InvalidParams("sigma0 must be positive".into()));
    }
    if params.octaves == Some(0) {
        return Err(SiftError::InvalidParams("octaves must be >= 1".into()));
    }

    let normalized = img.map(|v| v / 255.0);
    let (base, mut step, assumed, origin) = if params.upsample_input {
        let up =
            interp::zoom(&normalized, 2.0, EdgeMode::Clamp).map_err(|e| SiftError::InvalidParams(e.to_string()))?;
        // zoom clamps to [0, 255] which is harmless on [0, 1] data
        (up, 0.5, 2.0 * params.assumed_blur, -0.25)
    } else {
        (normalized, 1.0, params.assumed_blur, 0.0)
    };

    let available = max_octaves(base.width(), base.height());
    let n_oct = match params.octaves {
        Some(n) if n > available => return Err(SiftError::TooSmall { width: w, height: h, octaves: n }),
        Some(n) => n,
        None => available.max(1),
    };

    let s = params.scales_per_octave;
    let n_layers = s + 3;
    let sigmas: Vec<f64> = (0..n_layers).map(|i| params.sigma0 * 2f64.powf(i as f64 / s as f64)).collect();
    // incremental blur taking layer i-1 to layer i
    let increments: Vec<f64> =
        (1..n_layers).map(|i| (sigmas[i] * sigmas[i] - sigmas[i - 1] * sigmas[i - 1]).sqrt()).collect();

    let first_blur = (params.sigma0 * params.sigma0 - assumed * assumed).max(0.01).sqrt();
    let mut seed = gaussian_blur(&base, first_blur);
    let mut octaves = Vec::with_capacity(n_oct);
    for o in 0..n_oct {
        if o > 0 {
            let prev: &Octave = &octaves[o - 1];
            seed = downsample(&prev.gaussians[s]);
            step *= 2.0;
        }
        let mut gaussians = Vec::with_capacity(n_layers);
        gaussians.push(seed.clone());
        for inc in &increments {
            let next = gaussian_blur(gaussians.last().unwrap(), *inc);
            gaussians.push(next);
        }
        let dogs = gaussians.windows(2).map(|p| difference(&p[0], &p[1])).collect();
        octaves.push(Octave { gaussians, dogs, sigmas: sigmas.clone(), step });
    }
    Ok(ScaleSpace { octaves, scales_per_octave: s, sigma0: params.sigma0, origin })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect101(-1, 5), 1);
        assert_eq!(reflect101(-2, 5), 2);
        assert_eq!(reflect101(5, 5), 3);
        assert_eq!(reflect101(6, 5), 2);
        assert_eq!(reflect101(2, 5), 2);
        assert_eq!(reflect101(-7, 3), 1);
    }

    #[test]
    fn kernel_radius_and_mass() {
        let k = gaussian_kernel(1.6);
        assert_eq!(k.len(), 2 * 5 + 1);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_image_has_flat_dogs() {
        let img = Raster::filled(64, 64, 120.0);
        let ss = build_scale_space(&img, 3, 3, 1.6).unwrap();
        for o in &ss.octaves {
            assert_eq!(o.dogs.len(), o.gaussians.len() - 1);
            for d in &o.dogs {
                assert!(d.data().iter().all(|v| v.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn octaves_halve() {
        let img = Raster::from_fn(64, 64, |x, y| ((x * y) % 17) as f64);
        let ss = build_scale_space(&img, 3, 3, 1.6).unwrap();
        let sizes: Vec<_> = ss.octaves.iter().map(|o| (o.width(), o.height())).collect();
        assert_eq!(sizes, vec![(64, 64), (32, 32), (16, 16)]);
        assert_eq!(ss.octaves[0].gaussians.len(), 6);
    }

    #[test]
    fn too_small_is_rejected() {
        let img = Raster::filled(31, 64, 1.0);
        assert!(matches!(build_scale_space(&img, 1, 3, 1.6), Err(SiftError::TooSmall { .. })));
        let img = Raster::filled(32, 32, 1.0);
        assert!(matches!(build_scale_space(&img, 4, 3, 1.6), Err(SiftError::TooSmall { .. })));
        assert!(build_scale_space(&img, 3, 3, 1.6).is_ok());
    }

    /// The DoG response of a unit impulse at its centre is
    /// `g(sigma_i) - g(sigma_{i+1})` with `g(s) = 1 / (2 pi s^2)`, which
    /// shrinks with scale: the finest layer carries the maximum.
    #[test]
    fn impulse_peaks_at_finest_layer() {
        let img = Raster::from_fn(64, 64, |x, y| if x == 32 && y == 32 { 255.0 } else { 0.0 });
        let ss = build_scale_space(&img, 1, 3, 1.6).unwrap();
        let o = &ss.octaves[0];
        let centre: Vec<f64> = o.dogs.iter().map(|d| d.get(32, 32).abs()).collect();
        let best = centre.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
        assert_eq!(best, 0);
        // analytic continuous-domain values; the impulse carries none of the
        // assumed 0.5 camera blur
        let g = |s: f64| {
            let eff = s * s - 0.25;
            1.0 / (2.0 * std::f64::consts::PI * eff)
        };
        for (i, &v) in centre.iter().enumerate().skip(1) {
            let expect = g(o.sigmas[i]) - g(o.sigmas[i + 1]);
            assert!((v - expect).abs() / expect < 0.05, "layer {i}: {v} vs {expect}");
        }
    }
}
