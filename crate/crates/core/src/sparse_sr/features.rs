use super::SparseError;
use crate::image_core::Raster;

/// Version tag of the feature extractor, stored in dictionary files.
pub const FEATURE_OP_ID: u32 = 1;

/// Support of the widest filter.
pub const MIN_PATCH: usize = 5;

/// First and second derivative responses of an upscaled image, replicate
/// padded at the border: `[-1, 0, 1]` and `[1, 0, -2, 0, 1]` along x and y.
#[derive(Debug, Clone)]
pub struct FeatureMaps {
    width: usize,
    height: usize,
    maps: [Vec<f64>; 4],
}

impl FeatureMaps {
    pub fn new(ulr: &Raster) -> Self {
        let (w, h) = ulr.dims();
        let at = |x: isize, y: isize| ulr.get_clamped(x, y);
        let mut maps: [Vec<f64>; 4] = Default::default();
        for m in maps.iter_mut() {
            m.reserve(w * h);
        }
        for y in 0..h as isize {
            for x in 0..w as isize {
                let c = at(x, y);
                maps[0].push(at(x + 1, y) - at(x - 1, y));
                maps[1].push(at(x, y + 1) - at(x, y - 1));
                maps[2].push(at(x + 2, y) - 2.0 * c + at(x - 2, y));
                maps[3].push(at(x, y + 2) - 2.0 * c + at(x, y - 2));
            }
        }
        Self { width: w, height: h, maps }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Feature vector of the `p x p` window at `(x0, y0)`: the four maps in
    /// order, each row-major over the window.
    pub fn patch(&self, x0: usize, y0: usize, p: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(4 * p * p);
        for m in &self.maps {
            for y in y0..y0 + p {
                out.extend_from_slice(&m[y * self.width + x0..y * self.width + x0 + p]);
            }
        }
        out
    }
}

/// Features of a standalone square ULR patch; length `4 p^2`.
pub fn extract_lr_features(patch: &Raster) -> Result<Vec<f64>, SparseError> {
    let (w, h) = patch.dims();
    if w != h || w < MIN_PATCH {
        return Err(SparseError::PatchTooSmall(w.min(h)));
    }
    Ok(FeatureMaps::new(patch).patch(0, 0, w))
}
