use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("raster dimensions must be at least 1x1, got {width}x{height}")]
    Empty { width: usize, height: usize },
    #[error("expected {expected} samples for the given dimensions, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
}

/// Single-channel floating-point image, row-major, nominal range `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::Empty { width, height });
        }
        if data.len() != width * height {
            return Err(RasterError::LengthMismatch { expected: width * height, actual: data.len() });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(RasterError::NonFinite(i));
        }
        Ok(Self { width, height, data })
    }

    /// Panics on zero dimensions.
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be positive");
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    /// Builds a raster by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    /// Sample with signed coordinates; anything outside the grid reads as zero.
    #[inline]
    pub fn get_or_zero(&self, x: isize, y: isize) -> f64 {
        if x < 0 || y < 0 || x >= self.width as isize || y >= self.height as isize {
            0.0
        } else {
            self.data[y as usize * self.width + x as usize]
        }
    }

    /// Sample with signed coordinates clamped to the grid.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Copies the `w`x`h` window whose top-left corner is `(x0, y0)`.
    ///
    /// Panics if the window is not inside the raster.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Raster {
        assert!(x0 + w <= self.width && y0 + h <= self.height && w > 0 && h > 0, "crop window out of bounds");
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            data.extend_from_slice(&self.data[y * self.width + x0..y * self.width + x0 + w]);
        }
        Raster { width: w, height: h, data }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Raster {
        Raster { width: self.width, height: self.height, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.data.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Clamps every sample to the nominal `[0, 255]` range.
    pub fn clamp_to_range(mut self) -> Raster {
        for v in &mut self.data {
            *v = v.clamp(0.0, 255.0);
        }
        self
    }

    /// Rotates the grid by 90 degrees counter-clockwise (as displayed, y down).
    ///
    /// Pixel `(x, y)` lands on `(y, width - 1 - x)`.
    pub fn rotate90(&self) -> Raster {
        let (w, h) = (self.width, self.height);
        let mut out = Raster::zeros(h, w);
        for y in 0..h {
            for x in 0..w {
                out.set(y, w - 1 - x, self.get(x, y));
            }
        }
        out
    }
}

/// Interleaved RGB raster, nominal range `[0, 255]` per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbRaster {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RgbRaster {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::Empty { width, height });
        }
        if data.len() != 3 * width * height {
            return Err(RasterError::LengthMismatch { expected: 3 * width * height, actual: data.len() });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(RasterError::NonFinite(i));
        }
        Ok(Self { width, height, data })
    }

    /// Replicates a single channel into all three.
    pub fn from_gray(gray: &Raster) -> Self {
        let data = gray.data().iter().flat_map(|&v| [v, v, v]).collect();
        Self { width: gray.width(), height: gray.height(), data }
    }

    /// Interleaves three equally sized planes.
    pub fn from_planes(r: &Raster, g: &Raster, b: &Raster) -> Self {
        assert!(r.dims() == g.dims() && g.dims() == b.dims(), "plane size mismatch");
        let data = r.data().iter().zip(g.data()).zip(b.data()).flat_map(|((&r, &g), &b)| [r, g, b]).collect();
        Self { width: r.width(), height: r.height(), data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn is_gray(&self) -> bool {
        self.data.chunks_exact(3).all(|p| p[0] == p[1] && p[1] == p[2])
    }

    pub fn channel(&self, c: usize) -> Raster {
        assert!(c < 3);
        Raster { width: self.width, height: self.height, data: self.data.iter().skip(c).step_by(3).copied().collect() }
    }
}

pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Rec.601 luma.
pub fn to_luma(img: &RgbRaster) -> Raster {
    let [wr, wg, wb] = LUMA_WEIGHTS;
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| {
            // weights sum to one; keep gray pixels bit-exact
            if p[0] == p[1] && p[1] == p[2] {
                p[0]
            } else {
                wr * p[0] + wg * p[1] + wb * p[2]
            }
        })
        .collect();
    Raster { width: img.width, height: img.height, data }
}

/// Splits RGB into luma plus the two colour-difference planes `(R - Y, B - Y)`.
pub fn split_luma_chroma(img: &RgbRaster) -> (Raster, Raster, Raster) {
    let y = to_luma(img);
    let r = img.channel(0);
    let b = img.channel(2);
    let cr = Raster::from_fn(img.width, img.height, |px, py| r.get(px, py) - y.get(px, py));
    let cb = Raster::from_fn(img.width, img.height, |px, py| b.get(px, py) - y.get(px, py));
    (y, cr, cb)
}

/// Inverse of [`split_luma_chroma`]; output clamped to `[0, 255]`.
pub fn merge_luma_chroma(y: &Raster, cr: &Raster, cb: &Raster) -> RgbRaster {
    let [wr, wg, wb] = LUMA_WEIGHTS;
    let mut data = Vec::with_capacity(3 * y.data().len());
    for ((&yy, &crv), &cbv) in y.data().iter().zip(cr.data()).zip(cb.data()) {
        let r = yy + crv;
        let b = yy + cbv;
        let g = (yy - wr * r - wb * b) / wg;
        data.extend([r, g, b].map(|v| v.clamp(0.0, 255.0)));
    }
    RgbRaster { width: y.width(), height: y.height(), data }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(Raster::new(0, 3, vec![]), Err(RasterError::Empty { .. })));
        assert!(matches!(Raster::new(2, 2, vec![0.0; 3]), Err(RasterError::LengthMismatch { .. })));
        assert!(matches!(Raster::new(1, 2, vec![0.0, f64::NAN]), Err(RasterError::NonFinite(1))));
    }

    #[test]
    fn luma_examples() {
        let img = RgbRaster::new(3, 1, vec![255., 255., 255., 0., 0., 0., 100., 50., 200.]).unwrap();
        let y = to_luma(&img);
        assert_eq!(y.get(0, 0), 255.0);
        assert_eq!(y.get(1, 0), 0.0);
        // 29.9 + 29.35 + 22.8 = 82.05
        assert!((y.get(2, 0) - 82.05).abs() < 1e-9);
    }

    #[test]
    fn chroma_round_trip() {
        let img = RgbRaster::new(2, 1, vec![10., 200., 30., 90., 90., 255.]).unwrap();
        let (y, cr, cb) = split_luma_chroma(&img);
        let back = merge_luma_chroma(&y, &cr, &cb);
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rotate90_moves_corners() {
        let r = Raster::from_fn(3, 2, |x, y| (10 * y + x) as f64);
        let q = r.rotate90();
        assert_eq!(q.dims(), (2, 3));
        // top-right corner goes to top-left
        assert_eq!(q.get(0, 0), r.get(2, 0));
        assert_eq!(q.get(1, 2), r.get(0, 1));
    }
}
