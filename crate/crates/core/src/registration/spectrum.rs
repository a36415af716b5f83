use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::image_core::Raster;

/// Dense row-major complex grid, used for both spatial and frequency data.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn from_raster(img: &Raster) -> Self {
        Self {
            rows: img.height(),
            cols: img.width(),
            data: img.data().iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    /// Real parts as a raster.
    pub fn real(&self) -> Raster {
        Raster::new(self.cols, self.rows, self.data.iter().map(|c| c.re).collect()).expect("non-empty grid")
    }

    fn transform(&mut self, inverse: bool) {
        let mut planner = FftPlanner::<f64>::new();
        let (row_fft, col_fft) = if inverse {
            (planner.plan_fft_inverse(self.cols), planner.plan_fft_inverse(self.rows))
        } else {
            (planner.plan_fft_forward(self.cols), planner.plan_fft_forward(self.rows))
        };
        for row in self.data.chunks_exact_mut(self.cols) {
            row_fft.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); self.rows];
        for c in 0..self.cols {
            for (r, v) in col.iter_mut().enumerate() {
                *v = self.data[r * self.cols + c];
            }
            col_fft.process(&mut col);
            for (r, v) in col.iter().enumerate() {
                self.data[r * self.cols + c] = *v;
            }
        }
        if inverse {
            let n = (self.rows * self.cols) as f64;
            self.data.iter_mut().for_each(|v| *v /= n);
        }
    }

    /// Unnormalised forward 2-D DFT.
    pub fn fft(mut self) -> Self {
        self.transform(false);
        self
    }

    /// Inverse 2-D DFT including the `1 / (rows * cols)` factor.
    pub fn ifft(mut self) -> Self {
        self.transform(true);
        self
    }
}

pub fn fft2(img: &Raster) -> Spectrum {
    Spectrum::from_raster(img).fft()
}

/// Signed frequency of DFT index `k` out of `n`; the Nyquist bin of an
/// even length maps to `-n/2`.
#[inline]
pub fn signed_freq(k: usize, n: usize) -> f64 {
    if k >= n.div_ceil(2) {
        k as f64 - n as f64
    } else {
        k as f64
    }
}

#[inline]
pub fn is_nyquist(k: usize, n: usize) -> bool {
    n.is_multiple_of(2) && k == n / 2
}

/// `exp(2 pi i f t / n)` for DFT index `k`, with the Nyquist bin of an even
/// length split evenly between `+n/2` and `-n/2`, which gives `cos(pi t)`.
/// Keeps band-limited interpolation of real signals real.
#[inline]
pub fn synthesis_kernel(k: usize, n: usize, t: f64) -> Complex64 {
    if is_nyquist(k, n) {
        Complex64::new((std::f64::consts::PI * t).cos(), 0.0)
    } else {
        Complex64::from_polar(1.0, std::f64::consts::TAU * signed_freq(k, n) * t / n as f64)
    }
}

/// Moves the zero frequency to `(rows / 2, cols / 2)`.
pub fn fftshift(s: &Spectrum) -> Spectrum {
    let mut out = Spectrum::zeros(s.rows, s.cols);
    for r in 0..s.rows {
        for c in 0..s.cols {
            out.set((r + s.rows / 2) % s.rows, (c + s.cols / 2) % s.cols, s.get(r, c));
        }
    }
    out
}
