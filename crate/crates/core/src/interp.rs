//! Bicubic resampling with cubic Lagrange weights over a 4x4 neighbourhood.
//!
//! Output pixel `(x, y)` maps to the source coordinate
//! `((x + 0.5) / s - 0.5, (y + 0.5) / s - 0.5)` (pixel-centre convention).
//! With `c = floor(u)` the four knots along an axis are the integer source
//! positions `c - 1 .. c + 2`, and the 2-D weight of `p[i][j]` is the product
//! of the row weight `a_i` and the column weight `b_j`. Samples outside the
//! source read as zero unless [`EdgeMode::Clamp`] is requested.

use thiserror::Error;

use crate::image_core::Raster;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpError {
    #[error("zoom factor must be positive and finite, got {0}")]
    NonPositiveZoom(f64),
    #[error("output size must be at least 1x1, got {0}x{1}")]
    EmptyOutput(usize, usize),
    #[error("interpolation knots must be strictly increasing: {0:?}")]
    DuplicateKnots([f64; 4]),
}

/// How samples outside the source grid are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgeMode {
    /// Zero padding.
    #[default]
    Zero,
    /// Replicate the nearest edge sample.
    Clamp,
}

impl std::str::FromStr for EdgeMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(EdgeMode::Zero),
            "clamp" => Ok(EdgeMode::Clamp),
            other => Err(format!("unknown edge mode '{other}' (expected zero|clamp)")),
        }
    }
}

/// Zoom factors and output dimensions of a resize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoomSpec {
    pub sx: f64,
    pub sy: f64,
    pub out_width: usize,
    pub out_height: usize,
}

impl ZoomSpec {
    /// Same factor on both axes; output dimensions are `round(in * s)`.
    pub fn uniform(src_width: usize, src_height: usize, s: f64) -> Result<Self, InterpError> {
        if !(s.is_finite() && s > 0.0) {
            return Err(InterpError::NonPositiveZoom(s));
        }
        let out_width = (src_width as f64 * s).round() as usize;
        let out_height = (src_height as f64 * s).round() as usize;
        if out_width == 0 || out_height == 0 {
            return Err(InterpError::EmptyOutput(out_width, out_height));
        }
        Ok(Self { sx: s, sy: s, out_width, out_height })
    }

    /// Resize to an exact output size; the per-axis factor is `out / in`.
    pub fn to_size(
        src_width: usize,
        src_height: usize,
        out_width: usize,
        out_height: usize,
    ) -> Result<Self, InterpError> {
        if out_width == 0 || out_height == 0 {
            return Err(InterpError::EmptyOutput(out_width, out_height));
        }
        Ok(Self {
            sx: out_width as f64 / src_width as f64,
            sy: out_height as f64 / src_height as f64,
            out_width,
            out_height,
        })
    }
}

/// Source-space coordinate of output index `i` under zoom `s`.
#[inline]
pub fn source_coord(i: usize, s: f64) -> f64 {
    (i as f64 + 0.5) / s - 0.5
}

/// Cubic Lagrange basis weights of the four `knots` evaluated at `t`.
pub fn lagrange_weights(t: f64, knots: [f64; 4]) -> Result<[f64; 4], InterpError> {
    if knots.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(InterpError::DuplicateKnots(knots));
    }
    Ok(lagrange_unchecked(t, knots))
}

#[inline]
fn lagrange_unchecked(t: f64, knots: [f64; 4]) -> [f64; 4] {
    let mut w = [1.0; 4];
    for (i, wi) in w.iter_mut().enumerate() {
        for (k, &knot) in knots.iter().enumerate() {
            if k != i {
                *wi *= (t - knot) / (knots[i] - knot);
            }
        }
    }
    w
}

/// Base index `c` and weights for knots `c - 1 .. c + 2` around `u`.
#[inline]
fn axis_weights(u: f64) -> (isize, [f64; 4]) {
    let c = u.floor();
    let knots = [c - 1.0, c, c + 1.0, c + 2.0];
    (c as isize, lagrange_unchecked(u, knots))
}

/// The 4x4 block `p[i][j] = f(r - 1 + i, c - 1 + j)` feeding one output pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighborhood4x4 {
    pub p: [[f64; 4]; 4],
}

impl Neighborhood4x4 {
    pub fn gather(src: &Raster, r: isize, c: isize, edge: EdgeMode) -> Self {
        let mut p = [[0.0; 4]; 4];
        for (i, row) in p.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let (y, x) = (r - 1 + i as isize, c - 1 + j as isize);
                *v = read(src, x, y, edge);
            }
        }
        Self { p }
    }

    /// `sum_i sum_j a_i b_j p[i][j]`, evaluated relative to `p[1][1]` (the
    /// weights sum to one) so flat neighbourhoods reproduce exactly.
    pub fn combine(&self, row_w: &[f64; 4], col_w: &[f64; 4]) -> f64 {
        let mut rows = [0.0; 4];
        for (i, r) in rows.iter_mut().enumerate() {
            let base = self.p[i][1];
            *r = base + col_w.iter().zip(&self.p[i]).map(|(w, v)| w * (v - base)).sum::<f64>();
        }
        let base = rows[1];
        base + row_w.iter().zip(&rows).map(|(w, v)| w * (v - base)).sum::<f64>()
    }
}

#[inline]
fn read(src: &Raster, x: isize, y: isize, edge: EdgeMode) -> f64 {
    match edge {
        EdgeMode::Zero => src.get_or_zero(x, y),
        EdgeMode::Clamp => src.get_clamped(x, y),
    }
}

/// Bicubic value at the continuous source position `(x, y)`, unclamped.
pub fn sample(src: &Raster, x: f64, y: f64, edge: EdgeMode) -> f64 {
    let (c, col_w) = axis_weights(x);
    let (r, row_w) = axis_weights(y);
    Neighborhood4x4::gather(src, r, c, edge).combine(&row_w, &col_w)
}

/// Resize without the final clamp to `[0, 255]`.
pub fn bicubic_resize_raw(src: &Raster, spec: &ZoomSpec, edge: EdgeMode) -> Result<Raster, InterpError> {
    for s in [spec.sx, spec.sy] {
        if !(s.is_finite() && s > 0.0) {
            return Err(InterpError::NonPositiveZoom(s));
        }
    }
    if spec.out_width == 0 || spec.out_height == 0 {
        return Err(InterpError::EmptyOutput(spec.out_width, spec.out_height));
    }
    let cols: Vec<(isize, [f64; 4])> = (0..spec.out_width).map(|x| axis_weights(source_coord(x, spec.sx))).collect();
    let rows: Vec<(isize, [f64; 4])> = (0..spec.out_height).map(|y| axis_weights(source_coord(y, spec.sy))).collect();
    let mut out = Vec::with_capacity(spec.out_width * spec.out_height);
    for &(r, ref row_w) in &rows {
        for &(c, ref col_w) in &cols {
            out.push(Neighborhood4x4::gather(src, r, c, edge).combine(row_w, col_w));
        }
    }
    Ok(Raster::new(spec.out_width, spec.out_height, out).expect("finite bicubic output"))
}

/// Bicubic resize; the result is clamped to the nominal `[0, 255]` range.
pub fn bicubic_resize(src: &Raster, spec: &ZoomSpec, edge: EdgeMode) -> Result<Raster, InterpError> {
    bicubic_resize_raw(src, spec, edge).map(Raster::clamp_to_range)
}

/// Convenience: uniform zoom by `s`.
pub fn zoom(src: &Raster, s: f64, edge: EdgeMode) -> Result<Raster, InterpError> {
    let spec = ZoomSpec::uniform(src.width(), src.height(), s)?;
    bicubic_resize(src, &spec, edge)
}

/// Convenience: resize to an exact size.
pub fn resize_to(src: &Raster, width: usize, height: usize, edge: EdgeMode) -> Result<Raster, InterpError> {
    let spec = ZoomSpec::to_size(src.width(), src.height(), width, height)?;
    bicubic_resize(src, &spec, edge)
}
