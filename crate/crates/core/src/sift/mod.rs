//! SIFT: Gaussian/DoG scale space, extremum localisation, orientation
//! assignment and 128-d gradient-histogram descriptors.

mod descriptor;
mod detect;
mod orientation;
mod scale_space;

use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::image_core::Raster;

pub use descriptor::compute_descriptor;
pub use detect::{detect_extrema, Keypoint, IMAGE_BORDER};
pub use orientation::{assign_orientations, orientation_histogram, OrientedKeypoint, ORIENTATION_BINS};
pub use scale_space::{
    build_scale_space, build_scale_space_with, gaussian_blur, gaussian_kernel, max_octaves, Octave, ScaleSpace,
    MIN_INPUT_SIZE, MIN_OCTAVE_SIZE,
};

pub const DESCRIPTOR_LEN: usize = 128;

#[derive(Debug, Error, PartialEq)]
pub enum SiftError {
    #[error("{width}x{height} image is too small for {octaves} octave(s)")]
    TooSmall { width: usize, height: usize, octaves: usize },
    #[error("invalid SIFT parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiftParams {
    /// `None` builds as many octaves as the image allows.
    pub octaves: Option<usize>,
    pub scales_per_octave: usize,
    pub sigma0: f64,
    /// On intensities scaled to `[0, 1]`.
    pub contrast_threshold: f64,
    pub edge_ratio: f64,
    pub upsample_input: bool,
    /// Blur already present in the input, in pixels.
    pub assumed_blur: f64,
}

impl Default for SiftParams {
    fn default() -> Self {
        Self {
            octaves: None,
            scales_per_octave: 3,
            sigma0: 1.6,
            contrast_threshold: 0.03,
            edge_ratio: 10.0,
            upsample_input: false,
            assumed_blur: 0.5,
        }
    }
}

/// A local feature: unit descriptor `v`, location, scale `s` (input pixels)
/// and orientation `o` in `[0, 2pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SiftDescriptor {
    pub v: [f32; DESCRIPTOR_LEN],
    pub x: f64,
    pub y: f64,
    pub s: f64,
    pub o: f64,
}

impl SiftDescriptor {
    pub fn distance_sq(&self, other: &SiftDescriptor) -> f32 {
        self.v.iter().zip(&other.v).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn distance(&self, other: &SiftDescriptor) -> f32 {
        self.distance_sq(other).sqrt()
    }
}

/// Runs all four phases. Output order is deterministic.
pub fn extract(img: &Raster, params: &SiftParams) -> Result<Vec<SiftDescriptor>, SiftError> {
    if !(params.contrast_threshold >= 0.0) || !(params.edge_ratio > 0.0) {
        return Err(SiftError::InvalidParams("contrast_threshold must be >= 0 and edge_ratio > 0".into()));
    }
    let ss = build_scale_space_with(img, params)?;
    let keypoints = detect_extrema(&ss, params.contrast_threshold, params.edge_ratio);
    Ok(keypoints
        .par_iter()
        .flat_map_iter(|kp| {
            assign_orientations(&ss, kp).into_iter().filter_map(|okp| compute_descriptor(&ss, &okp)).collect::<Vec<_>>()
        })
        .collect())
}

/// Mutual nearest neighbours passing Lowe's ratio test in both directions.
/// Returns index pairs `(i in a, j in b)`.
pub fn match_descriptors(a: &[SiftDescriptor], b: &[SiftDescriptor], ratio: f32) -> Vec<(usize, usize)> {
    fn best(d: &SiftDescriptor, set: &[SiftDescriptor], ratio: f32) -> Option<usize> {
        let mut first = (f32::INFINITY, usize::MAX);
        let mut second = f32::INFINITY;
        for (j, e) in set.iter().enumerate() {
            let dist = d.distance_sq(e);
            if dist < first.0 {
                second = first.0;
                first = (dist, j);
            } else if dist < second {
                second = dist;
            }
        }
        (first.1 != usize::MAX && first.0 < ratio * ratio * second).then_some(first.1)
    }
    let forward: Vec<Option<usize>> = a.par_iter().map(|d| best(d, b, ratio)).collect();
    forward
        .iter()
        .enumerate()
        .filter_map(|(i, j)| {
            let j = (*j)?;
            (best(&b[j], a, ratio) == Some(i)).then_some((i, j))
        })
        .collect()
}

/// One line per descriptor: `x y s o v0 .. v127`, space separated.
pub fn write_descriptors<W: Write>(mut w: W, descs: &[SiftDescriptor]) -> io::Result<()> {
    for d in descs {
        write!(w, "{} {} {} {}", d.x, d.y, d.s, d.o)?;
        for v in &d.v {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_descriptors<R: BufRead>(r: R) -> io::Result<Vec<SiftDescriptor>> {
    let bad = |line: usize, msg: &str| io::Error::new(io::ErrorKind::InvalidData, format!("line {line}: {msg}"));
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 + DESCRIPTOR_LEN {
            return Err(bad(n + 1, &format!("expected {} fields, got {}", 4 + DESCRIPTOR_LEN, fields.len())));
        }
        let head: Vec<f64> = fields[..4]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(n + 1, &e.to_string()))?;
        let mut v = [0.0f32; DESCRIPTOR_LEN];
        for (slot, f) in v.iter_mut().zip(&fields[4..]) {
            *slot = f.parse().map_err(|e: std::num::ParseFloatError| bad(n + 1, &e.to_string()))?;
        }
        out.push(SiftDescriptor { v, x: head[0], y: head[1], s: head[2], o: head[3] });
    }
    Ok(out)
}
