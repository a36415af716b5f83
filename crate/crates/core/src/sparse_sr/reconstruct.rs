use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::dictionary::{DictionaryPair, HrTarget, Mat};
use super::features::{FeatureMaps, MIN_PATCH};
use super::omp::{Coder, SparseCode};
use super::train::TrainingPair;
use super::SparseError;
use crate::image_core::Raster;
use crate::interp::{resize_to, EdgeMode};

/// Top-left corners of overlapping square patches covering an image. The
/// step is `patch_size - overlap`; the last patch on each axis is snapped to
/// the border.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    pub patch_size: usize,
    pub overlap: usize,
    pub xs: Vec<usize>,
    pub ys: Vec<usize>,
}

impl PatchGrid {
    pub fn new(patch_size: usize, overlap: usize, width: usize, height: usize) -> Result<Self, SparseError> {
        if overlap >= patch_size {
            return Err(SparseError::InvalidGrid { patch: patch_size, overlap });
        }
        if width < patch_size || height < patch_size {
            return Err(SparseError::ImageTooSmall { width, height, patch: patch_size });
        }
        let axis = |n: usize| {
            let mut v: Vec<usize> = (0..=n - patch_size).step_by(patch_size - overlap).collect();
            if *v.last().expect("at least one") != n - patch_size {
                v.push(n - patch_size);
            }
            v
        };
        Ok(Self { patch_size, overlap, xs: axis(width), ys: axis(height) })
    }

    pub fn origins(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.ys.iter().flat_map(move |&y| self.xs.iter().map(move |&x| (x, y)))
    }

    pub fn len(&self) -> usize {
        self.xs.len() * self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrParams {
    pub upscale: u32,
    pub overlap: usize,
    /// OMP sparsity cap `T`.
    pub sparsity: usize,
    /// OMP relative residual tolerance.
    pub eps: f64,
    /// Edge handling of the bicubic upscale.
    pub edge: EdgeMode,
}

impl Default for SrParams {
    fn default() -> Self {
        Self { upscale: 2, overlap: 5, sparsity: 3, eps: 0.1, edge: EdgeMode::Clamp }
    }
}

/// HR patch from a code: `Dh x` plus the ULR patch (residual dictionaries)
/// or its mean (mean-removed dictionaries).
pub fn synthesize_hr_patch(code: &SparseCode, dh: &Mat, ulr_patch: &[f64], target: HrTarget) -> Vec<f64> {
    let mut out = code.apply(dh);
    match target {
        HrTarget::Residual => out.iter_mut().zip(ulr_patch).for_each(|(o, u)| *o += u),
        HrTarget::MeanRemoved => {
            let m = ulr_patch.iter().sum::<f64>() / ulr_patch.len() as f64;
            out.iter_mut().for_each(|o| *o += m);
        }
    }
    out
}

fn window(img: &Raster, x0: usize, y0: usize, p: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(p * p);
    for y in y0..y0 + p {
        v.extend_from_slice(&img.row(y)[x0..x0 + p]);
    }
    v
}

/// Bicubic upscale followed by [`super_resolve_ulr`].
pub fn super_resolve(lr: &Raster, pair: &DictionaryPair, params: &SrParams) -> Result<Raster, SparseError> {
    check_scale(pair, params)?;
    let s = params.upscale as usize;
    let ulr =
        resize_to(lr, lr.width() * s, lr.height() * s, params.edge).map_err(|e| SparseError::Interp(e.to_string()))?;
    super_resolve_ulr(&ulr, pair, params)
}

fn check_scale(pair: &DictionaryPair, params: &SrParams) -> Result<(), SparseError> {
    if pair.upscale != params.upscale {
        return Err(SparseError::ScaleMismatch { dictionary: pair.upscale, requested: params.upscale });
    }
    Ok(())
}

/// Patch-wise synthesis on an already upscaled image: each grid window is
/// coded from its features, synthesised from `Dh`, and overlapping results
/// are averaged per pixel. Uncovered pixels keep the ULR value.
pub fn super_resolve_ulr(ulr: &Raster, pair: &DictionaryPair, params: &SrParams) -> Result<Raster, SparseError> {
    check_scale(pair, params)?;
    let p = pair.patch_size;
    let (w, h) = ulr.dims();
    let grid = PatchGrid::new(p, params.overlap, w, h)?;
    let maps = FeatureMaps::new(ulr);
    let coder = Coder::new(&pair.dl);
    let origins: Vec<(usize, usize)> = grid.origins().collect();
    let patches: Vec<Vec<f64>> = origins
        .par_iter()
        .map(|&(x, y)| {
            let code = coder.code(&maps.patch(x, y, p), params.sparsity, params.eps);
            synthesize_hr_patch(&code, &pair.dh, &window(ulr, x, y, p), pair.target)
        })
        .collect();
    let mut acc = vec![0.0; w * h];
    let mut cnt = vec![0u32; w * h];
    for (&(x0, y0), patch) in origins.iter().zip(&patches) {
        for dy in 0..p {
            for dx in 0..p {
                let i = (y0 + dy) * w + x0 + dx;
                acc[i] += patch[dy * p + dx];
                cnt[i] += 1;
            }
        }
    }
    let data =
        acc.iter().zip(&cnt).zip(ulr.data()).map(|((&a, &c), &u)| if c == 0 { u } else { a / c as f64 }).collect();
    Ok(Raster::new(w, h, data).expect("shape").clamp_to_range())
}

/// LR observation of an HR image: bicubic downscale by `upscale`. The HR
/// dimensions must be multiples of `upscale`.
pub fn degrade(hr: &Raster, upscale: u32, edge: EdgeMode) -> Result<Raster, SparseError> {
    let s = upscale as usize;
    let (w, h) = hr.dims();
    if s == 0 || w % s != 0 || h % s != 0 {
        return Err(SparseError::Interp(format!("{w}x{h} is not divisible by {upscale}")));
    }
    resize_to(hr, w / s, h / s, edge).map_err(|e| SparseError::Interp(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarvestParams {
    pub patch_size: usize,
    pub upscale: u32,
    /// Edge handling of the degradation applied to sources.
    pub edge: EdgeMode,
    /// Distance between sampled windows.
    pub stride: usize,
    /// HR windows with lower variance are skipped.
    pub var_thresh: f64,
    /// Seeded random subset when more windows qualify.
    pub max_pairs: usize,
    pub seed: u64,
    pub target: HrTarget,
}

impl Default for HarvestParams {
    fn default() -> Self {
        Self {
            patch_size: 10,
            upscale: 2,
            edge: EdgeMode::Clamp,
            stride: 2,
            var_thresh: 10.0,
            max_pairs: 6000,
            seed: 0,
            target: HrTarget::Residual,
        }
    }
}

/// HR-aligned content for pair harvesting, with an optional validity mask.
#[derive(Debug, Clone, Copy)]
pub struct HarvestSource<'a> {
    pub image: &'a Raster,
    pub valid: Option<&'a [bool]>,
}

impl<'a> HarvestSource<'a> {
    pub fn new(image: &'a Raster) -> Self {
        Self { image, valid: None }
    }

    pub fn masked(image: &'a Raster, valid: &'a [bool]) -> Self {
        Self { image, valid: Some(valid) }
    }
}

/// Training pairs for a query-adaptive dictionary: HR windows from each
/// registered candidate paired with the features of the same ULR window.
///
/// A candidate's HR target is its own detail layer, `c - up(down(c))`
/// (or the mean-removed window for [`HrTarget::MeanRemoved`]), scaled by
/// the gain that best maps `up(down(c))` onto the ULR over valid pixels, so
/// exposure differences between web images and the query do not leak into
/// the dictionary. Windows within the degradation footprint of invalid
/// pixels or below `var_thresh` are skipped. No candidates gives no pairs.
pub fn build_adaptive_pairs(
    ulr: &Raster,
    sources: &[HarvestSource<'_>],
    params: &HarvestParams,
) -> Result<Vec<TrainingPair>, SparseError> {
    harvest(&[(ulr, sources)], params)
}

/// Training pairs from HR images degraded by bicubic downscaling, for a
/// generic dictionary. Images are cropped to multiples of `upscale`.
pub fn collect_training_pairs(hr_images: &[Raster], params: &HarvestParams) -> Result<Vec<TrainingPair>, SparseError> {
    let s = params.upscale as usize;
    let mut hrs = Vec::with_capacity(hr_images.len());
    let mut ulrs = Vec::with_capacity(hr_images.len());
    for hr in hr_images {
        let (w, h) = (hr.width() / s * s, hr.height() / s * s);
        if w < params.patch_size || h < params.patch_size {
            log::warn!("skipping {}x{} training image", hr.width(), hr.height());
            continue;
        }
        let hr = hr.crop(0, 0, w, h);
        let ulr = reupsample(&hr, params)?;
        hrs.push(hr);
        ulrs.push(ulr);
    }
    let sources: Vec<[HarvestSource<'_>; 1]> = hrs.iter().map(|h| [HarvestSource::new(h)]).collect();
    let groups: Vec<(&Raster, &[HarvestSource<'_>])> =
        ulrs.iter().zip(&sources).map(|(u, s)| (u, s.as_slice())).collect();
    harvest(&groups, params)
}

/// `up(down(img))` at the harvest scale.
fn reupsample(img: &Raster, params: &HarvestParams) -> Result<Raster, SparseError> {
    let lr = degrade(img, params.upscale, params.edge)?;
    resize_to(&lr, img.width(), img.height(), params.edge).map_err(|e| SparseError::Interp(e.to_string()))
}

/// Least-squares gain of `x` onto `y` over the masked pixels (1 when `x`
/// is flat there).
fn fit_gain(x: &Raster, y: &Raster, valid: Option<&[bool]>) -> f64 {
    let pick = |i: usize| valid.is_none_or(|v| v[i]);
    let (mut n, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for (i, (&a, &b)) in x.data().iter().zip(y.data()).enumerate() {
        if pick(i) {
            n += 1.0;
            sx += a;
            sy += b;
        }
    }
    if n < 2.0 {
        return 1.0;
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, (&a, &b)) in x.data().iter().zip(y.data()).enumerate() {
        if pick(i) {
            sxy += (a - mx) * (b - my);
            sxx += (a - mx) * (a - mx);
        }
    }
    if sxx <= 1e-9 * n {
        1.0
    } else {
        sxy / sxx
    }
}

/// Box erosion of a mask, window clipped at the image border.
fn erode(valid: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    if r == 0 {
        return valid.to_vec();
    }
    let run = |len: usize, get: &dyn Fn(usize) -> bool| -> Vec<bool> {
        (0..len).map(|i| (i.saturating_sub(r)..=(i + r).min(len - 1)).all(get)).collect()
    };
    let mut rows = vec![false; w * h];
    for y in 0..h {
        let out = run(w, &|x| valid[y * w + x]);
        rows[y * w..(y + 1) * w].copy_from_slice(&out);
    }
    let mut out = vec![false; w * h];
    for x in 0..w {
        let col = run(h, &|y| rows[y * w + x]);
        for (y, v) in col.into_iter().enumerate() {
            out[y * w + x] = v;
        }
    }
    out
}

struct Prepared {
    /// HR target layer (detail, or gain-scaled image for mean removal).
    target: Raster,
    /// Gain-scaled source, for the variance test.
    scaled: Raster,
    valid: Option<Vec<bool>>,
}

fn prepare(ulr: &Raster, src: &HarvestSource<'_>, params: &HarvestParams) -> Result<Prepared, SparseError> {
    let (w, h) = ulr.dims();
    let blurred = reupsample(src.image, params)?;
    let gain = fit_gain(&blurred, ulr, src.valid);
    let scaled = src.image.map(|v| gain * v);
    let target = match params.target {
        HrTarget::Residual => {
            Raster::new(w, h, src.image.data().iter().zip(blurred.data()).map(|(a, b)| gain * (a - b)).collect())
                .expect("shape")
        }
        HrTarget::MeanRemoved => scaled.clone(),
    };
    // the degradation spreads each invalid pixel over about 2 LR pixels
    let margin = 2 * params.upscale as usize + 2;
    let valid = src.valid.map(|v| erode(v, w, h, margin));
    Ok(Prepared { target, scaled, valid })
}

fn harvest(
    groups: &[(&Raster, &[HarvestSource<'_>])],
    params: &HarvestParams,
) -> Result<Vec<TrainingPair>, SparseError> {
    let p = params.patch_size;
    if p < MIN_PATCH {
        return Err(SparseError::PatchTooSmall(p));
    }
    let s = params.upscale as usize;
    let stride = params.stride.clamp(1, p);
    let mut prepared: Vec<Vec<Prepared>> = Vec::with_capacity(groups.len());
    // (group, source, x, y) of every qualifying window
    let mut sites: Vec<(usize, usize, usize, usize)> = Vec::new();
    for (g, (ulr, sources)) in groups.iter().enumerate() {
        let (w, h) = ulr.dims();
        let mut preps = Vec::with_capacity(sources.len());
        for src in sources.iter() {
            if src.image.dims() != ulr.dims() {
                return Err(SparseError::DimensionMismatch { expected: ulr.dims(), got: src.image.dims() });
            }
            if w < p || h < p || s == 0 || w % s != 0 || h % s != 0 {
                return Err(SparseError::ImageTooSmall { width: w, height: h, patch: p });
            }
            preps.push(prepare(ulr, src, params)?);
        }
        for (si, prep) in preps.iter().enumerate() {
            let grid = PatchGrid::new(p, p - stride, w, h)?;
            for (x, y) in grid.origins() {
                if let Some(valid) = &prep.valid {
                    let ok = (y..y + p).all(|yy| valid[yy * w + x..yy * w + x + p].iter().all(|&v| v));
                    if !ok {
                        continue;
                    }
                }
                if variance(&window(&prep.scaled, x, y, p)) >= params.var_thresh {
                    sites.push((g, si, x, y));
                }
            }
        }
        prepared.push(preps);
    }
    if sites.len() > params.max_pairs {
        sites.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
        sites.truncate(params.max_pairs);
        sites.sort_unstable();
    }
    let maps: Vec<FeatureMaps> = groups.iter().map(|(u, _)| FeatureMaps::new(u)).collect();
    Ok(sites
        .par_iter()
        .map(|&(g, si, x, y)| {
            let mut hr = window(&prepared[g][si].target, x, y, p);
            if params.target == HrTarget::MeanRemoved {
                let m = hr.iter().sum::<f64>() / hr.len() as f64;
                hr.iter_mut().for_each(|v| *v -= m);
            }
            TrainingPair { hr, feature: maps[g].patch(x, y, p) }
        })
        .collect())
}

fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}
