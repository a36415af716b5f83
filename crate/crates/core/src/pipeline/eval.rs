use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use super::sr::{DictionarySource, SrEngine};
use super::{list_files, PipelineConfig, PipelineError};
use crate::image_core::{load_luma, quality, Psnr, Raster};
use crate::interp::resize_to;
use crate::sparse_sr::degrade;

/// Bicubic baseline against the full pipeline on one image.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub image: String,
    pub basic_psnr: Psnr,
    pub basic_ssim: f64,
    pub proposed_psnr: Psnr,
    pub proposed_ssim: f64,
    /// Whether the proposed output used an adaptive dictionary. Not part of
    /// the CSV.
    pub adaptive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

const CSV_HEADER: [&str; 5] = ["image", "basic_psnr", "basic_ssim", "proposed_psnr", "proposed_ssim"];

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

impl EvalReport {
    /// Column means: basic PSNR, basic SSIM, proposed PSNR, proposed SSIM.
    /// Identical images count as infinite PSNR.
    pub fn means(&self) -> [f64; 4] {
        let r = &self.rows;
        [
            mean(r.iter().map(|r| r.basic_psnr.value())),
            mean(r.iter().map(|r| r.basic_ssim)),
            mean(r.iter().map(|r| r.proposed_psnr.value())),
            mean(r.iter().map(|r| r.proposed_ssim)),
        ]
    }

    /// Aligned table with a trailing mean row.
    pub fn to_table(&self) -> String {
        let name_w = self.rows.iter().map(|r| r.image.len()).chain([5]).max().unwrap_or(5);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<name_w$}  {:>10}  {:>10}  {:>13}  {:>13}",
            "IMAGE", "BASIC PSNR", "BASIC SSIM", "PROPOSED PSNR", "PROPOSED SSIM"
        );
        let line = |out: &mut String, name: &str, bp: Psnr, bs: f64, pp: Psnr, ps: f64| {
            let _ = writeln!(out, "{name:<name_w$}  {bp:>10.2}  {bs:>10.5}  {pp:>13.2}  {ps:>13.5}");
        };
        for r in &self.rows {
            line(&mut out, &r.image, r.basic_psnr, r.basic_ssim, r.proposed_psnr, r.proposed_ssim);
        }
        let [bp, bs, pp, ps] = self.means();
        let as_psnr = |v: f64| if v.is_infinite() { Psnr::Identical } else { Psnr::Db(v) };
        line(&mut out, "MEAN", as_psnr(bp), bs, as_psnr(pp), ps);
        out
    }

    /// One record per row at full precision; PSNR of identical images is
    /// written as `inf`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), PipelineError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(CSV_HEADER)?;
        for r in &self.rows {
            wr.write_record([
                r.image.clone(),
                r.basic_psnr.to_string(),
                r.basic_ssim.to_string(),
                r.proposed_psnr.to_string(),
                r.proposed_ssim.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn csv_err(msg: String) -> PipelineError {
    PipelineError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, msg))
}

fn parse_psnr(s: &str) -> Result<Psnr, PipelineError> {
    if s == "inf" {
        return Ok(Psnr::Identical);
    }
    s.parse().map(Psnr::Db).map_err(|_| csv_err(format!("bad PSNR `{s}`")))
}

fn parse_f64(s: &str) -> Result<f64, PipelineError> {
    s.parse().map_err(|_| csv_err(format!("bad number `{s}`")))
}

/// Reads rows written by [`EvalReport::write_csv`]; `adaptive` is not
/// stored and comes back false.
pub fn read_eval_csv<R: Read>(r: R) -> Result<Vec<EvalRow>, PipelineError> {
    let mut rd = csv::Reader::from_reader(r);
    if rd.headers()?.iter().ne(CSV_HEADER) {
        return Err(csv_err("unexpected CSV header".into()));
    }
    rd.records()
        .map(|rec| {
            let rec = rec?;
            if rec.len() != CSV_HEADER.len() {
                return Err(csv_err(format!("expected {} fields", CSV_HEADER.len())));
            }
            Ok(EvalRow {
                image: rec[0].to_string(),
                basic_psnr: parse_psnr(&rec[1])?,
                basic_ssim: parse_f64(&rec[2])?,
                proposed_psnr: parse_psnr(&rec[3])?,
                proposed_ssim: parse_f64(&rec[4])?,
                adaptive: false,
            })
        })
        .collect()
}

/// Evaluates named ground-truth images: each is cropped to a multiple of
/// the upscale factor, bicubic-downscaled to the LR input, then restored by
/// bicubic upscaling (basic) and by the engine (proposed). Rows are
/// computed in parallel and kept in input order.
pub fn eval_images(images: &[(String, Raster)], engine: &SrEngine) -> Result<EvalReport, PipelineError> {
    let cfg = engine.config();
    let s = cfg.upscale as usize;
    let rows = images
        .par_iter()
        .map(|(name, img)| {
            let (w, h) = img.dims();
            let hr = img.crop(0, 0, w - w % s, h - h % s);
            let lr = degrade(&hr, cfg.upscale, cfg.sr.edge)?;
            let basic = resize_to(&lr, hr.width(), hr.height(), cfg.sr.edge)?;
            let (proposed, report) = engine.super_resolve_luma(&lr)?;
            let b = quality(&hr, &basic)?;
            let p = quality(&hr, &proposed)?;
            log::info!("{name}: {}", report.dictionary_summary());
            Ok(EvalRow {
                image: name.clone(),
                basic_psnr: b.psnr,
                basic_ssim: b.ssim,
                proposed_psnr: p.psnr,
                proposed_ssim: p.ssim,
                adaptive: matches!(report.dictionary, DictionarySource::Adaptive { .. }),
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(EvalReport { rows })
}

/// Luminance evaluation of every readable image in `dir`.
pub fn cmd_eval(dir: &Path, cfg: &PipelineConfig) -> Result<EvalReport, PipelineError> {
    let engine = SrEngine::load(cfg)?;
    let mut images = Vec::new();
    for p in list_files(dir)? {
        match load_luma(&p) {
            Ok(img) => {
                let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                images.push((name, img));
            }
            Err(e) => log::warn!("skipping {}: {e}", p.display()),
        }
    }
    if images.is_empty() {
        return Err(PipelineError::EmptyDirectory(dir.to_path_buf()));
    }
    eval_images(&images, &engine)
}
