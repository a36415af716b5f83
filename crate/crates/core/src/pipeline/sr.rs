use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{PipelineConfig, PipelineError};
use crate::image_core::{load_image, load_luma, merge_luma_chroma, save_image, split_luma_chroma, Raster, RgbRaster};
use crate::interp::{bicubic_resize_raw, resize_to, ZoomSpec};
use crate::registration::{register_candidate, Registered, RegistrationResult};
use crate::retrieval::{query, InvertedIndex, Vocabulary};
use crate::sparse_sr::{build_adaptive_pairs, super_resolve_ulr, train_dictionary, DictionaryPair, HarvestSource};

#[derive(Debug, Clone, PartialEq)]
pub enum CandidateStatus {
    Used,
    BelowScore,
    Unreadable(String),
    /// Registration failed or was flagged unreliable.
    Unregistered(String),
    ErrorTooHigh,
    TooLittleOverlap,
}

impl fmt::Display for CandidateStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CandidateStatus::Used => write!(f, "used"),
            CandidateStatus::BelowScore => write!(f, "below min_score"),
            CandidateStatus::Unreadable(e) => write!(f, "unreadable: {e}"),
            CandidateStatus::Unregistered(e) => write!(f, "not registered: {e}"),
            CandidateStatus::ErrorTooHigh => write!(f, "registration error above max_error"),
            CandidateStatus::TooLittleOverlap => write!(f, "overlap below min_valid"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateReport {
    pub image: u32,
    pub path: PathBuf,
    pub score: f64,
    pub registration: Option<RegistrationResult>,
    pub valid_fraction: f64,
    pub status: CandidateStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DictionarySource {
    /// Trained for this query on pairs from the used candidates.
    Adaptive { pairs: usize },
    /// The pre-trained dictionary; `reason` says why no adaptive one was used.
    Generic { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrReport {
    pub input_size: (usize, usize),
    pub output_size: (usize, usize),
    pub candidates: Vec<CandidateReport>,
    pub dictionary: DictionarySource,
}

impl SrReport {
    pub fn used(&self) -> impl Iterator<Item = &CandidateReport> {
        self.candidates.iter().filter(|c| c.status == CandidateStatus::Used)
    }

    pub fn dictionary_summary(&self) -> String {
        match &self.dictionary {
            DictionarySource::Adaptive { pairs } => format!("adaptive ({pairs} pairs)"),
            DictionarySource::Generic { reason } => format!("generic fallback ({reason})"),
        }
    }
}

impl fmt::Display for SrReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (iw, ih) = self.input_size;
        let (ow, oh) = self.output_size;
        writeln!(f, "input {iw}x{ih} -> output {ow}x{oh}")?;
        writeln!(f, "candidates: {}", self.candidates.len())?;
        for c in &self.candidates {
            write!(f, "  [{}] {} score {:.2}", c.image, c.path.display(), c.score)?;
            if let Some(r) = &c.registration {
                write!(
                    f,
                    " dy {:.3} dx {:.3} rot {:.3} deg scale {:.4} error {:.4} valid {:.2}",
                    r.dy,
                    r.dx,
                    r.rotation.to_degrees(),
                    r.scale,
                    r.error,
                    c.valid_fraction
                )?;
            }
            writeln!(f, " -> {}", c.status)?;
        }
        writeln!(f, "dictionary: {}", self.dictionary_summary())
    }
}

/// Loaded retrieval state and generic dictionary, reusable across queries.
pub struct SrEngine {
    cfg: PipelineConfig,
    corpus: Option<(Vocabulary, InvertedIndex)>,
    generic: Option<DictionaryPair>,
    missing: Vec<String>,
}

impl SrEngine {
    pub fn new(
        cfg: PipelineConfig,
        corpus: Option<(Vocabulary, InvertedIndex)>,
        generic: Option<DictionaryPair>,
    ) -> Self {
        Self { cfg, corpus, generic, missing: Vec::new() }
    }

    /// Loads what `cfg.paths` names. A missing index or dictionary is only
    /// a warning; queries then fall back or fail when they need it.
    pub fn load(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let mut missing = Vec::new();
        let corpus = match (Vocabulary::load(&cfg.paths.vocab), InvertedIndex::load(&cfg.paths.index)) {
            (Ok(v), Ok(i)) => Some((v, i)),
            (v, i) => {
                let e = v.err().or(i.err()).expect("one failed");
                log::warn!("no usable index, SR will use the generic dictionary: {e}");
                missing.push(format!("index unavailable: {e}"));
                None
            }
        };
        let generic = match DictionaryPair::load(&cfg.paths.dictionary) {
            Ok(d) => Some(d),
            Err(e) => {
                log::warn!("no generic dictionary at {}: {e}", cfg.paths.dictionary.display());
                missing.push(format!("generic dictionary unavailable: {e}"));
                None
            }
        };
        Ok(Self { cfg: cfg.clone(), corpus, generic, missing })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    /// Full pipeline on a luminance image.
    pub fn super_resolve_luma(&self, lr: &Raster) -> Result<(Raster, SrReport), PipelineError> {
        let cfg = &self.cfg;
        let s = cfg.upscale as usize;
        let (w, h) = lr.dims();
        let ulr = resize_to(lr, w * s, h * s, cfg.sr.edge)?;
        let mut candidates = Vec::new();
        let mut registered: Vec<Registered> = Vec::new();
        let mut reason = self.missing.first().cloned().unwrap_or_default();
        if let Some((vocab, index)) = &self.corpus {
            match query(&ulr, index, vocab, &cfg.sift, &cfg.retrieval.bundle, cfg.retrieval.top_n) {
                Ok(hits) => {
                    let outcomes: Vec<(CandidateReport, Option<Registered>)> = hits
                        .par_iter()
                        .map(|hit| {
                            let path = index.image(hit.image).map(|e| e.path.clone()).unwrap_or_default();
                            self.consider(&ulr, hit.image, path, hit.score)
                        })
                        .collect();
                    for (report, reg) in outcomes {
                        candidates.push(report);
                        registered.extend(reg);
                    }
                    reason = if hits.is_empty() {
                        "no retrieval hits".into()
                    } else {
                        "no candidate passed registration".into()
                    };
                }
                Err(e) => {
                    log::warn!("retrieval failed: {e}");
                    reason = format!("retrieval failed: {e}");
                }
            }
        }

        let mut adaptive = None;
        if !registered.is_empty() {
            let sources: Vec<HarvestSource> =
                registered.iter().map(|r| HarvestSource::masked(&r.image, &r.valid)).collect();
            let pairs = build_adaptive_pairs(&ulr, &sources, &cfg.harvest_params(false))?;
            let needed = 5 * cfg.sr.atoms;
            if pairs.len() < needed {
                reason = format!("{} adaptive pairs, {needed} needed", pairs.len());
            } else {
                match train_dictionary(&pairs, &cfg.train_params(), cfg.sr.patch_size, cfg.upscale, cfg.sr.target) {
                    Ok(d) => adaptive = Some((d, pairs.len())),
                    Err(e) => reason = format!("adaptive training failed: {e}"),
                }
            }
        }

        let (dict, source) = match (&adaptive, &self.generic) {
            (Some((d, pairs)), _) => (d, DictionarySource::Adaptive { pairs: *pairs }),
            (None, Some(g)) => {
                log::info!("using generic dictionary: {reason}");
                (g, DictionarySource::Generic { reason })
            }
            (None, None) => return Err(PipelineError::NoDictionary(reason)),
        };
        let out = super_resolve_ulr(&ulr, dict, &cfg.sr_params())?;
        let report = SrReport { input_size: (w, h), output_size: out.dims(), candidates, dictionary: source };
        Ok((out, report))
    }

    /// Luma goes through [`SrEngine::super_resolve_luma`], the two chroma
    /// planes are bicubic-upscaled.
    pub fn super_resolve_rgb(&self, lr: &RgbRaster) -> Result<(RgbRaster, SrReport), PipelineError> {
        let (y, cr, cb) = split_luma_chroma(lr);
        let (y_hr, report) = self.super_resolve_luma(&y)?;
        let (w, h) = y_hr.dims();
        let spec = ZoomSpec::to_size(y.width(), y.height(), w, h)?;
        let cr = bicubic_resize_raw(&cr, &spec, self.cfg.sr.edge)?;
        let cb = bicubic_resize_raw(&cb, &spec, self.cfg.sr.edge)?;
        Ok((merge_luma_chroma(&y_hr, &cr, &cb), report))
    }

    fn consider(&self, ulr: &Raster, image: u32, path: PathBuf, score: f64) -> (CandidateReport, Option<Registered>) {
        let cfg = &self.cfg;
        let mut report = CandidateReport {
            image,
            path,
            score,
            registration: None,
            valid_fraction: 0.0,
            status: CandidateStatus::BelowScore,
        };
        if score < cfg.retrieval.min_score {
            return (report, None);
        }
        let cand = match load_luma(&report.path) {
            Ok(c) => c,
            Err(e) => {
                report.status = CandidateStatus::Unreadable(e.to_string());
                return (report, None);
            }
        };
        let reg = match register_candidate(ulr, &cand, cfg.upsample(), cfg.registration.logpolar) {
            Ok(r) => r,
            Err(e) => {
                report.status = CandidateStatus::Unregistered(e.to_string());
                return (report, None);
            }
        };
        report.registration = Some(reg.result);
        report.valid_fraction = reg.valid_fraction();
        report.status = if !reg.result.reliable {
            CandidateStatus::Unregistered("unreliable estimate".into())
        } else if reg.result.error > cfg.registration.max_error {
            CandidateStatus::ErrorTooHigh
        } else if report.valid_fraction < cfg.registration.min_valid {
            CandidateStatus::TooLittleOverlap
        } else {
            CandidateStatus::Used
        };
        let keep = report.status == CandidateStatus::Used;
        (report, keep.then_some(reg))
    }
}

/// Super-resolves the image at `input` and writes it to `output`.
pub fn cmd_sr(input: &Path, output: &Path, cfg: &PipelineConfig) -> Result<SrReport, PipelineError> {
    let lr = load_image(input)?;
    let engine = SrEngine::load(cfg)?;
    let (hr, report) = engine.super_resolve_rgb(&lr)?;
    save_image(output, &hr)?;
    Ok(report)
}
