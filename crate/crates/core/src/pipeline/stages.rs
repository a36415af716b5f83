use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{list_files, PipelineConfig, PipelineError};
use crate::image_core::{load_image, load_luma, save_image, Raster, RgbRaster};
use crate::interp::{resize_to, zoom, EdgeMode};
use crate::registration::{register_candidate, Registered, RegistrationResult};
use crate::retrieval::{bundle, query, DescVec, ImageEntry, InvertedIndex, RetrievalHit, SkippedImage, Vocabulary};
use crate::sift::{extract, SiftDescriptor};
use crate::sparse_sr::{collect_training_pairs, train_dictionary, DictionaryPair};

#[derive(Debug, Clone, PartialEq)]
pub struct IndexSummary {
    pub images: usize,
    pub descriptors: usize,
    pub skipped: Vec<SkippedImage>,
}

/// Describes every file of `corpus` once, trains the vocabulary on a seeded
/// descriptor sample, files the bundled sets of each image and writes the
/// vocabulary and index to `paths.vocab` / `paths.index`. Unreadable files
/// are listed in the index manifest.
pub fn cmd_index(corpus: &Path, cfg: &PipelineConfig) -> Result<IndexSummary, PipelineError> {
    cfg.validate()?;
    let files = list_files(corpus)?;
    if files.is_empty() {
        return Err(PipelineError::EmptyDirectory(corpus.to_path_buf()));
    }
    let described: Vec<Result<(Raster, Vec<SiftDescriptor>), String>> = files
        .par_iter()
        .map(|p| {
            let img = load_luma(p).map_err(|e| e.to_string())?;
            let descs = extract(&img, &cfg.sift).map_err(|e| e.to_string())?;
            Ok((img, descs))
        })
        .collect();
    let all: Vec<DescVec> = described.iter().flatten().flat_map(|(_, d)| d.iter().map(|d| d.v)).collect();
    if all.is_empty() {
        return Err(PipelineError::EmptyDirectory(corpus.to_path_buf()));
    }
    let n = cfg.retrieval.sample.min(all.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.retrieval.seed);
    let mut picks = sample(&mut rng, all.len(), n).into_vec();
    picks.sort_unstable();
    let training: Vec<DescVec> = picks.iter().map(|&i| all[i]).collect();
    let vocab = Vocabulary::train(&training, cfg.retrieval.k, cfg.retrieval.seed)?;

    let mut index = InvertedIndex::new(vocab.k());
    let mut descriptors = 0;
    for (path, d) in files.iter().zip(described) {
        match d {
            Ok((img, descs)) => {
                let words = vocab.quantize_all(&descs);
                let sets = bundle(&descs, &words, &cfg.retrieval.bundle);
                descriptors += descs.len();
                let entry = ImageEntry {
                    path: path.clone(),
                    width: img.width() as u32,
                    height: img.height() as u32,
                    descriptors: descs.len() as u32,
                    sets: 0,
                };
                index.add_image(entry, &sets)?;
            }
            Err(reason) => {
                log::warn!("skipping {}: {reason}", path.display());
                index.record_skipped(path.clone(), reason);
            }
        }
    }
    vocab.save(&cfg.paths.vocab)?;
    index.save(&cfg.paths.index)?;
    Ok(IndexSummary { images: index.images().len(), descriptors, skipped: index.skipped().to_vec() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievedImage {
    pub hit: RetrievalHit,
    pub path: PathBuf,
    /// Passes `retrieval.min_score`.
    pub correlated: bool,
}

/// Queries the index with the bicubic-upscaled `lr`, as the SR command does.
pub fn cmd_retrieve(lr: &Path, cfg: &PipelineConfig) -> Result<Vec<RetrievedImage>, PipelineError> {
    cfg.validate()?;
    let vocab = Vocabulary::load(&cfg.paths.vocab)?;
    let index = InvertedIndex::load(&cfg.paths.index)?;
    let img = load_luma(lr)?;
    let s = cfg.upscale as usize;
    let ulr = resize_to(&img, img.width() * s, img.height() * s, cfg.sr.edge)?;
    let hits = query(&ulr, &index, &vocab, &cfg.sift, &cfg.retrieval.bundle, cfg.retrieval.top_n)?;
    Ok(hits
        .into_iter()
        .map(|hit| RetrievedImage {
            path: index.image(hit.image).map(|e| e.path.clone()).unwrap_or_default(),
            correlated: hit.score >= cfg.retrieval.min_score,
            hit,
        })
        .collect())
}

/// Registers each candidate to `reference` (used as is, no upscaling).
pub fn cmd_register(
    reference: &Path,
    candidates: &[PathBuf],
    cfg: &PipelineConfig,
) -> Result<Vec<Registered>, PipelineError> {
    cfg.validate()?;
    let reference = load_luma(reference)?;
    candidates
        .par_iter()
        .map(|c| {
            let moving = load_luma(c)?;
            Ok(register_candidate(&reference, &moving, cfg.upsample(), cfg.registration.logpolar)?)
        })
        .collect()
}

/// `path dy dx rotation_deg scale error`, six decimals.
pub fn format_registration(path: &Path, r: &RegistrationResult) -> String {
    format!("{} {:.6} {:.6} {:.6} {:.6} {:.6}", path.display(), r.dy, r.dx, r.rotation.to_degrees(), r.scale, r.error)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub images: usize,
    pub pairs: usize,
    pub atoms: usize,
}

/// Trains the generic dictionary on every readable image of `dir` and
/// writes it to `paths.dictionary`.
pub fn cmd_train_dict(dir: &Path, cfg: &PipelineConfig) -> Result<(DictionaryPair, TrainSummary), PipelineError> {
    cfg.validate()?;
    let images: Vec<Raster> = list_files(dir)?
        .iter()
        .filter_map(|p| match load_luma(p) {
            Ok(img) => Some(img),
            Err(e) => {
                log::warn!("skipping {}: {e}", p.display());
                None
            }
        })
        .collect();
    if images.is_empty() {
        return Err(PipelineError::EmptyDirectory(dir.to_path_buf()));
    }
    let pairs = collect_training_pairs(&images, &cfg.harvest_params(true))?;
    let dict = train_dictionary(&pairs, &cfg.train_params(), cfg.sr.patch_size, cfg.upscale, cfg.sr.target)?;
    dict.save(&cfg.paths.dictionary)?;
    let summary = TrainSummary { images: images.len(), pairs: pairs.len(), atoms: dict.k() };
    Ok((dict, summary))
}

/// Bicubic zoom of every channel by `factor`.
pub fn cmd_interp(input: &Path, output: &Path, factor: f64, edge: EdgeMode) -> Result<RgbRaster, PipelineError> {
    let img = load_image(input)?;
    let planes: Vec<Raster> = (0..3).map(|c| zoom(&img.channel(c), factor, edge)).collect::<Result<_, _>>()?;
    let out = RgbRaster::from_planes(&planes[0], &planes[1], &planes[2]);
    save_image(output, &out)?;
    Ok(out)
}
