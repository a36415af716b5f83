use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::interp::EdgeMode;
use crate::registration::UpsampleSpec;
use crate::retrieval::BundleParams;
use crate::sift::SiftParams;
use crate::sparse_sr::{HarvestParams, HrTarget, SrParams, TrainParams, MIN_PATCH};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("`{key}` {reason}")]
    OutOfRange { key: &'static str, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalConfig {
    /// Vocabulary size.
    pub k: usize,
    pub top_n: usize,
    /// Bundled-score threshold for a hit to count as correlated.
    pub min_score: f64,
    /// Descriptors sampled for vocabulary training.
    pub sample: usize,
    pub seed: u64,
    pub bundle: BundleParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationConfig {
    pub kappa: u32,
    pub logpolar: bool,
    /// Candidates registering worse than this are dropped.
    pub max_error: f64,
    /// Minimum fraction of the query frame a candidate must cover.
    pub min_valid: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrConfig {
    pub patch_size: usize,
    pub overlap: usize,
    pub sparsity: usize,
    pub eps: f64,
    pub atoms: usize,
    pub iterations: usize,
    pub seed: u64,
    pub target: HrTarget,
    pub edge: EdgeMode,
    /// Harvest stride over registered candidates.
    pub stride: usize,
    pub var_thresh: f64,
    /// Cap on adaptive pairs.
    pub max_pairs: usize,
    /// Cap on generic training pairs.
    pub train_pairs: usize,
    pub train_stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathsConfig {
    pub corpus: PathBuf,
    pub vocab: PathBuf,
    pub index: PathBuf,
    pub dictionary: PathBuf,
    /// Training images for the generic dictionary.
    pub train: PathBuf,
}

/// Every tunable of the pipeline. Text form is one `section.key = value`
/// per line, `#` starts a comment; see [`PipelineConfig::to_text`] for the
/// full key list with defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub upscale: u32,
    pub sift: SiftParams,
    pub retrieval: RetrievalConfig,
    pub registration: RegistrationConfig,
    pub sr: SrConfig,
    pub paths: PathsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            upscale: 2,
            // small LR inputs yield too few keypoints at native resolution
            sift: SiftParams { upsample_input: true, contrast_threshold: 0.01, ..SiftParams::default() },
            retrieval: RetrievalConfig {
                k: 256,
                top_n: 5,
                min_score: 20.0,
                sample: 50_000,
                seed: 0,
                bundle: BundleParams::default(),
            },
            registration: RegistrationConfig { kappa: 20, logpolar: true, max_error: 0.7, min_valid: 0.25 },
            sr: SrConfig {
                patch_size: 10,
                overlap: 5,
                sparsity: 3,
                eps: 0.1,
                atoms: 512,
                iterations: 10,
                seed: 0,
                target: HrTarget::Residual,
                edge: EdgeMode::Clamp,
                stride: 2,
                var_thresh: 10.0,
                max_pairs: 6000,
                train_pairs: 12_000,
                train_stride: 4,
            },
            paths: PathsConfig {
                corpus: "corpus".into(),
                vocab: "websr.vocab".into(),
                index: "websr.index".into(),
                dictionary: "websr.dict".into(),
                train: "train".into(),
            },
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn edge_name(e: EdgeMode) -> &'static str {
    match e {
        EdgeMode::Zero => "zero",
        EdgeMode::Clamp => "clamp",
    }
}

fn target_name(t: HrTarget) -> &'static str {
    match t {
        HrTarget::Residual => "residual",
        HrTarget::MeanRemoved => "mean",
    }
}

fn range(ok: bool, key: &'static str, reason: impl Into<String>) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange { key, reason: reason.into() })
    }
}

impl PipelineConfig {
    /// Defaults overridden by the lines of `text`. Not validated.
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { line: i + 1, text: raw.to_string() });
            };
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_text(&text)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let r = &mut self.retrieval;
        let g = &mut self.registration;
        let s = &mut self.sr;
        let p = &mut self.paths;
        match key {
            "upscale" => self.upscale = parse(key, value)?,
            "sift.scales_per_octave" => self.sift.scales_per_octave = parse(key, value)?,
            "sift.sigma0" => self.sift.sigma0 = parse(key, value)?,
            "sift.contrast_threshold" => self.sift.contrast_threshold = parse(key, value)?,
            "sift.edge_ratio" => self.sift.edge_ratio = parse(key, value)?,
            "sift.upsample_input" => self.sift.upsample_input = parse(key, value)?,
            "retrieval.k" => r.k = parse(key, value)?,
            "retrieval.top_n" => r.top_n = parse(key, value)?,
            "retrieval.min_score" => r.min_score = parse(key, value)?,
            "retrieval.sample" => r.sample = parse(key, value)?,
            "retrieval.seed" => r.seed = parse(key, value)?,
            "retrieval.scale_thresh" => {
                r.bundle.scale_thresh = if value == "auto" { None } else { Some(parse(key, value)?) }
            }
            "retrieval.radius_mult" => r.bundle.radius_mult = parse(key, value)?,
            "retrieval.max_members" => r.bundle.max_members = parse(key, value)?,
            "registration.kappa" => g.kappa = parse(key, value)?,
            "registration.logpolar" => g.logpolar = parse(key, value)?,
            "registration.max_error" => g.max_error = parse(key, value)?,
            "registration.min_valid" => g.min_valid = parse(key, value)?,
            "sr.patch_size" => s.patch_size = parse(key, value)?,
            "sr.overlap" => s.overlap = parse(key, value)?,
            "sr.sparsity" => s.sparsity = parse(key, value)?,
            "sr.eps" => s.eps = parse(key, value)?,
            "sr.atoms" => s.atoms = parse(key, value)?,
            "sr.iterations" => s.iterations = parse(key, value)?,
            "sr.seed" => s.seed = parse(key, value)?,
            "sr.target" => s.target = parse(key, value)?,
            "sr.edge" => s.edge = parse(key, value)?,
            "sr.stride" => s.stride = parse(key, value)?,
            "sr.var_thresh" => s.var_thresh = parse(key, value)?,
            "sr.max_pairs" => s.max_pairs = parse(key, value)?,
            "sr.train_pairs" => s.train_pairs = parse(key, value)?,
            "sr.train_stride" => s.train_stride = parse(key, value)?,
            "paths.corpus" => p.corpus = value.into(),
            "paths.vocab" => p.vocab = value.into(),
            "paths.index" => p.index = value.into(),
            "paths.dictionary" => p.dictionary = value.into(),
            "paths.train" => p.train = value.into(),
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Every key with its current value, in a form [`PipelineConfig::from_text`]
    /// reads back.
    pub fn to_text(&self) -> String {
        let r = &self.retrieval;
        let g = &self.registration;
        let s = &self.sr;
        let p = &self.paths;
        let scale_thresh = r.bundle.scale_thresh.map_or("auto".to_string(), |v| v.to_string());
        let entries: Vec<(&str, String)> = vec![
            ("upscale", self.upscale.to_string()),
            ("sift.scales_per_octave", self.sift.scales_per_octave.to_string()),
            ("sift.sigma0", self.sift.sigma0.to_string()),
            ("sift.contrast_threshold", self.sift.contrast_threshold.to_string()),
            ("sift.edge_ratio", self.sift.edge_ratio.to_string()),
            ("sift.upsample_input", self.sift.upsample_input.to_string()),
            ("retrieval.k", r.k.to_string()),
            ("retrieval.top_n", r.top_n.to_string()),
            ("retrieval.min_score", r.min_score.to_string()),
            ("retrieval.sample", r.sample.to_string()),
            ("retrieval.seed", r.seed.to_string()),
            ("retrieval.scale_thresh", scale_thresh),
            ("retrieval.radius_mult", r.bundle.radius_mult.to_string()),
            ("retrieval.max_members", r.bundle.max_members.to_string()),
            ("registration.kappa", g.kappa.to_string()),
            ("registration.logpolar", g.logpolar.to_string()),
            ("registration.max_error", g.max_error.to_string()),
            ("registration.min_valid", g.min_valid.to_string()),
            ("sr.patch_size", s.patch_size.to_string()),
            ("sr.overlap", s.overlap.to_string()),
            ("sr.sparsity", s.sparsity.to_string()),
            ("sr.eps", s.eps.to_string()),
            ("sr.atoms", s.atoms.to_string()),
            ("sr.iterations", s.iterations.to_string()),
            ("sr.seed", s.seed.to_string()),
            ("sr.target", target_name(s.target).into()),
            ("sr.edge", edge_name(s.edge).into()),
            ("sr.stride", s.stride.to_string()),
            ("sr.var_thresh", s.var_thresh.to_string()),
            ("sr.max_pairs", s.max_pairs.to_string()),
            ("sr.train_pairs", s.train_pairs.to_string()),
            ("sr.train_stride", s.train_stride.to_string()),
            ("paths.corpus", p.corpus.display().to_string()),
            ("paths.vocab", p.vocab.display().to_string()),
            ("paths.index", p.index.display().to_string()),
            ("paths.dictionary", p.dictionary.display().to_string()),
            ("paths.train", p.train.display().to_string()),
        ];
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let r = &self.retrieval;
        let g = &self.registration;
        let s = &self.sr;
        range((1..=8).contains(&self.upscale), "upscale", "must be in 1..=8")?;
        range(self.sift.scales_per_octave >= 1, "sift.scales_per_octave", "must be >= 1")?;
        range(self.sift.sigma0 > 0.0, "sift.sigma0", "must be > 0")?;
        range(self.sift.contrast_threshold >= 0.0, "sift.contrast_threshold", "must be >= 0")?;
        range(self.sift.edge_ratio > 1.0, "sift.edge_ratio", "must be > 1")?;
        range(r.k >= 1, "retrieval.k", "must be >= 1")?;
        range(r.top_n >= 1, "retrieval.top_n", "must be >= 1")?;
        range(r.min_score >= 0.0, "retrieval.min_score", "must be >= 0")?;
        range(r.sample >= r.k, "retrieval.sample", "must be >= retrieval.k")?;
        range(r.bundle.scale_thresh.is_none_or(|t| t > 0.0), "retrieval.scale_thresh", "must be > 0 or auto")?;
        range(r.bundle.radius_mult > 0.0, "retrieval.radius_mult", "must be > 0")?;
        range(g.kappa >= 1, "registration.kappa", "must be >= 1")?;
        range(g.max_error > 0.0 && g.max_error <= 1.0, "registration.max_error", "must be in (0, 1]")?;
        range((0.0..=1.0).contains(&g.min_valid), "registration.min_valid", "must be in [0, 1]")?;
        range(s.patch_size >= MIN_PATCH, "sr.patch_size", format!("must be >= {MIN_PATCH}"))?;
        range(s.overlap < s.patch_size, "sr.overlap", "must be < sr.patch_size")?;
        range(s.sparsity >= 1, "sr.sparsity", "must be >= 1")?;
        range(s.eps >= 0.0 && s.eps < 1.0, "sr.eps", "must be in [0, 1)")?;
        let n_l = 4 * s.patch_size * s.patch_size;
        range(s.atoms > n_l, "sr.atoms", format!("must exceed the feature dimension {n_l}"))?;
        range(s.sparsity <= s.atoms, "sr.sparsity", "must be <= sr.atoms")?;
        range(s.stride >= 1, "sr.stride", "must be >= 1")?;
        range(s.train_stride >= 1, "sr.train_stride", "must be >= 1")?;
        range(s.var_thresh >= 0.0, "sr.var_thresh", "must be >= 0")?;
        range(s.train_pairs >= 5 * s.atoms, "sr.train_pairs", "must be >= 5 * sr.atoms")?;
        Ok(())
    }

    pub fn upsample(&self) -> UpsampleSpec {
        UpsampleSpec::new(self.registration.kappa.max(1)).expect("kappa >= 1")
    }

    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            atoms: self.sr.atoms,
            sparsity: self.sr.sparsity,
            iterations: self.sr.iterations,
            seed: self.sr.seed,
        }
    }

    pub fn sr_params(&self) -> SrParams {
        SrParams {
            upscale: self.upscale,
            overlap: self.sr.overlap,
            sparsity: self.sr.sparsity,
            eps: self.sr.eps,
            edge: self.sr.edge,
        }
    }

    /// Harvest settings for adaptive pairs; generic training swaps in the
    /// `train_*` values.
    pub fn harvest_params(&self, generic: bool) -> HarvestParams {
        HarvestParams {
            patch_size: self.sr.patch_size,
            upscale: self.upscale,
            edge: self.sr.edge,
            stride: if generic { self.sr.train_stride } else { self.sr.stride },
            var_thresh: self.sr.var_thresh,
            max_pairs: if generic { self.sr.train_pairs } else { self.sr.max_pairs },
            seed: self.sr.seed,
            target: self.sr.target,
        }
    }
}
