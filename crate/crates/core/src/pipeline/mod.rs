//! End-to-end commands: corpus indexing, retrieval, registration, generic
//! dictionary training, super-resolution with provenance, and evaluation
//! against the bicubic baseline.
//!
//! Configuration precedence, lowest first: built-in defaults, the config
//! file, `--set key=value` overrides, dedicated command-line flags.

mod config;
mod eval;
mod sr;
mod stages;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::image_core::{ImageIoError, MetricError};
use crate::interp::InterpError;
use crate::registration::RegistrationError;
use crate::retrieval::RetrievalError;
use crate::sift::SiftError;
use crate::sparse_sr::SparseError;

pub use config::{ConfigError, PathsConfig, PipelineConfig, RegistrationConfig, RetrievalConfig, SrConfig};
pub use eval::{cmd_eval, eval_images, read_eval_csv, EvalReport, EvalRow};
pub use sr::{cmd_sr, CandidateReport, CandidateStatus, DictionarySource, SrEngine, SrReport};
pub use stages::{
    cmd_index, cmd_interp, cmd_register, cmd_retrieve, cmd_train_dict, format_registration, IndexSummary,
    RetrievedImage, TrainSummary,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot list {path}: {source}")]
    ReadDir {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no usable images in {0}")]
    EmptyDirectory(PathBuf),
    #[error("no dictionary available: {0}")]
    NoDictionary(String),
    #[error(transparent)]
    Image(#[from] ImageIoError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Sift(#[from] SiftError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Registration(#[from] RegistrationError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    /// Process exit status: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Regular files of `dir`, sorted by name.
pub fn list_files(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let err = |source| PipelineError::ReadDir { path: dir.to_path_buf(), source };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(err)? {
        let path = entry.map_err(err)?.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}
