//! Sparse-representation super-resolution with coupled dictionaries.
//!
//! An HR patch target and the derivative features of the matching ULR patch
//! share one sparse code over a pair of dictionaries `(Dh, Dl)`. At inference
//! the code is fitted to the ULR features with OMP and the HR patch is
//! synthesised from `Dh`. Dictionaries are trained jointly (K-SVD style) on a
//! generic image set, or per query on registered web candidates.

mod dictionary;
mod features;
mod omp;
mod reconstruct;
mod train;

use thiserror::Error;

pub use dictionary::{DictionaryPair, HrTarget, Mat, DICTIONARY_MAGIC, DICTIONARY_VERSION};
pub use features::{extract_lr_features, FeatureMaps, FEATURE_OP_ID, MIN_PATCH};
pub use omp::{sparse_code, Coder, SparseCode};
pub use reconstruct::{
    build_adaptive_pairs, collect_training_pairs, degrade, super_resolve, super_resolve_ulr, synthesize_hr_patch,
    HarvestParams, HarvestSource, PatchGrid, SrParams,
};
pub use train::{train_dictionary, train_dictionary_traced, TrainParams, TrainingPair};

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("patch size {0} is smaller than the {MIN_PATCH}-tap filter support")]
    PatchTooSmall(usize),
    #[error("feature has {got} entries, dictionary expects {expected}")]
    FeatureDim { expected: usize, got: usize },
    #[error("{pairs} training pairs given, at least {needed} needed")]
    InsufficientPairs { pairs: usize, needed: usize },
    #[error("training pairs are degenerate (all identical or all zero)")]
    DegeneratePairs,
    #[error("dictionary must be over-complete: K = {k} <= n_l = {n_l}")]
    NotOvercomplete { k: usize, n_l: usize },
    #[error("dictionary has no atoms")]
    EmptyDictionary,
    #[error("inconsistent dictionary shapes: {0}")]
    Shape(String),
    #[error("dictionary is for x{dictionary}, requested x{requested}")]
    ScaleMismatch { dictionary: u32, requested: u32 },
    #[error("overlap {overlap} must be smaller than patch size {patch}")]
    InvalidGrid { patch: usize, overlap: usize },
    #[error("image {width}x{height} is smaller than one {patch}x{patch} patch")]
    ImageTooSmall { width: usize, height: usize, patch: usize },
    #[error("candidate is {got:?}, ULR is {expected:?}")]
    DimensionMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("resampling failed: {0}")]
    Interp(String),
    #[error("malformed dictionary file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
