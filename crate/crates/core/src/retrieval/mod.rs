//! Correlated-image retrieval: a k-means visual vocabulary, descriptors
//! bundled around large-scale anchors, an inverted file keyed by anchor
//! word, and bundle-level scoring.
//!
//! On-disk layouts are described in `docs/FORMATS.md`.

mod bundle;
mod index;
mod verify;
mod vocabulary;

use thiserror::Error;

use crate::sift::SiftError;

pub use bundle::{
    bundle, bundle_indices, scale_percentile, sector, Bundle, BundleParams, BundledSet, Member, MAX_MEMBERS, SECTORS,
};
pub use index::{
    describe_image, index_corpus, query, query_sets, select_correlated, set_score, ImageEntry, InvertedIndex, Posting,
    RetrievalHit, SkippedImage, MIN_GEOMETRIC_WEIGHT,
};
pub use verify::similarity_inliers;
pub use vocabulary::{train_vocabulary, DescVec, Vocabulary, Word, KMEANS_MAX_ITERS};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("sample of {sample} descriptors is too small for k = {k}")]
    SampleTooSmall { sample: usize, k: usize },
    #[error("index built for k = {index} but vocabulary has k = {vocabulary}")]
    VocabularyMismatch { index: usize, vocabulary: usize },
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Sift(#[from] SiftError),
}
