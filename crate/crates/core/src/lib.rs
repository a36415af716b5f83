//! Retrieval-assisted super-resolution.
//!
//! A low-resolution query is bicubic-upscaled, described with SIFT features,
//! matched against a local corpus through a bundled visual-word inverted
//! index, the retrieved images are aligned to it by Fourier phase correlation
//! (with log-polar rotation/scale pre-alignment), and the output is
//! synthesised patch by patch from coupled sparse dictionaries.
//!
//! The modules mirror the processing stages:
//!
//! * [`image_core`] rasters, file I/O, PSNR/SSIM
//! * [`interp`] bicubic Lagrange resampling
//! * [`sift`] scale space, keypoints, descriptors
//! * [`retrieval`] vocabulary, bundled sets, inverted index, scoring
//! * [`registration`] phase correlation, matrix-multiply DFT, log-polar
//! * [`sparse_sr`] features, OMP, coupled dictionary training, synthesis
//! * [`pipeline`] configuration and the end-to-end commands

// `!(a > b)` is how parameters reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod image_core;
pub mod interp;
pub mod pipeline;
pub mod registration;
pub mod retrieval;
pub mod sift;
pub mod sparse_sr;

pub use image_core::{Psnr, QualityReport, Raster, RgbRaster};
pub use interp::{bicubic_resize, EdgeMode, ZoomSpec};
pub use registration::{RegistrationResult, UpsampleSpec};
pub use retrieval::{InvertedIndex, RetrievalHit, Vocabulary};
pub use sift::{SiftDescriptor, SiftParams};
pub use sparse_sr::{DictionaryPair, PatchGrid, SparseCode};
