//! Alignment of retrieved images to the upscaled query: phase correlation
//! with matrix-multiply DFT refinement, log-polar rotation/scale
//! pre-alignment, and Fourier-domain subpixel shifting.

mod logpolar;
mod phase;
mod spectrum;
mod warp;

use thiserror::Error;

pub use logpolar::{filtered_magnitude, hann_taper, log_polar, logpolar_prealign, Prealignment};
pub use phase::{
    fourier_shift, matrix_dft_patch, phase_correlate, zero_shift_error, RegistrationResult, UpsampleSpec,
    MIN_REGISTRATION_SIZE, REFINE_WINDOW,
};
pub use spectrum::{fft2, fftshift, signed_freq, Spectrum};
pub use warp::{register_all, register_candidate, register_to_query, unwarp_similarity, Registered};

#[derive(Debug, Error, PartialEq)]
pub enum RegistrationError {
    #[error("dimension mismatch: reference {reference:?}, moving {moving:?}")]
    DimensionMismatch { reference: (usize, usize), moving: (usize, usize) },
    #[error("{width}x{height} is below the 16x16 registration minimum")]
    TooSmall { width: usize, height: usize },
    #[error("upsampling factor must be at least 1")]
    InvalidUpsample,
    #[error("could not resize candidate: {0}")]
    Resize(String),
}
