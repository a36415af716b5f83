//! Raster containers, image file I/O and the PSNR/SSIM quality metrics.
//!
//! All analysis runs on the Rec.601 luma plane; colour inputs are split into
//! luma and two colour-difference planes by [`split_luma_chroma`].

mod io;
mod quality;
mod raster;

pub use io::{load_image, load_luma, save_image, save_luma, ImageIoError};
pub use quality::{
    mse, psnr, quality, ssim, ssim_kernel, MetricError, Psnr, QualityReport, PEAK, SSIM_K1, SSIM_K2, SSIM_SIGMA,
    SSIM_WINDOW,
};
pub use raster::{merge_luma_chroma, split_luma_chroma, to_luma, Raster, RasterError, RgbRaster, LUMA_WEIGHTS};
