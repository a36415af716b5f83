//! PNG and binary PGM/PPM reading and writing.
//!
//! Decoding goes through the `image` crate. PNM output is written directly so
//! that the header is always `P5`/`P6` with maxval 255.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageFormat, ImageReader};
use thiserror::Error;

use super::raster::{Raster, RgbRaster};

#[derive(Debug, Error)]
pub enum ImageIoError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported image format: {path}")]
    Unsupported { path: PathBuf },
    #[error("corrupt image stream in {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("cannot write {path}: {reason}")]
    Unwritable { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OutFormat {
    Png,
    Pnm,
}

fn out_format(path: &Path) -> Result<OutFormat, ImageIoError> {
    let ext = path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("png") => Ok(OutFormat::Png),
        Some("pgm" | "ppm" | "pnm") => Ok(OutFormat::Pnm),
        _ => Err(ImageIoError::Unsupported { path: path.to_path_buf() }),
    }
}

/// Loads a PNG or PGM/PPM file. Grayscale inputs are replicated into three
/// channels, 16-bit samples are rescaled to `[0, 255]`, alpha is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<RgbRaster, ImageIoError> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .and_then(|r| r.with_guessed_format())
        .map_err(|source| ImageIoError::Unreadable { path: path.to_path_buf(), source })?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Pnm) => {}
        _ => return Err(ImageIoError::Unsupported { path: path.to_path_buf() }),
    }
    let decoded = reader.decode().map_err(|e| match e {
        image::ImageError::Unsupported(_) => ImageIoError::Unsupported { path: path.to_path_buf() },
        other => ImageIoError::Corrupt { path: path.to_path_buf(), reason: other.to_string() },
    })?;
    Ok(to_rgb_raster(&decoded))
}

fn to_rgb_raster(img: &DynamicImage) -> RgbRaster {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let sixteen = matches!(
        img,
        DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
            | DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_)
    );
    let data: Vec<f64> = if sixteen {
        img.to_rgb16().into_raw().into_iter().map(|v| v as f64 / 257.0).collect()
    } else {
        img.to_rgb8().into_raw().into_iter().map(f64::from).collect()
    };
    RgbRaster::new(w, h, data).expect("decoder produced a consistent buffer")
}

/// Loads any supported file and reduces it to luma.
pub fn load_luma(path: impl AsRef<Path>) -> Result<Raster, ImageIoError> {
    load_image(path).map(|img| super::to_luma(&img))
}

fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn write_pnm(path: &Path, magic: &str, w: usize, h: usize, bytes: &[u8]) -> Result<(), ImageIoError> {
    let unwritable = |e: std::io::Error| ImageIoError::Unwritable { path: path.to_path_buf(), reason: e.to_string() };
    let mut out = BufWriter::new(File::create(path).map_err(unwritable)?);
    write!(out, "{magic}\n{w} {h}\n255\n").map_err(unwritable)?;
    out.write_all(bytes).map_err(unwritable)?;
    out.flush().map_err(unwritable)
}

fn write_png(
    path: &Path,
    w: usize,
    h: usize,
    bytes: &[u8],
    color: image::ExtendedColorType,
) -> Result<(), ImageIoError> {
    image::save_buffer_with_format(path, bytes, w as u32, h as u32, color, ImageFormat::Png)
        .map_err(|e| ImageIoError::Unwritable { path: path.to_path_buf(), reason: e.to_string() })
}

/// Writes an RGB raster as PNG or PPM (by extension). Samples are rounded to
/// 8 bits.
pub fn save_image(path: impl AsRef<Path>, img: &RgbRaster) -> Result<(), ImageIoError> {
    let path = path.as_ref();
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    match out_format(path)? {
        OutFormat::Png => write_png(path, img.width(), img.height(), &bytes, image::ExtendedColorType::Rgb8),
        OutFormat::Pnm => write_pnm(path, "P6", img.width(), img.height(), &bytes),
    }
}

/// Writes a single-channel raster as 8-bit grayscale PNG or PGM.
pub fn save_luma(path: impl AsRef<Path>, img: &Raster) -> Result<(), ImageIoError> {
    let path = path.as_ref();
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    match out_format(path)? {
        OutFormat::Png => write_png(path, img.width(), img.height(), &bytes, image::ExtendedColorType::L8),
        OutFormat::Pnm => write_pnm(path, "P5", img.width(), img.height(), &bytes),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pgm_promotes_to_equal_channels() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.pgm");
        std::fs::write(&p, b"P5\n2 2\n255\n\x00\xff\x80\x40").unwrap();
        let img = load_image(&p).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert!(img.is_gray());
        assert_eq!(img.channel(0).data(), &[0.0, 255.0, 128.0, 64.0]);
    }

    #[test]
    fn png_single_pixel() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("one.png");
        let img = RgbRaster::new(1, 1, vec![10.0, 20.0, 30.0]).unwrap();
        save_image(&p, &img).unwrap();
        let back = load_image(&p).unwrap();
        assert_eq!(back.data(), &[10.0, 20.0, 30.0]);
    }

    #[test]
    fn sixteen_bit_pgm_is_rescaled() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("deep.pgm");
        std::fs::write(&p, b"P5\n2 1\n65535\n\xff\xff\x00\x00").unwrap();
        let img = load_image(&p).unwrap();
        assert_eq!(img.channel(0).data(), &[255.0, 0.0]);
    }

    #[test]
    fn pgm_header_uses_maxval_255() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.pgm");
        save_luma(&p, &Raster::filled(3, 2, 7.0)).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(bytes.len(), 11 + 6);
    }

    #[test]
    fn errors_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.png");
        assert!(matches!(load_image(&missing), Err(ImageIoError::Unreadable { .. })));

        let text = dir.path().join("notes.txt");
        std::fs::write(&text, b"hello there, not an image").unwrap();
        assert!(matches!(load_image(&text), Err(ImageIoError::Unsupported { .. })));

        let truncated = dir.path().join("bad.png");
        let mut bytes = Vec::new();
        {
            let p = dir.path().join("good.png");
            save_luma(&p, &Raster::from_fn(16, 16, |x, y| (x * y) as f64)).unwrap();
            bytes.extend(std::fs::read(&p).unwrap());
        }
        bytes.truncate(bytes.len() / 2);
        std::fs::write(&truncated, &bytes).unwrap();
        assert!(matches!(load_image(&truncated), Err(ImageIoError::Corrupt { .. })));

        assert!(matches!(
            save_luma(dir.path().join("x.jpg"), &Raster::zeros(1, 1)),
            Err(ImageIoError::Unsupported { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn save_load_is_lossless(w in 1usize..12, h in 1usize..12, seed in any::<u64>(), png in any::<bool>()) {
            let mut s = seed;
            let data: Vec<f64> = (0..3 * w * h).map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 33) % 256) as f64
            }).collect();
            let img = RgbRaster::new(w, h, data).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join(if png { "r.png" } else { "r.ppm" });
            save_image(&p, &img).unwrap();
            prop_assert_eq!(load_image(&p).unwrap(), img.clone());

            let gray = img.channel(1);
            let pg = dir.path().join(if png { "g.png" } else { "g.pgm" });
            save_luma(&pg, &gray).unwrap();
            prop_assert_eq!(load_luma(&pg).unwrap(), gray);
        }
    }
}
