use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use websr_core::interp::{bicubic_resize, EdgeMode, ZoomSpec};
use websr_core::registration::{fourier_shift, phase_correlate, UpsampleSpec};
use websr_core::sift::{extract, SiftParams};
use websr_core::sparse_sr::{Coder, Mat};
use websr_core::Raster;

fn texture(n: usize) -> Raster {
    Raster::from_fn(n, n, |x, y| {
        let (x, y) = (x as f64, y as f64);
        128.0 + 50.0 * (0.21 * x + 0.05 * y).sin() * (0.13 * y).cos() + 30.0 * (0.017 * x * y).sin()
    })
}

/// Deterministic values in [-1, 1] without pulling in an RNG.
fn hashed(i: usize) -> f64 {
    let h = (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17) ^ 0xD6E8_FEB8_6659_FD93;
    (h >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

fn bench_bicubic(c: &mut Criterion) {
    let img = texture(256);
    let spec = ZoomSpec::uniform(256, 256, 2.0).unwrap();
    c.bench_function("bicubic 256 -> 512", |b| {
        b.iter(|| bicubic_resize(black_box(&img), &spec, EdgeMode::Zero).unwrap())
    });
}

fn bench_phase_correlate(c: &mut Criterion) {
    let img = texture(256);
    let moved = fourier_shift(&img, 3.3, -5.7);
    let up = UpsampleSpec::new(20).unwrap();
    c.bench_function("phase_correlate 256 kappa 20", |b| {
        b.iter(|| phase_correlate(black_box(&img), black_box(&moved), up).unwrap())
    });
}

fn bench_sift(c: &mut Criterion) {
    let img = texture(256);
    let params = SiftParams::default();
    c.bench_function("sift extract 256", |b| b.iter(|| extract(black_box(&img), &params).unwrap()));
}

fn bench_omp(c: &mut Criterion) {
    let (n, k) = (400, 512);
    let cols: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let v: Vec<f64> = (0..n).map(|i| hashed(j * n + i)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    let dict = Mat::from_columns(n, &cols).unwrap();
    let z: Vec<f64> = (0..n).map(|i| 2.0 * cols[7][i] - 0.5 * cols[300][i] + 0.01 * hashed(9_999_999 + i)).collect();
    c.bench_function("gram 400x512", |b| b.iter(|| Coder::new(black_box(&dict))));
    let coder = Coder::new(&dict);
    c.bench_function("omp 400x512 T=3", |b| b.iter(|| coder.code(black_box(&z), 3, 0.0)));
}

criterion_group!(kernels, bench_bicubic, bench_phase_correlate, bench_sift, bench_omp);
criterion_main!(kernels);
