//! Desk-scale fixtures and brute-force oracles shared by integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use websr_core::image_core::{load_luma, save_luma};
use websr_core::interp::{sample, EdgeMode};
use websr_core::Raster;

/// Scenes of the SR test set. Their sources never train the generic
/// dictionary.
pub const SR_SCENES: [&str; 5] = ["astronaut", "camera", "coffee", "brick", "motorcycle"];

/// 512x512 sources for registration.
pub const LARGE: [&str; 5] = ["astronaut", "camera", "brick", "ihc", "moon"];

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

/// A bundled 320x320 grey image.
pub fn source(name: &str) -> Raster {
    load_luma(data_dir().join(format!("{name}.png"))).unwrap()
}

pub fn large(name: &str) -> Raster {
    load_luma(data_dir().join(format!("large/{name}.png"))).unwrap()
}

/// Every 320x320 source not in [`SR_SCENES`], by name.
pub fn train_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(data_dir())
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension()? == "png").then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .filter(|n| !SR_SCENES.contains(&n.as_str()))
        .collect();
    names.sort();
    names
}

/// Ground truth of an SR scene: the 160x160 centre of its source.
pub fn sr_truth(name: &str) -> Raster {
    source(name).crop(80, 80, 160, 160)
}

/// `size`-square rendering of `img` whose content, relative to the centre
/// crop, is rotated by `theta`, magnified by `scale`, displaced by
/// `(ty, tx)` and multiplied by `gain`.
pub fn view(img: &Raster, size: usize, theta: f64, scale: f64, ty: f64, tx: f64, gain: f64) -> Raster {
    let cx = (img.width() as f64 - 1.0) / 2.0;
    let cy = (img.height() as f64 - 1.0) / 2.0;
    let co = (size as f64 - 1.0) / 2.0;
    let (s, c) = theta.sin_cos();
    Raster::from_fn(size, size, |x, y| {
        let (px, py) = (x as f64 - co - tx, y as f64 - co - ty);
        let (qx, qy) = ((c * px + s * py) / scale, (-s * px + c * py) / scale);
        gain * sample(img, cx + qx, cy + qy, EdgeMode::Clamp)
    })
    .clamp_to_range()
}

/// Another photograph of an SR scene: the truth window seen from a slightly
/// different position and exposure. `hard` adds a small rotation and zoom.
pub fn scene_view(name: &str, hard: bool) -> Raster {
    let i = SR_SCENES.iter().position(|s| *s == name).unwrap_or(0) as f64;
    let src = source(name);
    if hard {
        view(&src, 160, (3.0 + i).to_radians(), 1.04, 2.5 - i, 1.5 + i, 0.92)
    } else {
        // whole-pixel displacement: a plain crop, as from a second camera
        let (dx, dy) = (3 + i as usize, 1 + 2 * i as usize);
        src.crop(80 + dx, 80 - 1 + dy, 160, 160).map(|v| (1.1 * v).min(255.0))
    }
}

/// Writes the 50-image desk corpus into `dir`: the four 160x160 quadrants
/// of every training source, plus an easy and a hard view of each SR scene.
/// Returns the paths in file-name order.
pub fn write_desk_corpus(dir: &Path) -> Vec<PathBuf> {
    std::fs::create_dir_all(dir).unwrap();
    let mut paths = Vec::new();
    for name in train_names() {
        let img = source(&name);
        for (q, (x, y)) in [(0, 0), (160, 0), (0, 160), (160, 160)].into_iter().enumerate() {
            let p = dir.join(format!("tile_{name}_{q}.png"));
            save_luma(&p, &img.crop(x, y, 160, 160)).unwrap();
            paths.push(p);
        }
    }
    for name in SR_SCENES {
        for hard in [false, true] {
            let p = dir.join(format!("view_{name}_{}.png", if hard { "b" } else { "a" }));
            save_luma(&p, &scene_view(name, hard)).unwrap();
            paths.push(p);
        }
    }
    paths.sort();
    paths
}

/// Saves the training sources into `dir`.
pub fn write_train_set(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    for name in train_names() {
        save_luma(dir.join(format!("{name}.png")), &source(&name)).unwrap();
    }
}

pub fn random_raster(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Raster {
    Raster::from_fn(w, h, |_, _| rng.random_range(0.0..255.0))
}

// ---- oracles ----

/// Textbook Lagrange basis through integer knots `k0..k0+3`.
pub fn lagrange_oracle(t: f64, k0: f64) -> [f64; 4] {
    let knots = [k0, k0 + 1.0, k0 + 2.0, k0 + 3.0];
    let mut w = [1.0; 4];
    for (j, wj) in w.iter_mut().enumerate() {
        for (m, km) in knots.iter().enumerate() {
            if m != j {
                *wj *= (t - km) / (knots[j] - km);
            }
        }
    }
    w
}

/// Brute-force bicubic zoom: every output pixel maps back to
/// `(i + 0.5) / s - 0.5`, the 4x4 neighbourhood starting one sample before
/// its floor is weighted by the Lagrange bases, samples outside the grid
/// read via `edge`, result clamped to `[0, 255]`.
pub fn bicubic_oracle(src: &Raster, s: f64, edge: EdgeMode) -> Raster {
    let ow = (src.width() as f64 * s).round() as usize;
    let oh = (src.height() as f64 * s).round() as usize;
    let read = |x: isize, y: isize| match edge {
        EdgeMode::Zero => {
            if x < 0 || y < 0 || x >= src.width() as isize || y >= src.height() as isize {
                0.0
            } else {
                src.get(x as usize, y as usize)
            }
        }
        EdgeMode::Clamp => {
            src.get(x.clamp(0, src.width() as isize - 1) as usize, y.clamp(0, src.height() as isize - 1) as usize)
        }
    };
    Raster::from_fn(ow, oh, |i, j| {
        let u = (i as f64 + 0.5) / s - 0.5;
        let v = (j as f64 + 0.5) / s - 0.5;
        let (c0, r0) = (u.floor() - 1.0, v.floor() - 1.0);
        let wx = lagrange_oracle(u, c0);
        let wy = lagrange_oracle(v, r0);
        let mut acc = 0.0;
        for (a, wya) in wy.iter().enumerate() {
            for (b, wxb) in wx.iter().enumerate() {
                acc += wya * wxb * read(c0 as isize + b as isize, r0 as isize + a as isize);
            }
        }
        acc.clamp(0.0, 255.0)
    })
}

/// PSNR in dB from a plain double loop; `None` for identical images.
pub fn psnr_oracle(a: &Raster, b: &Raster) -> Option<f64> {
    let mut se = 0.0;
    for y in 0..a.height() {
        for x in 0..a.width() {
            se += (a.get(x, y) - b.get(x, y)).powi(2);
        }
    }
    let mse = se / (a.width() * a.height()) as f64;
    (mse > 0.0).then(|| 20.0 * 255f64.log10() - 10.0 * mse.log10())
}

/// Mean SSIM with an explicit 11x11 Gaussian (sigma 1.5) per window and
/// two-pass moments.
pub fn ssim_oracle(a: &Raster, b: &Raster) -> f64 {
    let mut g = [[0.0; 11]; 11];
    let mut total = 0.0;
    for (i, row) in g.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
            total += *v;
        }
    }
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let mut sum = 0.0;
    let mut n = 0;
    for y0 in 0..=a.height() - 11 {
        for x0 in 0..=a.width() - 11 {
            let mut mx = 0.0;
            let mut my = 0.0;
            for i in 0..11 {
                for j in 0..11 {
                    let w = g[i][j] / total;
                    mx += w * a.get(x0 + j, y0 + i);
                    my += w * b.get(x0 + j, y0 + i);
                }
            }
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let w = g[i][j] / total;
                    let (da, db) = (a.get(x0 + j, y0 + i) - mx, b.get(x0 + j, y0 + i) - my);
                    vx += w * da * da;
                    vy += w * db * db;
                    cxy += w * da * db;
                }
            }
            sum += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            n += 1;
        }
    }
    sum / n as f64
}

/// Circular shift by whole pixels: `out(y, x) = img(y - dy, x - dx)`.
pub fn roll(img: &Raster, dy: isize, dx: isize) -> Raster {
    let (w, h) = (img.width() as isize, img.height() as isize);
    Raster::from_fn(img.width(), img.height(), |x, y| {
        img.get((x as isize - dx).rem_euclid(w) as usize, (y as isize - dy).rem_euclid(h) as usize)
    })
}

/// Band-limited subpixel circular shift, one axis at a time: `out(y, x) = img(y - dy, x - dx)` for the trigonometric
/// interpolant. Nyquist terms use the real cosine half.
pub fn dft_shift(img: &Raster, dy: f64, dx: f64) -> Raster {
    let rows: Vec<Vec<f64>> = (0..img.height()).map(|y| shift_1d(img.row(y), dx)).collect();
    let tmp = Raster::from_fn(img.width(), img.height(), |x, y| rows[y][x]);
    let cols: Vec<Vec<f64>> =
        (0..img.width()).map(|x| shift_1d(&(0..img.height()).map(|y| tmp.get(x, y)).collect::<Vec<_>>(), dy)).collect();
    Raster::from_fn(img.width(), img.height(), |x, y| cols[x][y])
}

fn shift_1d(v: &[f64], d: f64) -> Vec<f64> {
    use rustfft::num_complex::Complex;
    use std::f64::consts::PI;
    let n = v.len();
    let mut planner = rustfft::FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = v.iter().map(|&x| Complex::new(x, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        if n.is_multiple_of(2) && k == n / 2 {
            // cos(pi (t - d)) keeps the result real
            *c *= (PI * d).cos();
            continue;
        }
        let f = if k < n / 2 + 1 { k as f64 } else { k as f64 - n as f64 };
        *c *= Complex::from_polar(1.0, -2.0 * PI * f * d / n as f64);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
