//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Runs with `cargo test --release -p websr-core --test acceptance`.

mod common;

use std::time::Instant;

use common::*;
use rand::Rng;
use rand_distr::StandardNormal;
use websr_core::image_core::{psnr, quality, ssim, Psnr};
use websr_core::interp::{bicubic_resize, zoom, EdgeMode, ZoomSpec};
use websr_core::pipeline::{cmd_index, cmd_train_dict, eval_images, PipelineConfig, SrEngine};
use websr_core::registration::{logpolar_prealign, phase_correlate, UpsampleSpec};
use websr_core::retrieval::{query, InvertedIndex, Vocabulary};
use websr_core::sift::{extract, SiftParams};
use websr_core::sparse_sr::{sparse_code, train_dictionary_traced, Mat, TrainParams, TrainingPair};
use websr_core::Raster;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// 256x256 centre crops of the large sources.
fn registration_set() -> Vec<(&'static str, Raster)> {
    LARGE.iter().map(|&n| (n, large(n).crop(128, 128, 256, 256))).collect()
}

fn criterion_1() -> Outcome {
    let mut rng = seeded(1);
    let mut worst: f64 = 0.0;
    let mut exact = true;
    let mut slowest: f64 = 0.0;
    let fine = UpsampleSpec::new(20).unwrap();
    let coarse = UpsampleSpec::new(1).unwrap();
    for (_, img) in registration_set() {
        for _ in 0..4 {
            let (dy, dx): (f64, f64) = (rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0));
            let moving = dft_shift(&img, dy, dx);
            let t0 = Instant::now();
            let r = phase_correlate(&img, &moving, fine).unwrap();
            slowest = slowest.max(t0.elapsed().as_secs_f64());
            worst = worst.max((r.dy - dy).abs()).max((r.dx - dx).abs());
        }
        for _ in 0..2 {
            let (dy, dx) = (rng.random_range(-40i64..=40) as isize, rng.random_range(-40i64..=40) as isize);
            let r = phase_correlate(&img, &roll(&img, dy, dx), coarse).unwrap();
            exact &= r.dy == dy as f64 && r.dx == dx as f64;
        }
    }
    outcome(
        worst <= 0.05 && exact && slowest < 1.0,
        format!(
            "max subpixel error {worst:.4} px (<= 0.05), integer shifts exact: {exact}, slowest pair {slowest:.3} s"
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = seeded(2);
    let (mut worst_rot, mut worst_scale): (f64, f64) = (0.0, 0.0);
    let mut trials = 0;
    for &name in &LARGE {
        let src = large(name);
        let reference = view(&src, 256, 0.0, 1.0, 0.0, 0.0, 1.0);
        let mut cases: Vec<(f64, f64)> = vec![(-30.0, 1.0), (30.0, 1.0), (0.0, 0.8), (0.0, 1.25)];
        for _ in 0..4 {
            cases.push((rng.random_range(-30.0..30.0), rng.random_range(0.8..1.25)));
        }
        for (deg, scale) in cases {
            let moving = view(&src, 256, f64::to_radians(deg), scale, 0.0, 0.0, 1.0);
            let p = logpolar_prealign(&reference, &moving).unwrap();
            worst_rot = worst_rot.max((p.rotation.to_degrees() - deg).abs());
            worst_scale = worst_scale.max((p.scale / scale - 1.0).abs());
            trials += 1;
        }
    }
    outcome(
        worst_rot <= 0.5 && worst_scale <= 0.015,
        format!(
            "{trials} trials: max rotation error {worst_rot:.3} deg (<= 0.5), max scale error {:.2}% (<= 1.5%)",
            100.0 * worst_scale
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = seeded(3);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let img = random_raster(8, 8, &mut rng);
        let s = [1.5, 2.0, 3.0][case % 3];
        for edge in [EdgeMode::Zero, EdgeMode::Clamp] {
            let got = zoom(&img, s, edge).unwrap();
            let want = bicubic_oracle(&img, s, edge);
            for (a, b) in got.data().iter().zip(want.data()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    let flat = Raster::filled(8, 8, 137.0);
    let constant_ok = [1.5, 2.0, 3.0].iter().all(|&s| {
        bicubic_resize(&flat, &ZoomSpec::uniform(8, 8, s).unwrap(), EdgeMode::Clamp)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 137.0)
    });
    let img = random_raster(8, 8, &mut rng);
    let identity_ok = zoom(&img, 1.0, EdgeMode::Zero).unwrap() == img;
    outcome(
        worst <= 1e-9 && constant_ok && identity_ok,
        format!("max deviation from oracle {worst:.2e} (<= 1e-9), constant exact: {constant_ok}, s = 1 exact: {identity_ok}"),
    )
}

fn criterion_4() -> Outcome {
    let params = SiftParams::default();
    let mut lines = Vec::new();
    let mut pass = true;
    for name in ["astronaut", "brick", "coffee"] {
        let img = source(name).crop(64, 64, 192, 192);
        let a = extract(&img, &params).unwrap();
        let b = extract(&img.rotate90(), &params).unwrap();
        let w = img.width() as f64;
        let hits = a
            .iter()
            .filter(|d| {
                let (ex, ey) = (d.y, w - 1.0 - d.x);
                b.iter().any(|e| (e.x - ex).hypot(e.y - ey) <= 2.0)
            })
            .count();
        let rep = hits as f64 / a.len().max(1) as f64;
        let c = extract(&img.map(|v| 1.2 * v), &params).unwrap();
        let mut worst: f32 = 0.0;
        let mut found = 0;
        for d in &a {
            if let Some(e) = c.iter().find(|e| {
                (e.x - d.x).abs() < 1e-6
                    && (e.y - d.y).abs() < 1e-6
                    && (e.s - d.s).abs() < 1e-6
                    && (e.o - d.o).abs() < 1e-6
            }) {
                worst = worst.max(d.distance(e));
                found += 1;
            }
        }
        pass &= rep >= 0.5 && worst < 1e-3 && found == a.len() && !a.is_empty();
        lines.push(format!(
            "{name}: repeatability {:.0}% of {}, gain distance {worst:.1e} over {found}",
            100.0 * rep,
            a.len()
        ));
    }
    outcome(pass, lines.join("; "))
}

fn criterion_5(ctx: &Desk) -> Outcome {
    let cfg = &ctx.cfg;
    let mut self_top1 = 0;
    let mut crop_top3 = 0;
    for (id, entry) in ctx.index.images().iter().enumerate() {
        let img = websr_core::image_core::load_luma(&entry.path).unwrap();
        let hits = query(&img, &ctx.index, &ctx.vocab, &cfg.sift, &cfg.retrieval.bundle, 3).unwrap();
        if hits.first().map(|h| h.image as usize) == Some(id) {
            self_top1 += 1;
        }
        let (w, h) = img.dims();
        let (cw, ch) = ((w as f64 * 0.6).round() as usize, (h as f64 * 0.6).round() as usize);
        let crop = img.crop((w - cw) / 2, (h - ch) / 2, cw, ch);
        let hits = query(&crop, &ctx.index, &ctx.vocab, &cfg.sift, &cfg.retrieval.bundle, 3).unwrap();
        if hits.iter().any(|h| h.image as usize == id) {
            crop_top3 += 1;
        }
    }
    let n = ctx.index.images().len();
    outcome(
        n == 50 && self_top1 == n && crop_top3 as f64 >= 0.9 * n as f64,
        format!("{n} images: self top-1 {self_top1}/{n} (100%), 60% crop parent in top-3 {crop_top3}/{n} (>= 90%)"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = seeded(6);
    // low-coherence dictionary: 64 random unit atoms in 128 dimensions
    let atoms: Vec<Vec<f64>> = (0..64)
        .map(|_| {
            let v: Vec<f64> = (0..128).map(|_| rng.sample(StandardNormal)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / n).collect()
        })
        .collect();
    let coherence = (0..64)
        .flat_map(|i| (i + 1..64).map(move |j| (i, j)))
        .map(|(i, j)| atoms[i].iter().zip(&atoms[j]).map(|(a, b)| a * b).sum::<f64>().abs())
        .fold(0.0, f64::max);
    let d = Mat::from_columns(128, &atoms).unwrap();
    let mut recovered = 0;
    for trial in 0..100 {
        let t = 1 + trial % 3;
        let mut support: Vec<usize> = Vec::new();
        while support.len() < t {
            let a = rng.random_range(0..64);
            if !support.contains(&a) {
                support.push(a);
            }
        }
        let mut z = vec![0.0; 128];
        for &a in &support {
            let c = rng.random_range(1.0..3.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
            z.iter_mut().zip(&atoms[a]).for_each(|(zi, ai)| *zi += c * ai);
        }
        let code = sparse_code(&z, &d, t, 0.0);
        let r = code.residual(&z, &d);
        let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        let zn = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        if rn <= 1e-6 * zn {
            recovered += 1;
        }
    }

    // planted coupled dictionary, K = 8
    let (k, n_h, n_l) = (8, 16, 6);
    let unit = |v: Vec<f64>| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    let planted: Vec<Vec<f64>> =
        (0..k).map(|_| unit((0..n_h + n_l).map(|_| rng.sample(StandardNormal)).collect())).collect();
    let pairs: Vec<TrainingPair> = (0..2000)
        .map(|_| {
            let mut z = vec![0.0; n_h + n_l];
            let a = rng.random_range(0..k);
            let mut b = rng.random_range(0..k);
            while b == a {
                b = rng.random_range(0..k);
            }
            for atom in [a, b] {
                let c: f64 = rng.random_range(0.5..2.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
                z.iter_mut().zip(&planted[atom]).for_each(|(zi, pi)| *zi += c * pi);
            }
            TrainingPair { hr: z[..n_h].to_vec(), feature: z[n_h..].to_vec() }
        })
        .collect();
    let params = TrainParams { atoms: k, sparsity: 2, iterations: 40, seed: 5 };
    let (dh, dl, _) = train_dictionary_traced(&pairs, &params).unwrap();
    // training works in the space [hr / sqrt(n_h); f / sqrt(n_l)]
    let learned: Vec<Vec<f64>> = (0..dh.cols())
        .map(|j| {
            let v: Vec<f64> = dh
                .col(j)
                .iter()
                .map(|x| x / (n_h as f64).sqrt())
                .chain(dl.col(j).iter().map(|x| x / (n_l as f64).sqrt()))
                .collect();
            unit(v)
        })
        .collect();
    let planted_w: Vec<Vec<f64>> = planted
        .iter()
        .map(|p| {
            unit(
                p.iter()
                    .enumerate()
                    .map(|(i, x)| if i < n_h { x / (n_h as f64).sqrt() } else { x / (n_l as f64).sqrt() })
                    .collect(),
            )
        })
        .collect();
    let worst_angle = planted_w
        .iter()
        .map(|p| {
            let best =
                learned.iter().map(|l| l.iter().zip(p).map(|(a, b)| a * b).sum::<f64>().abs()).fold(0.0, f64::max);
            best.min(1.0).acos().to_degrees()
        })
        .fold(0.0, f64::max);
    outcome(
        recovered == 100 && worst_angle < 5.0,
        format!(
            "OMP exact recovery {recovered}/100 (coherence {coherence:.2}); planted K=8 max atom angle {worst_angle:.2} deg (< 5)"
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = seeded(9);
    let (mut dp, mut ds): (f64, f64) = (0.0, 0.0);
    for trial in 0..20 {
        let (w, h) = (16 + trial % 7, 20 + trial % 5);
        let a = random_raster(w, h, &mut rng);
        let b = Raster::from_fn(w, h, |x, y| (a.get(x, y) + rng.random_range(-30.0..30.0)).clamp(0.0, 255.0));
        let p = psnr(&a, &b).unwrap().value();
        dp = dp.max((p - psnr_oracle(&a, &b).unwrap()).abs());
        ds = ds.max((ssim(&a, &b).unwrap() - ssim_oracle(&a, &b)).abs());
    }
    let a = random_raster(24, 24, &mut rng);
    let q = quality(&a, &a).unwrap();
    let self_ok = q.ssim == 1.0 && q.psnr == Psnr::Identical;
    outcome(
        dp <= 1e-9 && ds <= 1e-6 && self_ok,
        format!("max PSNR deviation {dp:.1e} dB (<= 1e-9), max SSIM deviation {ds:.1e} (<= 1e-6), self-comparison exact: {self_ok}"),
    )
}

/// Indexed desk corpus, generic dictionary and a temp workspace.
struct Desk {
    _dir: tempfile::TempDir,
    cfg: PipelineConfig,
    vocab: Vocabulary,
    index: InvertedIndex,
    setup_secs: f64,
}

fn desk() -> Desk {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let train = dir.path().join("train");
    write_desk_corpus(&corpus);
    write_train_set(&train);
    let mut cfg = PipelineConfig::default();
    cfg.paths.corpus = corpus.clone();
    cfg.paths.train = train.clone();
    cfg.paths.vocab = dir.path().join("desk.vocab");
    cfg.paths.index = dir.path().join("desk.index");
    cfg.paths.dictionary = dir.path().join("desk.dict");
    cmd_index(&corpus, &cfg).unwrap();
    cmd_train_dict(&train, &cfg).unwrap();
    Desk {
        vocab: Vocabulary::load(&cfg.paths.vocab).unwrap(),
        index: InvertedIndex::load(&cfg.paths.index).unwrap(),
        cfg,
        _dir: dir,
        setup_secs: t0.elapsed().as_secs_f64(),
    }
}

fn criteria_7_8(ctx: &Desk) -> (Outcome, Outcome) {
    let t0 = Instant::now();
    let truths: Vec<(String, Raster)> = SR_SCENES.iter().map(|&n| (n.to_string(), sr_truth(n))).collect();
    let engine = SrEngine::load(&ctx.cfg).unwrap();
    let report = eval_images(&truths, &engine).unwrap();
    print!("{}", report.to_table());
    let [bp, bs, pp, ps] = report.means();
    let secs = t0.elapsed().as_secs_f64() + ctx.setup_secs;
    let c7 = outcome(
        pp >= bp + 0.3 && ps >= bs && secs < 300.0,
        format!(
            "mean PSNR {pp:.3} vs bicubic {bp:.3} (gain {:+.3} dB, >= +0.3); mean SSIM {ps:.5} vs {bs:.5}; {secs:.0} s incl. setup",
            pp - bp
        ),
    );

    let generic = SrEngine::new(ctx.cfg.clone(), None, engine_generic(&ctx.cfg));
    let mut adaptive_used = 0;
    let (mut a_sum, mut g_sum) = (0.0, 0.0);
    let s = ctx.cfg.upscale;
    for (row, (_, hr)) in report.rows.iter().zip(&truths) {
        let lr = websr_core::sparse_sr::degrade(hr, s, ctx.cfg.sr.edge).unwrap();
        let (g, _) = generic.super_resolve_luma(&lr).unwrap();
        g_sum += psnr(hr, &g).unwrap().value();
        a_sum += row.proposed_psnr.value();
        adaptive_used += row.adaptive as usize;
    }
    let n = report.rows.len() as f64;
    let c8 = outcome(
        a_sum / n >= g_sum / n && adaptive_used == report.rows.len(),
        format!(
            "adaptive mean PSNR {:.3} vs generic {:.3} over {} queries (adaptive dictionary used in {adaptive_used})",
            a_sum / n,
            g_sum / n,
            report.rows.len()
        ),
    );
    (c7, c8)
}

fn engine_generic(cfg: &PipelineConfig) -> Option<websr_core::DictionaryPair> {
    websr_core::DictionaryPair::load(&cfg.paths.dictionary).ok()
}

fn timed(n: usize, name: &'static str, f: impl FnOnce() -> Outcome) -> (usize, &'static str, Outcome) {
    let t0 = Instant::now();
    let o = f();
    eprintln!("criterion {n} done in {:.1} s", t0.elapsed().as_secs_f64());
    (n, name, o)
}

fn main() {
    let mut results = vec![
        timed(1, "registration accuracy", criterion_1),
        timed(2, "rotation/scale pre-alignment", criterion_2),
        timed(3, "bicubic oracle equivalence", criterion_3),
        timed(4, "SIFT repeatability", criterion_4),
        timed(6, "sparse coding", criterion_6),
        timed(9, "metric correctness", criterion_9),
    ];
    let ctx = desk();
    results.push(timed(5, "retrieval", || criterion_5(&ctx)));
    let (c7, c8) = criteria_7_8(&ctx);
    results.push((7, "directional PSNR/SSIM reproduction", c7));
    results.push((8, "adaptive-dictionary ablation", c8));
    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (n, name, o) in &results {
        println!("{} criterion {n} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += !o.pass as usize;
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
