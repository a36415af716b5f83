use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(name)
}

fn websr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_websr")).current_dir(dir).args(args).output().expect("websr runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

const SMALL: &str = "\
# small settings so the test runs in seconds
retrieval.k = 32
retrieval.sample = 4000
sr.patch_size = 5
sr.overlap = 2
sr.atoms = 128
sr.iterations = 2
sr.train_pairs = 800
sr.max_pairs = 800
";

fn copy(names: &[&str], dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    for n in names {
        fs::copy(data(&format!("{n}.png")), dir.join(format!("{n}.png"))).unwrap();
    }
}

#[test]
fn interp_doubles_size() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(websr(
        tmp.path(),
        &["interp", data("brick.png").to_str().unwrap(), "big.png", "--factor", "2", "--edge", "clamp"],
    ));
    assert!(out.contains("640x640"), "{out}");
    assert!(tmp.path().join("big.png").exists());
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = websr(tmp.path(), &["index", "corpus", "--set", "retrieval.bogus=1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = websr(tmp.path(), &["index", "corpus", "--set", "sr.overlap=10"]);
    assert_eq!(o.status.code(), Some(2));
    fs::write(tmp.path().join("bad.conf"), "upscale two\n").unwrap();
    let o = websr(tmp.path(), &["index", "corpus", "--config", "bad.conf"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn input_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let o = websr(tmp.path(), &["index", "no-such-dir"]);
    assert_eq!(o.status.code(), Some(1));
    let o = websr(tmp.path(), &["interp", "missing.png", "out.png", "--factor", "2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn register_prints_one_line_per_candidate() {
    let tmp = tempfile::tempdir().unwrap();
    let src = data("coins.png");
    let out = ok(websr(tmp.path(), &["register", src.to_str().unwrap(), src.to_str().unwrap(), "--no-logpolar"]));
    let fields: Vec<&str> = out.trim().split(' ').collect();
    assert_eq!(fields.len(), 6, "{out}");
    for v in &fields[1..3] {
        assert!(v.parse::<f64>().unwrap().abs() < 1e-6, "{out}");
    }
    assert_eq!(fields[4], "1.000000");
}

#[test]
fn end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("small.conf"), SMALL).unwrap();
    copy(&["brick", "coins", "grass", "chelsea"], &dir.join("corpus"));
    copy(&["gravel", "hubble", "ihc"], &dir.join("train"));
    copy(&["brick"], &dir.join("truth"));

    let out = ok(websr(dir, &["index", "--config", "small.conf"]));
    assert!(out.starts_with("indexed 4 images"), "{out}");
    let out = ok(websr(dir, &["train-dict", "--config", "small.conf", "-o", "d.dict"]));
    assert!(out.starts_with("trained 128 atoms"), "{out}");

    // a low-resolution query made from a corpus image
    ok(websr(dir, &["interp", "corpus/brick.png", "lr.png", "--factor", "0.5"]));
    let out = ok(websr(dir, &["retrieve", "lr.png", "--config", "small.conf", "--top-n", "2"]));
    let first = out.lines().next().unwrap();
    assert!(first.starts_with("1 ") && first.ends_with("brick.png"), "{out}");

    let out = ok(websr(dir, &["sr", "lr.png", "hr.png", "--config", "small.conf", "--dictionary", "d.dict"]));
    assert!(out.contains("input 160x160 -> output 320x320"), "{out}");
    assert!(out.contains("dictionary: "), "{out}");

    let out = ok(websr(dir, &["eval", "truth", "--config", "small.conf", "--dictionary", "d.dict", "--csv", "e.csv"]));
    assert!(out.lines().next().unwrap().starts_with("IMAGE"), "{out}");
    assert!(out.lines().any(|l| l.starts_with("MEAN")), "{out}");
    let csv = fs::read_to_string(dir.join("e.csv")).unwrap();
    assert!(csv.starts_with("image,basic_psnr,basic_ssim,proposed_psnr,proposed_ssim"));
    assert!(csv.lines().nth(1).unwrap().starts_with("brick.png,"));

    // the generic dictionary alone still produces output
    let out = ok(websr(
        dir,
        &["sr", "lr.png", "hr2.png", "--config", "small.conf", "--dictionary", "d.dict", "--index", "missing.index"],
    ));
    assert!(out.contains("generic fallback"), "{out}");
}
