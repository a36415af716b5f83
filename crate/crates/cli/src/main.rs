use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use websr_core::interp::EdgeMode;
use websr_core::pipeline::{
    cmd_eval, cmd_index, cmd_interp, cmd_register, cmd_retrieve, cmd_sr, cmd_train_dict, format_registration,
    ConfigError, PipelineConfig, PipelineError,
};

/// Example-based super-resolution with correlated images retrieved from a
/// local corpus.
#[derive(Parser, Debug)]
#[command(name = "websr", version, about)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Key-value configuration file.
    #[arg(long, value_name = "PATH", global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the visual vocabulary and inverted index of a corpus.
    Index {
        /// Corpus directory [default: paths.corpus].
        corpus: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "PATH")]
        vocab: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        index: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Rank corpus images against a low-resolution query.
    Retrieve {
        lr: PathBuf,
        #[arg(long)]
        top_n: Option<usize>,
        #[arg(long)]
        min_score: Option<f64>,
        #[arg(long)]
        upscale: Option<u32>,
        #[arg(long, value_name = "PATH")]
        vocab: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        index: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Register candidate images to a reference; prints
    /// `path dy dx rotation_deg scale error` per candidate.
    Register {
        reference: PathBuf,
        #[arg(required = true)]
        candidates: Vec<PathBuf>,
        #[arg(long)]
        kappa: Option<u32>,
        /// Translation only.
        #[arg(long)]
        no_logpolar: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Train the generic dictionary pair.
    TrainDict {
        /// Training image directory [default: paths.train].
        dir: Option<PathBuf>,
        #[arg(long)]
        atoms: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        upscale: Option<u32>,
        /// Where to write the dictionary [default: paths.dictionary].
        #[arg(short, long, value_name = "PATH")]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Super-resolve one image.
    Sr {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        upscale: Option<u32>,
        #[arg(long, value_name = "PATH")]
        dictionary: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        vocab: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        index: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare bicubic and the full pipeline on ground-truth images.
    Eval {
        dir: PathBuf,
        /// CSV output; printed after the table when absent.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
        #[arg(long)]
        upscale: Option<u32>,
        #[arg(long, value_name = "PATH")]
        dictionary: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Bicubic zoom of every channel.
    Interp {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        factor: f64,
        /// zero or clamp.
        #[arg(long, default_value = "zero")]
        edge: EdgeMode,
    },
}

/// Defaults, then the file, then `--set`, then the command's own flags.
fn build_config(common: &Common, flags: &[(&str, Option<String>)]) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    for kv in &common.sets {
        let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::Syntax { line: 0, text: kv.clone() })?;
        cfg.set(k.trim(), v.trim())?;
    }
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn opt<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(|v| v.to_string())
}

fn path(v: &Option<PathBuf>) -> Option<String> {
    v.as_ref().map(|p| p.to_string_lossy().into_owned())
}

fn run(cli: Cli) -> Result<()> {
    let out = io::stdout();
    let mut out = out.lock();
    match cli.command {
        Command::Index { corpus, k, seed, vocab, index, common } => {
            let cfg = build_config(
                &common,
                &[
                    ("paths.corpus", path(&corpus)),
                    ("retrieval.k", opt(&k)),
                    ("retrieval.seed", opt(&seed)),
                    ("paths.vocab", path(&vocab)),
                    ("paths.index", path(&index)),
                ],
            )?;
            let s = cmd_index(&cfg.paths.corpus, &cfg)?;
            writeln!(out, "indexed {} images, {} descriptors", s.images, s.descriptors)?;
            for sk in &s.skipped {
                writeln!(out, "skipped {}: {}", sk.path.display(), sk.reason)?;
            }
            writeln!(out, "vocabulary {}", cfg.paths.vocab.display())?;
            writeln!(out, "index {}", cfg.paths.index.display())?;
        }
        Command::Retrieve { lr, top_n, min_score, upscale, vocab, index, common } => {
            let cfg = build_config(
                &common,
                &[
                    ("retrieval.top_n", opt(&top_n)),
                    ("retrieval.min_score", opt(&min_score)),
                    ("upscale", opt(&upscale)),
                    ("paths.vocab", path(&vocab)),
                    ("paths.index", path(&index)),
                ],
            )?;
            for (rank, r) in cmd_retrieve(&lr, &cfg)?.iter().enumerate() {
                writeln!(
                    out,
                    "{} {} {:.3} {} {} {}",
                    rank + 1,
                    r.hit.image,
                    r.hit.score,
                    r.hit.matched_sets,
                    if r.correlated { "correlated" } else { "weak" },
                    r.path.display()
                )?;
            }
        }
        Command::Register { reference, candidates, kappa, no_logpolar, common } => {
            let cfg = build_config(
                &common,
                &[
                    ("registration.kappa", opt(&kappa)),
                    ("registration.logpolar", no_logpolar.then(|| "false".to_string())),
                ],
            )?;
            let regs = cmd_register(&reference, &candidates, &cfg)?;
            for (p, r) in candidates.iter().zip(&regs) {
                writeln!(out, "{}", format_registration(p, &r.result))?;
            }
        }
        Command::TrainDict { dir, atoms, iterations, seed, upscale, output, common } => {
            let cfg = build_config(
                &common,
                &[
                    ("paths.train", path(&dir)),
                    ("sr.atoms", opt(&atoms)),
                    ("sr.iterations", opt(&iterations)),
                    ("sr.seed", opt(&seed)),
                    ("upscale", opt(&upscale)),
                    ("paths.dictionary", path(&output)),
                ],
            )?;
            let (_, s) = cmd_train_dict(&cfg.paths.train, &cfg)?;
            writeln!(
                out,
                "trained {} atoms on {} pairs from {} images -> {}",
                s.atoms,
                s.pairs,
                s.images,
                cfg.paths.dictionary.display()
            )?;
        }
        Command::Sr { input, output, upscale, dictionary, vocab, index, common } => {
            let cfg = build_config(
                &common,
                &[
                    ("upscale", opt(&upscale)),
                    ("paths.dictionary", path(&dictionary)),
                    ("paths.vocab", path(&vocab)),
                    ("paths.index", path(&index)),
                ],
            )?;
            let report = cmd_sr(&input, &output, &cfg)?;
            write!(out, "{report}")?;
            writeln!(out, "wrote {}", output.display())?;
        }
        Command::Eval { dir, csv, upscale, dictionary, common } => {
            let cfg = build_config(&common, &[("upscale", opt(&upscale)), ("paths.dictionary", path(&dictionary))])?;
            let report = cmd_eval(&dir, &cfg)?;
            write!(out, "{}", report.to_table())?;
            match csv {
                Some(p) => {
                    let f = File::create(&p).with_context(|| format!("cannot create {}", p.display()))?;
                    report.write_csv(BufWriter::new(f))?;
                }
                None => {
                    writeln!(out)?;
                    report.write_csv(&mut out)?;
                }
            }
        }
        Command::Interp { input, output, factor, edge } => {
            let img = cmd_interp(&input, &output, factor, edge)?;
            writeln!(out, "wrote {} ({}x{})", output.display(), img.width(), img.height())?;
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<PipelineError>() {
        Some(e) => e.exit_code() as u8,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
