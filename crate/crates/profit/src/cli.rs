//! Command line interface.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use profit_core::training::Shots;

use crate::config::{load_manifest, Manifest};
use crate::error::{Error, Result, EXIT_OK};
use crate::store::STORE_FILE;
use crate::{features, reference, report, runner};

#[derive(Debug, Parser)]
#[command(name = "profit", version, about = "Cloze-prompt finetuning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train and evaluate every (method, K, seed) of a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run this seed only.
        #[arg(long)]
        seed: Option<u64>,
        /// Run this K only.
        #[arg(long)]
        k: Option<u32>,
        /// Replace runs already in the store.
        #[arg(long)]
        force: bool,
        /// Output directory, overriding the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the K-shot train/dev sample of one seed.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        k: u32,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Pretrain the reference backend and save a checkpoint.
    Pretrain {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accuracy and correlation reports of a results store.
    Report {
        /// Directory holding results.tsv; reports are written there.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Language feature TSV, or `shipped` for the packaged table.
        #[arg(long)]
        features: Option<String>,
        /// Correlate features against ProFiT accuracy or the ProFiT minus Vanilla delta.
        #[arg(long, value_enum, default_value_t = Target::Accuracy)]
        target: Target,
        #[arg(long, default_value = "en")]
        source: String,
    },
    /// Delta TSV and SVG of ProFiT minus Vanilla.
    Plot {
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        #[arg(long, default_value = "en")]
        source: String,
        /// Plot the packaged few-shot tables instead of a store.
        #[arg(long)]
        shipped: bool,
    },
    /// Write the synthetic corpus of a manifest as dataset files.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "synth-data")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Accuracy,
    Delta,
}

impl From<Target> for report::CorrelationTarget {
    fn from(t: Target) -> Self {
        match t {
            Target::Accuracy => report::CorrelationTarget::Accuracy,
            Target::Delta => report::CorrelationTarget::Delta,
        }
    }
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn overridden(mut m: Manifest, seed: Option<u64>, k: Option<u32>, out: Option<PathBuf>) -> Manifest {
    if let Some(s) = seed {
        m.training.seeds = vec![s];
    }
    if let Some(k) = k {
        m.training.shots = vec![Shots::K(k)];
    }
    if let Some(o) = out {
        m.output_dir = o;
    }
    m
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            k,
            force,
            out,
        } => {
            let m = overridden(load_manifest(&config)?, seed, k, out);
            let opts = runner::RunOptions {
                manifest_dir: manifest_dir(&config),
                force,
            };
            let summary = runner::run(&m, &opts)?;
            for r in &summary.runs {
                println!("{}\t{:016x}\t{} records", r.run_id, r.digest, r.records.len());
            }
            println!("store: {}", summary.store.display());
        }
        Command::Sample { config, seed, k, out } => {
            let m = load_manifest(&config)?;
            let (train, dev) = runner::sample(&m, &manifest_dir(&config), k, seed, &out)?;
            println!("{}\n{}", train.display(), dev.display());
        }
        Command::Pretrain { config, out } => {
            let m = load_manifest(&config)?;
            let out = out.unwrap_or_else(|| m.output_dir.clone());
            let path = runner::pretrain(&m, &manifest_dir(&config), &out)?;
            println!("{}", path.display());
        }
        Command::Report {
            out,
            features,
            target,
            source,
        } => {
            let feats = match features.as_deref() {
                None => None,
                Some("shipped") => Some(reference::language_features()),
                Some(p) => Some(features::load_features(Path::new(p))?),
            };
            let paths = runner::report_files(&out.join(STORE_FILE), feats, target.into(), &source, &out)?;
            print!("{}", std::fs::read_to_string(&paths.accuracy_txt).map_err(|e| Error::io(&paths.accuracy_txt, e))?);
            if let Some((_, txt)) = &paths.correlation {
                print!("{}", std::fs::read_to_string(txt).map_err(|e| Error::io(txt, e))?);
            }
        }
        Command::Plot { out, source, shipped } => {
            let (tsv, svg) = if shipped {
                runner::write_plot(&reference::reference_delta_table(&reference::fewshot_tables()), &out)?
            } else {
                runner::plot_files(&out.join(STORE_FILE), &source, &out)?
            };
            println!("{}\n{}", tsv.display(), svg.display());
        }
        Command::Synth { config, out } => {
            let m = load_manifest(&config)?;
            for p in runner::synth(&m, &out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

/// Runs the CLI on `args` and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { crate::error::EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
