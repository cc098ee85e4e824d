//! Experiment orchestration behind the CLI verbs.

use std::path::{Path, PathBuf};

use profit_core::analysis::LanguageFeatureRow;
use profit_core::backend::{params_digest, pretrain_reference, ReferenceConfig};
use profit_core::data::{sample_few_shot, synth_corpus, Dataset, Split};
use profit_core::eval::{delta_table, DeltaTable, RunRecord};
use profit_core::training::{run_once, Experiment};
use profit_core::{ReferenceBackend, TaskSpec};

use crate::config::{DataSource, Manifest};
use crate::error::{Error, Result};
use crate::store::{Store, StoreError};
use crate::{checkpoint, plot, report, tsv};

/// Loaded datasets of a manifest.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub task: TaskSpec,
    pub train: Dataset,
    pub dev: Option<Dataset>,
    pub tests: Vec<Dataset>,
    /// Unlabeled text for pretraining the reference backend.
    pub corpus: Vec<String>,
}

fn validated(ds: Dataset, task: &TaskSpec) -> Result<Dataset> {
    ds.validate(task)?;
    Ok(ds)
}

/// Reads the manifest's data files, or generates its synthetic corpus.
/// Relative data paths resolve against the data root.
pub fn load_inputs(m: &Manifest, manifest_dir: &Path) -> Result<Inputs> {
    match &m.data {
        DataSource::Synth(cfg) => {
            let c = synth_corpus(cfg)?;
            Ok(Inputs {
                task: c.task,
                train: c.train,
                dev: Some(c.dev),
                tests: c.tests,
                corpus: c.pretrain,
            })
        }
        DataSource::Files(f) => {
            let root = f.root(manifest_dir);
            let task = &m.task;
            let src = &f.source_language;
            let train = validated(tsv::load_tsv(&root.join(&f.train), task, src, Split::Train)?, task)?;
            let dev = match &f.dev {
                Some(p) => Some(validated(tsv::load_tsv(&root.join(p), task, src, Split::Dev)?, task)?),
                None => None,
            };
            let tests = f
                .test_languages
                .iter()
                .map(|lang| validated(tsv::load_tsv(&root.join(f.test_path(lang)), task, lang, Split::Test)?, task))
                .collect::<Result<Vec<_>>>()?;
            let corpus = train
                .examples
                .iter()
                .chain(dev.iter().flat_map(|d| &d.examples))
                .flat_map(|e| e.segments.iter().cloned())
                .collect();
            Ok(Inputs {
                task: task.clone(),
                train,
                dev,
                tests,
                corpus,
            })
        }
    }
}

/// Loads the configured checkpoint (relative to the manifest directory) or
/// pretrains a fresh reference backend on the inputs' corpus.
pub fn build_backend(m: &Manifest, inputs: &Inputs, manifest_dir: &Path) -> Result<ReferenceBackend> {
    if let Some(cp) = &m.backend.checkpoint {
        return Ok(checkpoint::load(&manifest_dir.join(cp))?);
    }
    let cfg = ReferenceConfig {
        name: m.backend.name.clone(),
        dim: m.backend.dim,
        epochs: m.backend.pretrain_epochs,
        lr: m.backend.pretrain_lr,
        seed: m.backend.pretrain_seed,
        extra_words: inputs.task.pvp.verbalizer().to_vec(),
    };
    Ok(pretrain_reference(&inputs.corpus, &cfg)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub run_id: String,
    /// Digest of the run's final parameters.
    pub digest: u64,
    pub records: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub store: PathBuf,
    pub runs: Vec<RunEntry>,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub manifest_dir: PathBuf,
    pub force: bool,
}

/// Every run id the manifest produces, in execution order.
pub fn planned_runs(m: &Manifest) -> Vec<profit_core::RunConfig> {
    let mut out = Vec::new();
    for &method in &m.training.methods {
        for &shots in &m.training.shots {
            for &seed in &m.training.seeds {
                out.push(m.training.run_config(&m.task.task_id, method, shots, seed));
            }
        }
    }
    out
}

/// Samples, trains and evaluates every (method, K, seed) of the manifest and
/// appends one record batch per run to the output directory's store.
///
/// Duplicate run ids are refused before any training unless `force` is set.
pub fn run(m: &Manifest, opts: &RunOptions) -> Result<RunSummary> {
    let store = Store::in_dir(&m.output_dir);
    let plan = planned_runs(m);
    if !opts.force {
        let existing = store.records()?;
        for cfg in &plan {
            let id = cfg.run_id(&m.run_id);
            if existing.iter().any(|r| r.run_id == id) {
                return Err(StoreError::DuplicateRun(id).into());
            }
        }
    }
    let inputs = load_inputs(m, &opts.manifest_dir)?;
    let backend = build_backend(m, &inputs, &opts.manifest_dir)?;

    let manifests = m.output_dir.join("manifests");
    std::fs::create_dir_all(&manifests).map_err(|e| Error::io(&manifests, e))?;
    let copy = manifests.join(format!("{}.toml", m.run_id));
    std::fs::write(&copy, m.emit()).map_err(|e| Error::io(&copy, e))?;

    let exp = Experiment {
        run_id: &m.run_id,
        task: &inputs.task,
        train: &inputs.train,
        dev: inputs.dev.as_ref(),
        tests: &inputs.tests,
    };
    let mut runs = Vec::with_capacity(plan.len());
    for cfg in &plan {
        let outcome = run_once(&backend, &exp, cfg)?;
        store.append(&outcome.records, opts.force)?;
        runs.push(RunEntry {
            run_id: cfg.run_id(&m.run_id),
            digest: params_digest(&outcome.params),
            records: outcome.records,
        });
    }
    Ok(RunSummary {
        store: store.path().to_path_buf(),
        runs,
    })
}

/// Writes the K-shot train and dev samples of `seed` as dataset TSVs.
pub fn sample(m: &Manifest, manifest_dir: &Path, k: u32, seed: u64, out: &Path) -> Result<(PathBuf, PathBuf)> {
    let inputs = load_inputs(m, manifest_dir)?;
    let (train, dev) = sample_few_shot(&inputs.train, inputs.task.num_labels(), k as usize, seed)?;
    let train_path = out.join(format!("train_k{k}_s{seed}.tsv"));
    let dev_path = out.join(format!("dev_k{k}_s{seed}.tsv"));
    tsv::write_tsv(&train_path, &train, &inputs.task)?;
    tsv::write_tsv(&dev_path, &dev, &inputs.task)?;
    Ok((train_path, dev_path))
}

/// Builds the manifest's backend and saves it as a checkpoint.
pub fn pretrain(m: &Manifest, manifest_dir: &Path, out: &Path) -> Result<PathBuf> {
    let inputs = load_inputs(m, manifest_dir)?;
    let backend = build_backend(m, &inputs, manifest_dir)?;
    let path = out.join("backend.bin");
    checkpoint::save(&path, &backend)?;
    Ok(path)
}

/// Writes a synthetic corpus as dataset files: `en/train.tsv`, `en/dev.tsv`,
/// `<lang>/test.tsv`, `pretrain.txt` and `anchors.tsv` (the shared word ids).
pub fn synth(m: &Manifest, out: &Path) -> Result<Vec<PathBuf>> {
    let DataSource::Synth(cfg) = &m.data else {
        return Err(Error::Input("synth needs a [synth] section".into()));
    };
    let c = synth_corpus(cfg)?;
    let mut written = Vec::new();
    let mut put = |rel: String, ds: &Dataset| -> Result<()> {
        let p = out.join(rel);
        tsv::write_tsv(&p, ds, &c.task)?;
        written.push(p);
        Ok(())
    };
    put(format!("{}/train.tsv", c.train.language), &c.train)?;
    put(format!("{}/dev.tsv", c.dev.language), &c.dev)?;
    for t in &c.tests {
        put(format!("{}/test.tsv", t.language), t)?;
    }
    let pre = out.join("pretrain.txt");
    std::fs::write(&pre, c.pretrain.join("\n") + "\n").map_err(|e| Error::io(&pre, e))?;
    let anchors = out.join("anchors.tsv");
    let text: String = std::iter::once("word_id\n".to_string())
        .chain(c.anchors.iter().map(|a| format!("{a}\n")))
        .collect();
    std::fs::write(&anchors, text).map_err(|e| Error::io(&anchors, e))?;
    written.push(pre);
    written.push(anchors);
    Ok(written)
}

/// Paths written by [`report_files`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportPaths {
    pub accuracy_tsv: PathBuf,
    pub accuracy_txt: PathBuf,
    pub correlation: Option<(PathBuf, PathBuf)>,
}

/// Accuracy report of a store, plus a correlation report when
/// feature rows are given.
pub fn report_files(
    store_path: &Path,
    features: Option<Vec<LanguageFeatureRow>>,
    target: report::CorrelationTarget,
    source: &str,
    out: &Path,
) -> Result<ReportPaths> {
    let records = crate::store::read_store(store_path)?;
    let rows = report::accuracy_rows(&records, source)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let write = |name: &str, text: String| -> Result<PathBuf> {
        let p = out.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    };
    let accuracy_tsv = write("accuracy.tsv", report::render_accuracy_tsv(&rows))?;
    let accuracy_txt = write("accuracy.txt", report::render_accuracy_text(&rows))?;
    let correlation = match features {
        Some(mut feats) => {
            report::attach_store_values(&mut feats, &records, target);
            let rep = report::correlations(&feats);
            Some((
                write("correlations.tsv", report::render_correlation_tsv(&rep))?,
                write("correlations.txt", report::render_correlation_text(&rep))?,
            ))
        }
        None => None,
    };
    Ok(ReportPaths {
        accuracy_tsv,
        accuracy_txt,
        correlation,
    })
}

/// Delta TSV and SVG of a store's ProFiT and Vanilla records.
pub fn plot_files(store_path: &Path, source: &str, out: &Path) -> Result<(PathBuf, PathBuf)> {
    let records = crate::store::read_store(store_path)?;
    let table = delta_table(&records, source).map_err(|_| plot::PlotError::EmptyInput)?;
    write_plot(&table, out)
}

pub fn write_plot(table: &DeltaTable, out: &Path) -> Result<(PathBuf, PathBuf)> {
    let svg = plot::render_svg(table)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let tsv_path = out.join("deltas.tsv");
    let svg_path = out.join("deltas.svg");
    std::fs::write(&tsv_path, plot::render_delta_tsv(table)).map_err(|e| Error::io(&tsv_path, e))?;
    std::fs::write(&svg_path, svg).map_err(|e| Error::io(&svg_path, e))?;
    Ok((tsv_path, svg_path))
}
