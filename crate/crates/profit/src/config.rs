//! Experiment manifests.
//!
//! A manifest is a TOML file of flat sections (`manifest`, `task`,
//! `training`, `data` or `synth`, `backend`, `output`, `decisions`); values
//! are scalars or flat arrays of scalars. Unknown sections and keys are
//! rejected. Training keys left out take the defaults of the shot mode.

use std::path::{Path, PathBuf};

use profit_core::data::{synth_task, SynthConfig, SOURCE_LANGUAGE};
use profit_core::pvp::PatternVerbalizerPair;
use profit_core::training::{Method, RunConfig, Shots, CANONICAL_SEEDS};
use profit_core::TaskSpec;
use thiserror::Error;
use toml::{Table, Value};

pub const MANIFEST_VERSION: i64 = 1;
pub const DATA_DIR_ENV: &str = "PROFIT_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("missing config file {0}")]
    MissingFile(PathBuf),
    #[error("syntax: {0}")]
    Syntax(String),
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("wrong type for {0:?}")]
    TypeError(String),
    #[error("missing key {0:?}")]
    MissingKey(String),
    #[error("{key}: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

/// Training grid plus hyperparameter overrides. `None` means the default of
/// the shot mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSpec {
    pub methods: Vec<Method>,
    pub shots: Vec<Shots>,
    pub seeds: Vec<u64>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub grad_accum_steps: Option<usize>,
    pub max_seq_length: Option<usize>,
    /// `Some(None)` switches early stopping off explicitly.
    pub early_stopping_patience: Option<Option<usize>>,
}

impl TrainingSpec {
    pub fn run_config(&self, task_id: &str, method: Method, shots: Shots, seed: u64) -> RunConfig {
        let mut cfg = RunConfig::new(task_id, method, shots, seed);
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.grad_accum_steps {
            cfg.grad_accum_steps = v;
        }
        if let Some(v) = self.max_seq_length {
            cfg.max_seq_length = v;
        }
        if let Some(v) = self.early_stopping_patience {
            cfg.early_stopping_patience = v;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataFiles {
    /// Root for relative paths; falls back to `PROFIT_DATA_DIR`, then the
    /// manifest's directory.
    pub dir: Option<PathBuf>,
    pub train: PathBuf,
    pub dev: Option<PathBuf>,
    pub test_languages: Vec<String>,
    /// Test file path with `{lang}` substituted.
    pub test_template: String,
    pub source_language: String,
}

impl DataFiles {
    pub fn root(&self, manifest_dir: &Path) -> PathBuf {
        match &self.dir {
            Some(d) => d.clone(),
            None => std::env::var_os(DATA_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| manifest_dir.to_path_buf()),
        }
    }

    pub fn test_path(&self, lang: &str) -> PathBuf {
        PathBuf::from(self.test_template.replace("{lang}", lang))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files(DataFiles),
    Synth(SynthConfig),
}

impl DataSource {
    pub fn source_language(&self) -> &str {
        match self {
            DataSource::Files(f) => &f.source_language,
            DataSource::Synth(_) => SOURCE_LANGUAGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendSpec {
    pub name: String,
    /// Load this checkpoint instead of pretraining.
    pub checkpoint: Option<PathBuf>,
    pub dim: usize,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    pub pretrain_seed: u64,
}

impl Default for BackendSpec {
    fn default() -> Self {
        let r = profit_core::backend::ReferenceConfig::default();
        Self {
            name: r.name,
            checkpoint: None,
            dim: r.dim,
            pretrain_epochs: r.epochs,
            pretrain_lr: r.lr,
            pretrain_seed: r.seed,
        }
    }
}

/// Behaviour the code implements where the method leaves a choice. Recorded
/// in every manifest; a manifest asking for anything else is rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decisions {
    pub tie_break: String,
    pub truncation: String,
    pub dev_metric: String,
    pub restore: String,
}

impl Default for Decisions {
    fn default() -> Self {
        Self {
            tie_break: "lowest-label".into(),
            truncation: "longer-segment-first".into(),
            dev_metric: "accuracy".into(),
            restore: "best-dev-when-patience".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub version: i64,
    pub run_id: String,
    pub task: TaskSpec,
    pub training: TrainingSpec,
    pub data: DataSource,
    pub backend: BackendSpec,
    pub output_dir: PathBuf,
    pub decisions: Decisions,
}

struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &'static str) -> Result<Self, ConfigError> {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => return Err(ConfigError::TypeError(name.into())),
        };
        Ok(Self { name, table })
    }

    fn present(&self) -> bool {
        self.table.is_some()
    }

    fn key(&self, k: &str) -> String {
        format!("{}.{k}", self.name)
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        for k in self.table.into_iter().flat_map(|t| t.keys()) {
            if !allowed.contains(&k.as_str()) {
                return Err(ConfigError::UnknownKey(self.key(k)));
            }
        }
        Ok(())
    }

    fn get(&self, k: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(k))
    }

    fn string(&self, k: &str) -> Result<Option<String>, ConfigError> {
        match self.get(k) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(ConfigError::TypeError(self.key(k))),
        }
    }

    fn int(&self, k: &str) -> Result<Option<i64>, ConfigError> {
        match self.get(k) {
            None => Ok(None),
            Some(Value::Integer(i)) => Ok(Some(*i)),
            Some(_) => Err(ConfigError::TypeError(self.key(k))),
        }
    }

    fn uint(&self, k: &str) -> Result<Option<u64>, ConfigError> {
        self.int(k)?
            .map(|i| u64::try_from(i).map_err(|_| ConfigError::TypeError(self.key(k))))
            .transpose()
    }

    fn usize(&self, k: &str) -> Result<Option<usize>, ConfigError> {
        Ok(self.uint(k)?.map(|v| v as usize))
    }

    fn float(&self, k: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(k) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(*f)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(ConfigError::TypeError(self.key(k))),
        }
    }

    fn strings(&self, k: &str) -> Result<Option<Vec<String>>, ConfigError> {
        match self.get(k) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s.clone()),
                    _ => Err(ConfigError::TypeError(self.key(k))),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(_) => Err(ConfigError::TypeError(self.key(k))),
        }
    }

    /// Array whose items may be integers or strings, as text.
    fn words(&self, k: &str) -> Result<Option<Vec<String>>, ConfigError> {
        match self.get(k) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s.clone()),
                    Value::Integer(i) => Ok(i.to_string()),
                    _ => Err(ConfigError::TypeError(self.key(k))),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(_) => Err(ConfigError::TypeError(self.key(k))),
        }
    }

    fn required<T>(&self, k: &str, v: Option<T>) -> Result<T, ConfigError> {
        v.ok_or_else(|| ConfigError::MissingKey(self.key(k)))
    }
}

const SECTIONS: [&str; 8] = [
    "manifest", "task", "training", "data", "synth", "backend", "output", "decisions",
];

pub fn parse_manifest(text: &str) -> Result<Manifest, ConfigError> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.message().to_string()))?;
    for (k, v) in &root {
        if !SECTIONS.contains(&k.as_str()) {
            return Err(ConfigError::UnknownKey(k.clone()));
        }
        if let Value::Table(t) = v {
            if let Some((inner, _)) = t.iter().find(|(_, v)| v.is_table()) {
                return Err(invalid(&format!("{k}.{inner}"), "nested sections are not allowed"));
            }
        }
    }

    let man = Section::new(&root, "manifest")?;
    man.check_keys(&["version", "run_id"])?;
    let version = man.int("version")?.unwrap_or(MANIFEST_VERSION);
    if version != MANIFEST_VERSION {
        return Err(invalid("manifest.version", format!("unsupported version {version}")));
    }

    let synth = Section::new(&root, "synth")?;
    synth.check_keys(&[
        "num_languages",
        "vocab_size",
        "anchor_fraction",
        "sentences_per_language",
        "num_labels",
        "seed",
    ])?;
    let data = Section::new(&root, "data")?;
    data.check_keys(&["dir", "train", "dev", "test_languages", "test_template", "source_language"])?;
    let source = match (data.present(), synth.present()) {
        (true, true) => return Err(invalid("data", "give either [data] or [synth], not both")),
        (false, false) => return Err(ConfigError::MissingKey("data".into())),
        (false, true) => {
            let d = SynthConfig::default();
            let cfg = SynthConfig {
                num_languages: synth.usize("num_languages")?.unwrap_or(d.num_languages),
                vocab_size: synth.usize("vocab_size")?.unwrap_or(d.vocab_size),
                anchor_fraction: synth.float("anchor_fraction")?.unwrap_or(d.anchor_fraction),
                sentences_per_language: synth
                    .usize("sentences_per_language")?
                    .unwrap_or(d.sentences_per_language),
                num_labels: synth.usize("num_labels")?.unwrap_or(d.num_labels),
                seed: synth.uint("seed")?.unwrap_or(d.seed),
            };
            cfg.validate().map_err(|e| invalid("synth", e.to_string()))?;
            DataSource::Synth(cfg)
        }
        (true, false) => DataSource::Files(DataFiles {
            dir: data.string("dir")?.map(PathBuf::from),
            train: PathBuf::from(data.required("train", data.string("train")?)?),
            dev: data.string("dev")?.map(PathBuf::from),
            test_languages: data.required("test_languages", data.strings("test_languages")?)?,
            test_template: data
                .string("test_template")?
                .unwrap_or_else(|| "{lang}/test.tsv".into()),
            source_language: data
                .string("source_language")?
                .unwrap_or_else(|| SOURCE_LANGUAGE.into()),
        }),
    };
    if let DataSource::Files(f) = &source {
        if f.test_languages.is_empty() {
            return Err(invalid("data.test_languages", "at least one language"));
        }
    }

    let task = parse_task(&Section::new(&root, "task")?, &source)?;

    let tr = Section::new(&root, "training")?;
    tr.check_keys(&[
        "methods",
        "shots",
        "seeds",
        "epochs",
        "learning_rate",
        "batch_size",
        "grad_accum_steps",
        "max_seq_length",
        "early_stopping_patience",
    ])?;
    let methods = tr
        .required("methods", tr.strings("methods")?)?
        .iter()
        .map(|m| m.parse::<Method>().map_err(|_| invalid("training.methods", format!("unknown method {m:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if methods.is_empty() {
        return Err(invalid("training.methods", "at least one method"));
    }
    let shots = match tr.words("shots")? {
        None => vec![Shots::Full],
        Some(v) => v
            .iter()
            .map(|s| s.parse::<Shots>().map_err(|_| invalid("training.shots", format!("bad shot {s:?}"))))
            .collect::<Result<Vec<_>, _>>()?,
    };
    let seeds = match tr.get("seeds") {
        None => CANONICAL_SEEDS.to_vec(),
        Some(Value::Array(a)) => a
            .iter()
            .map(|v| match v {
                Value::Integer(i) if *i >= 0 => Ok(*i as u64),
                _ => Err(ConfigError::TypeError("training.seeds".into())),
            })
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(ConfigError::TypeError("training.seeds".into())),
    };
    if shots.is_empty() || seeds.is_empty() {
        return Err(invalid("training", "shots and seeds must not be empty"));
    }
    let early_stopping_patience = match tr.get("early_stopping_patience") {
        None => None,
        Some(Value::String(s)) if s == "none" => Some(None),
        Some(Value::Integer(i)) if *i > 0 => Some(Some(*i as usize)),
        Some(_) => return Err(ConfigError::TypeError("training.early_stopping_patience".into())),
    };
    let training = TrainingSpec {
        methods,
        shots,
        seeds,
        epochs: tr.usize("epochs")?,
        lr: tr.float("learning_rate")?,
        batch_size: tr.usize("batch_size")?,
        grad_accum_steps: tr.usize("grad_accum_steps")?,
        max_seq_length: tr.usize("max_seq_length")?,
        early_stopping_patience,
    };
    for &shots in &training.shots {
        training
            .run_config(&task.task_id, training.methods[0], shots, training.seeds[0])
            .validate()
            .map_err(|e| invalid("training", e.to_string()))?;
    }

    let be = Section::new(&root, "backend")?;
    be.check_keys(&["kind", "name", "checkpoint", "dim", "pretrain_epochs", "pretrain_lr", "pretrain_seed"])?;
    if let Some(kind) = be.string("kind")? {
        if kind != "reference" {
            return Err(invalid("backend.kind", format!("unsupported backend {kind:?}")));
        }
    }
    let d = BackendSpec::default();
    let backend = BackendSpec {
        name: be.string("name")?.unwrap_or(d.name),
        checkpoint: be.string("checkpoint")?.map(PathBuf::from),
        dim: be.usize("dim")?.unwrap_or(d.dim),
        pretrain_epochs: be.usize("pretrain_epochs")?.unwrap_or(d.pretrain_epochs),
        pretrain_lr: be.float("pretrain_lr")?.unwrap_or(d.pretrain_lr),
        pretrain_seed: be.uint("pretrain_seed")?.unwrap_or(d.pretrain_seed),
    };
    if backend.dim == 0 || backend.name.contains(['\t', '\n']) {
        return Err(invalid("backend", "dim must be positive and name a single line"));
    }

    let out = Section::new(&root, "output")?;
    out.check_keys(&["dir"])?;
    let output_dir = PathBuf::from(out.string("dir")?.unwrap_or_else(|| "runs".into()));

    let dec = Section::new(&root, "decisions")?;
    dec.check_keys(&["tie_break", "truncation", "dev_metric", "restore"])?;
    let implemented = Decisions::default();
    let decisions = Decisions {
        tie_break: dec.string("tie_break")?.unwrap_or(implemented.tie_break.clone()),
        truncation: dec.string("truncation")?.unwrap_or(implemented.truncation.clone()),
        dev_metric: dec.string("dev_metric")?.unwrap_or(implemented.dev_metric.clone()),
        restore: dec.string("restore")?.unwrap_or(implemented.restore.clone()),
    };
    if decisions != implemented {
        return Err(invalid("decisions", format!("only {implemented:?} is implemented")));
    }

    let run_id = man.string("run_id")?.unwrap_or_else(|| task.task_id.clone());
    if run_id.is_empty() || run_id.contains(['\t', '\n', ':']) {
        return Err(invalid("manifest.run_id", "must be non-empty without tabs, newlines or colons"));
    }

    Ok(Manifest {
        version,
        run_id,
        task,
        training,
        data: source,
        backend,
        output_dir,
        decisions,
    })
}

fn parse_task(sec: &Section<'_>, source: &DataSource) -> Result<TaskSpec, ConfigError> {
    sec.check_keys(&["id", "template", "verbalizer", "labels", "arity", "label_offset"])?;
    let id = sec.string("id")?;
    let custom = ["template", "verbalizer", "labels", "arity", "label_offset"]
        .iter()
        .any(|k| sec.get(k).is_some());
    if !custom {
        return match (id.as_deref(), source) {
            (None | Some("synth"), DataSource::Synth(s)) => Ok(synth_task(s.num_labels)),
            (Some(id), _) => TaskSpec::builtin_by_id(id)
                .ok_or_else(|| invalid("task.id", format!("{id:?} is not a built-in task; give template and verbalizer"))),
            (None, _) => Err(ConfigError::MissingKey("task.id".into())),
        };
    }
    let id = sec.required("id", id)?;
    let template = sec.required("template", sec.string("template")?)?;
    let verbalizer = sec.required("verbalizer", sec.strings("verbalizer")?)?;
    let labels = sec.words("labels")?.unwrap_or_else(|| verbalizer.clone());
    let words: Vec<&str> = verbalizer.iter().map(String::as_str).collect();
    let pvp = PatternVerbalizerPair::from_template_str(id.clone(), &template, &words)
        .map_err(|e| invalid("task", e.to_string()))?;
    let arity = sec.usize("arity")?.unwrap_or_else(|| pvp.arity().max(1));
    let offset = sec.int("label_offset")?.unwrap_or(0);
    TaskSpec::new(id, arity, pvp, labels, offset).map_err(|e| invalid("task", e.to_string()))
}

pub fn load_manifest(path: &Path) -> Result<Manifest, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|_| ConfigError::MissingFile(path.to_path_buf()))?;
    parse_manifest(&text)
}

fn q(s: &str) -> String {
    Value::String(s.to_string()).to_string()
}

fn list<T, F: Fn(&T) -> String>(items: &[T], f: F) -> String {
    format!("[{}]", items.iter().map(f).collect::<Vec<_>>().join(", "))
}

fn path_str(p: &Path) -> String {
    q(&p.to_string_lossy())
}

impl Manifest {
    /// Canonical TOML text; parsing it gives back an equal manifest.
    pub fn emit(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        let mut out = String::new();
        out.push_str("[manifest]\n");
        line("version", self.version.to_string());
        line("run_id", q(&self.run_id));

        let t = &self.task;
        let mut task = String::from("\n[task]\n");
        task.push_str(&format!("id = {}\n", q(&t.task_id)));
        task.push_str(&format!("template = {}\n", q(&t.pvp.template_string())));
        task.push_str(&format!("verbalizer = {}\n", list(t.pvp.verbalizer(), |w| q(w))));
        task.push_str(&format!("labels = {}\n", list(&t.label_names, |w| q(w))));
        task.push_str(&format!("arity = {}\n", t.arity));
        task.push_str(&format!("label_offset = {}\n", t.label_offset));

        let tr = &self.training;
        let mut training = String::from("\n[training]\n");
        training.push_str(&format!("methods = {}\n", list(&tr.methods, |m| q(m.as_str()))));
        training.push_str(&format!("shots = {}\n", list(&tr.shots, |k| q(&k.to_string()))));
        training.push_str(&format!("seeds = {}\n", list(&tr.seeds, |x| x.to_string())));
        let opt = |k: &str, v: Option<String>| v.map(|v| format!("{k} = {v}\n")).unwrap_or_default();
        training.push_str(&opt("epochs", tr.epochs.map(|v| v.to_string())));
        training.push_str(&opt("learning_rate", tr.lr.map(|v| Value::Float(v).to_string())));
        training.push_str(&opt("batch_size", tr.batch_size.map(|v| v.to_string())));
        training.push_str(&opt("grad_accum_steps", tr.grad_accum_steps.map(|v| v.to_string())));
        training.push_str(&opt("max_seq_length", tr.max_seq_length.map(|v| v.to_string())));
        training.push_str(&opt(
            "early_stopping_patience",
            tr.early_stopping_patience.map(|p| match p {
                Some(v) => v.to_string(),
                None => q("none"),
            }),
        ));

        let data = match &self.data {
            DataSource::Files(f) => {
                let mut d = String::from("\n[data]\n");
                if let Some(dir) = &f.dir {
                    d.push_str(&format!("dir = {}\n", path_str(dir)));
                }
                d.push_str(&format!("train = {}\n", path_str(&f.train)));
                if let Some(dev) = &f.dev {
                    d.push_str(&format!("dev = {}\n", path_str(dev)));
                }
                d.push_str(&format!("test_languages = {}\n", list(&f.test_languages, |w| q(w))));
                d.push_str(&format!("test_template = {}\n", q(&f.test_template)));
                d.push_str(&format!("source_language = {}\n", q(&f.source_language)));
                d
            }
            DataSource::Synth(c) => format!(
                "\n[synth]\nnum_languages = {}\nvocab_size = {}\nanchor_fraction = {}\n\
                 sentences_per_language = {}\nnum_labels = {}\nseed = {}\n",
                c.num_languages,
                c.vocab_size,
                Value::Float(c.anchor_fraction),
                c.sentences_per_language,
                c.num_labels,
                c.seed
            ),
        };

        let b = &self.backend;
        let mut backend = format!("\n[backend]\nkind = \"reference\"\nname = {}\n", q(&b.name));
        if let Some(cp) = &b.checkpoint {
            backend.push_str(&format!("checkpoint = {}\n", path_str(cp)));
        }
        backend.push_str(&format!(
            "dim = {}\npretrain_epochs = {}\npretrain_lr = {}\npretrain_seed = {}\n",
            b.dim,
            b.pretrain_epochs,
            Value::Float(b.pretrain_lr),
            b.pretrain_seed
        ));

        let d = &self.decisions;
        out.push_str(&s);
        out.push_str(&task);
        out.push_str(&training);
        out.push_str(&data);
        out.push_str(&backend);
        out.push_str(&format!("\n[output]\ndir = {}\n", path_str(&self.output_dir)));
        out.push_str(&format!(
            "\n[decisions]\ntie_break = {}\ntruncation = {}\ndev_metric = {}\nrestore = {}\n",
            q(&d.tie_break),
            q(&d.truncation),
            q(&d.dev_metric),
            q(&d.restore)
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[task]\nid = \"xnli\"\n[training]\nmethods = [\"profit\"]\n\
                           [data]\ntrain = \"en/train.tsv\"\ntest_languages = [\"en\", \"de\"]\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let m = parse_manifest(MINIMAL).unwrap();
        assert_eq!(m.task, TaskSpec::xnli());
        assert_eq!(m.training.seeds, CANONICAL_SEEDS);
        assert_eq!(m.training.shots, [Shots::Full]);
        let full = m.training.run_config("xnli", Method::Profit, Shots::Full, 10);
        assert_eq!((full.epochs, full.batch_size, full.grad_accum_steps), (5, 8, 4));
        assert_eq!((full.lr, full.max_seq_length, full.early_stopping_patience), (1e-5, 128, None));
        let few = m.training.run_config("xnli", Method::Profit, Shots::K(8), 10);
        assert_eq!((few.epochs, few.batch_size, few.grad_accum_steps), (50, 1, 2));
        assert_eq!(few.early_stopping_patience, Some(3));
    }

    #[test]
    fn typo_is_unknown_key() {
        assert_eq!(
            parse_manifest(&MINIMAL.replace("[data]", "learnig_rate = 0.1\n[data]")),
            Err(ConfigError::UnknownKey("training.learnig_rate".into()))
        );
        assert!(matches!(parse_manifest("[nonsense]\n"), Err(ConfigError::UnknownKey(_))));
    }

    #[test]
    fn wrong_type() {
        let text = MINIMAL.replace("methods = [\"profit\"]", "methods = [\"profit\"]\nepochs = \"five\"");
        assert_eq!(parse_manifest(&text), Err(ConfigError::TypeError("training.epochs".into())));
    }

    #[test]
    fn emit_round_trips() {
        let m = parse_manifest(MINIMAL).unwrap();
        assert_eq!(parse_manifest(&m.emit()).unwrap(), m);

        let text = "[manifest]\nrun_id = \"s\"\n[training]\nmethods = [\"Vanilla\", \"ProFiT\"]\n\
                    shots = [1, 8, \"full\"]\nseeds = [3]\nlearning_rate = 0.5\nearly_stopping_patience = \"none\"\n\
                    [synth]\nanchor_fraction = 1.0\nseed = 11\n[backend]\ndim = 64\ncheckpoint = \"m.bin\"\n";
        let m = parse_manifest(text).unwrap();
        assert_eq!(m.task.task_id, "synth");
        assert_eq!(m.training.early_stopping_patience, Some(None));
        assert_eq!(parse_manifest(&m.emit()).unwrap(), m);
    }

    #[test]
    fn custom_task() {
        let text = "[task]\nid = \"sent\"\ntemplate = \"{1} It was {MASK}.\"\nverbalizer = [\"bad\", \"good\"]\n\
                    labels = [1, 2]\nlabel_offset = 1\n[training]\nmethods = [\"direct\"]\n\
                    [data]\ntrain = \"t.tsv\"\ntest_languages = [\"en\"]\n";
        let m = parse_manifest(text).unwrap();
        assert_eq!(m.task.arity, 1);
        assert_eq!(m.task.label_names, ["1", "2"]);
        assert_eq!(parse_manifest(&m.emit()).unwrap(), m);
    }

    #[test]
    fn unimplemented_decision_rejected() {
        let text = format!("{MINIMAL}[decisions]\ntie_break = \"random\"\n");
        assert!(matches!(parse_manifest(&text), Err(ConfigError::Invalid { .. })));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_manifest(Path::new("/nonexistent/x.toml")),
            Err(ConfigError::MissingFile(_))
        ));
    }
}
