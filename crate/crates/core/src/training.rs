//! MAJ, Direct, Vanilla and ProFiT as runnable procedures, and the
//! multi-seed runner.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::backend::{BackendError, Head, MaskedLm, Target};
use crate::data::{sample_few_shot, DataError, Dataset};
use crate::eval::{self, EvalError, RunRecord};
use crate::pvp::{candidate_token_ids, encode_plain, verbalizer_targets, PvpError, TaskSpec};
use crate::rng::{derive_seed, mix64, Prng};

/// The seeds every canonical multi-seed run uses.
pub const CANONICAL_SEEDS: [u64; 5] = [10, 42, 421, 510, 1218];

/// Shots per class of the canonical few-shot sweep.
pub const CANONICAL_SHOTS: [u32; 11] = [1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid run configuration: {0}")]
    ConfigInvalid(String),
    #[error("no seeds given")]
    NoSeeds,
    #[error(transparent)]
    Pvp(#[from] PvpError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    /// Majority class of the training labels.
    Maj,
    /// Pattern prediction with the unmodified backend.
    Direct,
    /// Fresh classification head on the whole-input features.
    Vanilla,
    /// Prompt-based finetuning of the masked-LM head.
    Profit,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Maj, Method::Direct, Method::Vanilla, Method::Profit];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Maj => "MAJ",
            Method::Direct => "Direct",
            Method::Vanilla => "Vanilla",
            Method::Profit => "ProFiT",
        }
    }

    pub fn is_finetuned(self) -> bool {
        matches!(self, Method::Vanilla | Method::Profit)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| TrainError::ConfigInvalid(format!("unknown method {s:?}")))
    }
}

/// Training set size: K examples per class, or the whole training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Shots {
    K(u32),
    Full,
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::K(k) => write!(f, "{k}"),
            Shots::Full => f.write_str("full"),
        }
    }
}

impl FromStr for Shots {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("full") {
            return Ok(Shots::Full);
        }
        match s.parse::<u32>() {
            Ok(k) if k > 0 => Ok(Shots::K(k)),
            _ => Err(TrainError::ConfigInvalid(format!("bad shot count {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task_id: String,
    pub method: Method,
    pub seed: u64,
    pub shots: Shots,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub grad_accum_steps: usize,
    pub max_seq_length: usize,
    pub early_stopping_patience: Option<usize>,
}

impl RunConfig {
    /// Defaults: full data trains 5 epochs with batch 8 and 4 accumulation
    /// steps; few-shot trains up to 50 epochs with batch 1, 2 accumulation
    /// steps and patience 3. Both use lr 1e-5 and 128 tokens.
    pub fn new(task_id: impl Into<String>, method: Method, shots: Shots, seed: u64) -> Self {
        let (epochs, batch_size, grad_accum_steps, early_stopping_patience) = match shots {
            Shots::Full => (5, 8, 4, None),
            Shots::K(_) => (50, 1, 2, Some(3)),
        };
        Self {
            task_id: task_id.into(),
            method,
            seed,
            shots,
            epochs,
            lr: 1e-5,
            batch_size,
            grad_accum_steps,
            max_seq_length: 128,
            early_stopping_patience,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: &str| Err(TrainError::ConfigInvalid(msg.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive and finite");
        }
        if self.batch_size == 0 || self.grad_accum_steps == 0 {
            return bad("batch size and accumulation steps must be positive");
        }
        if self.max_seq_length == 0 {
            return bad("max_seq_length must be positive");
        }
        if self.early_stopping_patience == Some(0) {
            return bad("patience must be positive when set");
        }
        if matches!(self.shots, Shots::K(0)) {
            return bad("K must be positive");
        }
        Ok(())
    }

    /// Identifier of this configuration's run under `prefix`.
    pub fn run_id(&self, prefix: &str) -> String {
        format!("{prefix}:{}:{}:{}", self.method, self.shots, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    /// Mean batch loss of each epoch, measured before each update.
    pub train_loss: Vec<f64>,
    /// Dev accuracy after each epoch, when a dev set was given.
    pub dev_accuracy: Vec<Option<f64>>,
    /// Number of epochs run.
    pub stopped_epoch: usize,
    /// 1-based epoch with the best dev accuracy.
    pub best_epoch: Option<usize>,
}

/// Patience bookkeeping on a dev metric.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: Option<usize>,
    best: Option<(f64, usize)>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: Option<usize>) -> Self {
        Self {
            patience,
            best: None,
            stale: 0,
        }
    }

    /// Records the metric of 1-based `epoch`. Returns whether it is a new best.
    pub fn observe(&mut self, epoch: usize, value: f64) -> bool {
        match self.best {
            Some((best, _)) if value <= best => {
                self.stale += 1;
                false
            }
            _ => {
                self.best = Some((value, epoch));
                self.stale = 0;
                true
            }
        }
    }

    pub fn should_stop(&self) -> bool {
        self.patience.is_some_and(|p| self.stale >= p)
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|(_, e)| e)
    }
}

/// Accuracy of predicting the train-majority label (lowest label on ties)
/// everywhere in `test`.
pub fn run_maj(train: &Dataset, test: &Dataset) -> Result<f64, TrainError> {
    let label = majority_label(train)?;
    let gold = test.labels()?;
    if gold.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    Ok(gold.iter().filter(|&&y| y == label).count() as f64 / gold.len() as f64)
}

pub fn majority_label(train: &Dataset) -> Result<usize, TrainError> {
    let labels = train.labels()?;
    if labels.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let top = labels.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0usize; top + 1];
    for y in labels {
        counts[y] += 1;
    }
    let mut best = 0;
    for (y, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = y;
        }
    }
    Ok(best)
}

/// Predictions and accuracy of the pattern with the backend as is.
pub fn run_direct<B: MaskedLm + ?Sized>(
    backend: &B,
    task: &TaskSpec,
    test: &Dataset,
    max_len: usize,
) -> Result<(Vec<usize>, f64), TrainError> {
    let preds = eval::predict_all(backend, Method::Direct, task, &test.examples, max_len)?;
    let acc = eval::accuracy(&preds, &test.labels()?)?;
    Ok((preds, acc))
}

fn training_targets<B: MaskedLm + ?Sized>(
    backend: &B,
    method: Method,
    task: &TaskSpec,
    train: &Dataset,
    max_len: usize,
) -> Result<Vec<Target>, TrainError> {
    match method {
        Method::Profit => {
            let candidates = candidate_token_ids(&task.pvp, backend)?;
            let refs: Vec<&crate::data::Example> = train.examples.iter().collect();
            Ok(verbalizer_targets(backend, &task.pvp, &refs, max_len, &candidates)?)
        }
        Method::Vanilla => train
            .examples
            .iter()
            .enumerate()
            .map(|(i, ex)| {
                let class = ex.label.ok_or(DataError::Unlabeled(i))?;
                Ok(Target {
                    tokens: encode_plain(ex, backend, max_len),
                    class,
                })
            })
            .collect(),
        other => Err(TrainError::ConfigInvalid(format!("{other} is not finetuned"))),
    }
}

/// Epoch order: a pure function of `(seed, epoch)`.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    Prng::new(derive_seed(seed, "shuffle") ^ mix64(epoch as u64)).shuffle(&mut order);
    order
}

/// Finetunes `backend` in place with Vanilla or ProFiT.
///
/// Each epoch walks a seeded shuffle in batches of `batch_size`. Batch mean
/// gradients are summed over `grad_accum_steps` batches and the step uses
/// their mean; a partial accumulation at the end of an epoch still steps.
/// ProFiT trains the masked-LM head on the verbalizer loss, Vanilla a freshly
/// zeroed classification head. With a patience, training stops after that
/// many epochs without a strictly better dev accuracy and the best epoch's
/// parameters are restored.
pub fn finetune<B: MaskedLm + ?Sized>(
    backend: &mut B,
    task: &TaskSpec,
    train: &Dataset,
    dev: Option<&Dataset>,
    config: &RunConfig,
) -> Result<TrainHistory, TrainError> {
    config.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if config.early_stopping_patience.is_some() && dev.is_none_or(Dataset::is_empty) {
        return Err(TrainError::ConfigInvalid(String::from(
            "early stopping needs a non-empty dev set",
        )));
    }
    let method = config.method;
    if method == Method::Vanilla {
        backend.reset_cls_head(&task.task_id, task.num_labels());
    }
    let head = match method {
        Method::Profit => Head::Mlm,
        Method::Vanilla => Head::Cls {
            task_id: &task.task_id,
            num_labels: task.num_labels(),
        },
        other => return Err(TrainError::ConfigInvalid(format!("{other} is not finetuned"))),
    };
    let targets = training_targets(backend, method, task, train, config.max_seq_length)?;

    let mut history = TrainHistory::default();
    let mut stopper = EarlyStopping::new(config.early_stopping_patience);
    let mut best_params: Option<Vec<f64>> = None;
    let mut grad = vec![0.0; backend.parameters().len()];
    let mut pending = 0usize;
    let mut batch: Vec<Target> = Vec::with_capacity(config.batch_size);

    for epoch in 0..config.epochs {
        let order = epoch_order(targets.len(), config.seed, epoch);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| targets[i].clone()));
            let n = batch.len() as f64;
            loss_sum += backend.accumulate_gradient(&batch, head, 1.0 / n, &mut grad)? / n;
            batches += 1;
            pending += 1;
            if pending == config.grad_accum_steps {
                apply_accumulated(backend, &mut grad, &mut pending, config.lr)?;
            }
        }
        if pending > 0 {
            apply_accumulated(backend, &mut grad, &mut pending, config.lr)?;
        }
        history.train_loss.push(loss_sum / batches as f64);
        history.stopped_epoch = epoch + 1;

        match dev {
            Some(dev) if !dev.is_empty() => {
                let acc = eval::evaluate(backend, method, task, dev, config.max_seq_length)?;
                history.dev_accuracy.push(Some(acc));
                if stopper.observe(epoch + 1, acc) && config.early_stopping_patience.is_some() {
                    best_params = Some(backend.parameters().to_vec());
                }
                if stopper.should_stop() {
                    break;
                }
            }
            _ => history.dev_accuracy.push(None),
        }
    }
    history.best_epoch = stopper.best_epoch();
    if let Some(best) = best_params {
        backend.parameters_mut().copy_from_slice(&best);
    }
    Ok(history)
}

fn apply_accumulated<B: MaskedLm + ?Sized>(
    backend: &mut B,
    grad: &mut [f64],
    pending: &mut usize,
    lr: f64,
) -> Result<(), TrainError> {
    let scale = 1.0 / *pending as f64;
    for g in grad.iter_mut() {
        *g *= scale;
    }
    backend.sgd_step(grad, lr)?;
    grad.fill(0.0);
    *pending = 0;
    Ok(())
}

/// Inputs shared by every seed of a multi-seed run.
#[derive(Debug, Clone, Copy)]
pub struct Experiment<'a> {
    pub run_id: &'a str,
    pub task: &'a TaskSpec,
    /// Source-language training pool.
    pub train: &'a Dataset,
    /// Source-language dev set used in full-data mode.
    pub dev: Option<&'a Dataset>,
    /// Test sets, one per language.
    pub tests: &'a [Dataset],
}

/// Result of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub records: Vec<RunRecord>,
    pub history: Option<TrainHistory>,
    /// Final parameters of the run's model (unchanged for MAJ and Direct).
    pub params: Vec<f64>,
}

/// Sample, train and evaluate once with `config.seed` on a copy of `base`.
pub fn run_once<B: MaskedLm + Clone>(
    base: &B,
    exp: &Experiment<'_>,
    config: &RunConfig,
) -> Result<RunOutcome, TrainError> {
    config.validate()?;
    if exp.tests.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let (train, dev) = match config.shots {
        Shots::K(k) => {
            let (tr, dv) = sample_few_shot(exp.train, exp.task.num_labels(), k as usize, config.seed)?;
            (tr, Some(dv))
        }
        Shots::Full => (exp.train.clone(), exp.dev.cloned()),
    };

    let mut model = base.clone();
    let mut history = None;
    let mut maj_label = None;
    match config.method {
        Method::Maj => maj_label = Some(majority_label(&train)?),
        Method::Direct => {}
        Method::Vanilla | Method::Profit => {
            history = Some(finetune(&mut model, exp.task, &train, dev.as_ref(), config)?);
        }
    }

    let run_id = config.run_id(exp.run_id);
    let mut records = Vec::with_capacity(exp.tests.len());
    for test in exp.tests {
        let accuracy = match maj_label {
            Some(label) => {
                let gold = test.labels()?;
                if gold.is_empty() {
                    return Err(TrainError::EmptyDataset);
                }
                gold.iter().filter(|&&y| y == label).count() as f64 / gold.len() as f64
            }
            None => eval::evaluate(&model, config.method, exp.task, test, config.max_seq_length)?,
        };
        records.push(RunRecord {
            run_id: run_id.clone(),
            task_id: exp.task.task_id.clone(),
            method: config.method,
            backend: model.name().to_string(),
            seed: config.seed,
            shots: config.shots,
            language: test.language.clone(),
            accuracy,
            timestamp: None,
        });
    }
    Ok(RunOutcome {
        records,
        history,
        params: model.parameters().to_vec(),
    })
}

/// One full run per seed; records in seed order.
pub fn multi_seed_run<B: MaskedLm + Clone>(
    base: &B,
    exp: &Experiment<'_>,
    config: &RunConfig,
    seeds: &[u64],
) -> Result<Vec<RunRecord>, TrainError> {
    if seeds.is_empty() {
        return Err(TrainError::NoSeeds);
    }
    let mut records = Vec::new();
    for &seed in seeds {
        let cfg = RunConfig {
            seed,
            ..config.clone()
        };
        records.extend(run_once(base, exp, &cfg)?.records);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{params_digest, BasicTokenizer, ConstantBackend, ReferenceBackend};
    use crate::data::{Example, Split};
    use crate::pvp::PatternVerbalizerPair;
    use proptest::prelude::*;

    fn labeled(texts: &[(&str, usize)]) -> Dataset {
        Dataset::new(
            "sent",
            "en",
            Split::Train,
            texts
                .iter()
                .map(|(t, y)| Example::new(vec![t.to_string()], Some(*y), "en"))
                .collect(),
        )
    }

    fn sentiment_task() -> TaskSpec {
        let pvp = PatternVerbalizerPair::from_template_str("sent", "{1} It was {MASK}.", &["bad", "great"])
            .unwrap();
        TaskSpec::new("sent", 1, pvp, vec!["neg".into(), "pos".into()], 0).unwrap()
    }

    fn toy_backend() -> ReferenceBackend {
        ReferenceBackend::new("ref", ["bad", "great", "it", "was"], 64)
    }

    fn toy_config(method: Method) -> RunConfig {
        RunConfig {
            lr: 0.5,
            epochs: 50,
            early_stopping_patience: None,
            ..RunConfig::new("sent", method, Shots::K(2), 1)
        }
    }

    #[test]
    fn table_defaults() {
        let full = RunConfig::new("xnli", Method::Profit, Shots::Full, 42);
        assert_eq!(
            (full.epochs, full.lr, full.batch_size, full.grad_accum_steps, full.max_seq_length),
            (5, 1e-5, 8, 4, 128)
        );
        assert_eq!(full.early_stopping_patience, None);
        let few = RunConfig::new("xnli", Method::Profit, Shots::K(8), 42);
        assert_eq!(
            (few.epochs, few.lr, few.batch_size, few.grad_accum_steps, few.max_seq_length),
            (50, 1e-5, 1, 2, 128)
        );
        assert_eq!(few.early_stopping_patience, Some(3));
    }

    #[test]
    fn method_and_shots_parse() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert_eq!("profit".parse::<Method>().unwrap(), Method::Profit);
        assert_eq!("full".parse::<Shots>().unwrap(), Shots::Full);
        assert_eq!("64".parse::<Shots>().unwrap(), Shots::K(64));
        assert!("0".parse::<Shots>().is_err());
        assert!(Shots::K(1024) < Shots::Full);
    }

    #[test]
    fn maj_examples() {
        let balanced = labeled(&[("a", 0), ("b", 1), ("c", 2)]);
        assert!((run_maj(&balanced, &balanced).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let train = labeled(&[("a", 1), ("b", 1), ("c", 0)]);
        let test = labeled(&[("a", 1), ("b", 1), ("c", 1), ("d", 0), ("e", 0)]);
        assert!((run_maj(&train, &test).unwrap() - 0.6).abs() < 1e-15);
        let tie = labeled(&[("a", 1), ("b", 0)]);
        assert_eq!(majority_label(&tie).unwrap(), 0);
        let empty = labeled(&[]);
        assert_eq!(run_maj(&empty, &test), Err(TrainError::EmptyDataset));
    }

    #[test]
    fn maj_on_balanced_k_classes() {
        for k in [5usize, 2, 3] {
            let rows: Vec<(&str, usize)> = (0..k * 4).map(|i| ("x", i % k)).collect();
            let ds = labeled(&rows);
            assert!((run_maj(&ds, &ds).unwrap() - 1.0 / k as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn patience_arithmetic() {
        let mut s = EarlyStopping::new(Some(3));
        let mut stopped = 0;
        for (e, acc) in [0.5, 0.5, 0.5, 0.5, 0.5].into_iter().enumerate() {
            s.observe(e + 1, acc);
            if s.should_stop() {
                stopped = e + 1;
                break;
            }
        }
        assert_eq!(stopped, 4);
        assert_eq!(s.best_epoch(), Some(1));
        let mut none = EarlyStopping::new(None);
        for e in 1..10 {
            none.observe(e, 0.1);
        }
        assert!(!none.should_stop());
    }

    #[test]
    fn direct_is_read_only_and_ties_to_zero() {
        let b = toy_backend();
        let before = params_digest(b.parameters());
        let test = labeled(&[("x", 1), ("y", 0), ("z", 1), ("w", 0)]);
        let (preds, acc) = run_direct(&b, &sentiment_task(), &test, 128).unwrap();
        assert_eq!(preds, [0, 0, 0, 0]);
        assert!((acc - 0.5).abs() < 1e-15);
        assert_eq!(params_digest(b.parameters()), before);
    }

    #[test]
    fn profit_fits_one_example() {
        let mut b = toy_backend();
        let train = labeled(&[("lovely day", 1)]);
        // loss after t steps is about 1 / (6 lr t) here, so a large step
        let cfg = RunConfig {
            batch_size: 1,
            grad_accum_steps: 1,
            lr: 5.0,
            ..toy_config(Method::Profit)
        };
        let hist = finetune(&mut b, &sentiment_task(), &train, Some(&train), &cfg).unwrap();
        assert!(*hist.train_loss.last().unwrap() < 1e-3, "{:?}", hist.train_loss.last());
        assert_eq!(hist.dev_accuracy.last().unwrap(), &Some(1.0));
        assert_eq!(hist.stopped_epoch, 50);
    }

    #[test]
    fn four_example_separable_toy_set() {
        let train = labeled(&[
            ("awful boring", 0),
            ("dull awful", 0),
            ("lovely fun", 1),
            ("fun brilliant", 1),
        ]);
        for method in [Method::Profit, Method::Vanilla] {
            let mut b = toy_backend();
            finetune(&mut b, &sentiment_task(), &train, None, &toy_config(method)).unwrap();
            let preds = eval::predict_all(&b, method, &sentiment_task(), &train.examples, 128).unwrap();
            assert_eq!(preds, [0, 0, 1, 1], "{method}");
        }
    }

    #[test]
    fn finetune_is_deterministic() {
        let train = labeled(&[("a b", 0), ("c d", 1), ("a c", 0), ("d b", 1)]);
        let cfg = RunConfig {
            epochs: 5,
            seed: 510,
            ..toy_config(Method::Profit)
        };
        let mut x = toy_backend();
        let mut y = toy_backend();
        finetune(&mut x, &sentiment_task(), &train, Some(&train), &cfg).unwrap();
        finetune(&mut y, &sentiment_task(), &train, Some(&train), &cfg).unwrap();
        assert_eq!(x.parameters(), y.parameters());
    }

    #[test]
    fn methods_touch_only_their_head() {
        let task = sentiment_task();
        let train = labeled(&[("a b", 0), ("c d", 1)]);
        let mut b = toy_backend();
        b.reset_cls_head("sent", 2);
        let groups = b.parameter_groups();
        let digest = |b: &ReferenceBackend, g: usize| params_digest(&b.parameters()[groups[g].range.clone()]);

        let mut p = b.clone();
        finetune(&mut p, &task, &train, None, &toy_config(Method::Profit)).unwrap();
        assert_eq!(digest(&p, 1), digest(&b, 1));
        assert_ne!(digest(&p, 0), digest(&b, 0));

        let mut v = b.clone();
        finetune(&mut v, &task, &train, None, &toy_config(Method::Vanilla)).unwrap();
        assert_eq!(digest(&v, 0), digest(&b, 0));
        assert_ne!(digest(&v, 1), digest(&b, 1));
    }

    #[test]
    fn early_stop_restores_best() {
        let task = sentiment_task();
        let train = labeled(&[("a b", 0), ("c d", 1), ("a d", 0), ("c b", 1)]);
        // dev disagrees with train, so accuracy peaks early
        let dev = labeled(&[("a b", 1), ("c d", 0)]);
        let mut b = toy_backend();
        let cfg = RunConfig {
            early_stopping_patience: Some(2),
            ..toy_config(Method::Profit)
        };
        let hist = finetune(&mut b, &task, &train, Some(&dev), &cfg).unwrap();
        assert!(hist.stopped_epoch < 50);
        let best = hist.dev_accuracy[hist.best_epoch.unwrap() - 1].unwrap();
        assert!(hist.dev_accuracy.iter().all(|a| a.unwrap() <= best));
        let after = eval::evaluate(&b, Method::Profit, &task, &dev, 128).unwrap();
        assert_eq!(after, best);
        assert_eq!(hist.dev_accuracy.len(), hist.train_loss.len());
    }

    #[test]
    fn invalid_configs() {
        let task = sentiment_task();
        let train = labeled(&[("a", 0)]);
        let mut b = toy_backend();
        let cfg = RunConfig {
            lr: -1.0,
            ..toy_config(Method::Profit)
        };
        assert!(matches!(
            finetune(&mut b, &task, &train, None, &cfg),
            Err(TrainError::ConfigInvalid(_))
        ));
        assert!(matches!(
            finetune(&mut b, &task, &train, None, &toy_config(Method::Direct)),
            Err(TrainError::ConfigInvalid(_))
        ));
        assert_eq!(
            finetune(&mut b, &task, &labeled(&[]), None, &toy_config(Method::Profit)),
            Err(TrainError::EmptyDataset)
        );
        let patient = RunConfig {
            early_stopping_patience: Some(3),
            ..toy_config(Method::Profit)
        };
        assert!(finetune(&mut b, &task, &train, None, &patient).is_err());
    }

    fn constant_fake() -> ConstantBackend {
        ConstantBackend::new(
            BasicTokenizer::new("[MASK]"),
            vec!["bad".into(), "great".into()],
            vec![0.3, 0.7],
            vec![0.6, 0.4],
        )
    }

    #[test]
    fn multi_seed_with_constant_fake() {
        let task = sentiment_task();
        let pool = labeled(&[("a", 0), ("b", 0), ("c", 1), ("d", 1)]);
        let tests = [labeled(&[("x", 1), ("y", 1), ("z", 0)])];
        let exp = Experiment {
            run_id: "fake",
            task: &task,
            train: &pool,
            dev: None,
            tests: &tests,
        };
        for method in Method::ALL {
            let cfg = RunConfig::new("sent", method, Shots::K(1), 0);
            let records = multi_seed_run(&constant_fake(), &exp, &cfg, &CANONICAL_SEEDS).unwrap();
            assert_eq!(records.len(), 5);
            let seeds: Vec<u64> = records.iter().map(|r| r.seed).collect();
            assert_eq!(seeds, CANONICAL_SEEDS);
            let first = records[0].accuracy;
            assert!(records.iter().all(|r| r.accuracy == first), "{method}");
            let mean = eval::mean_by_language(&records);
            assert!((mean[0].1 - first).abs() < 1e-12);
        }
        assert_eq!(
            multi_seed_run(&constant_fake(), &exp, &RunConfig::new("sent", Method::Direct, Shots::Full, 0), &[]),
            Err(TrainError::NoSeeds)
        );
    }

    #[test]
    fn multi_seed_mean_is_arithmetic_mean() {
        let task = sentiment_task();
        let pool = labeled(&[
            ("a b", 0), ("b c", 0), ("a c", 0), ("c a", 0),
            ("d e", 1), ("e f", 1), ("d f", 1), ("f d", 1),
        ]);
        let tests = [labeled(&[("a", 0), ("d", 1), ("b e", 1), ("c f", 0)])];
        let exp = Experiment {
            run_id: "ref",
            task: &task,
            train: &pool,
            dev: None,
            tests: &tests,
        };
        let cfg = RunConfig {
            lr: 0.3,
            epochs: 3,
            early_stopping_patience: None,
            ..RunConfig::new("sent", Method::Profit, Shots::K(2), 0)
        };
        let records = multi_seed_run(&toy_backend(), &exp, &cfg, &CANONICAL_SEEDS).unwrap();
        let sum: f64 = records.iter().map(|r| r.accuracy).sum();
        let mean = eval::mean_by_language(&records)[0].1;
        assert!((mean - sum / 5.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn shuffle_is_pure_in_seed_and_epoch(n in 0usize..64, seed in any::<u64>(), epoch in 0usize..100) {
            let a = epoch_order(n, seed, epoch);
            prop_assert_eq!(&a, &epoch_order(n, seed, epoch));
            let mut sorted = a.clone();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn accumulation_equivalence(lr in 0.01f64..1.0) {
            // identical examples give constant per-batch gradients at the
            // starting point; (batch 1, accum 2) and (batch 2, accum 1) take
            // the same single step
            let task = sentiment_task();
            let train = labeled(&[("same words", 1), ("same words", 1)]);
            let base = RunConfig { lr, epochs: 1, ..toy_config(Method::Profit) };
            let mut a = toy_backend();
            finetune(&mut a, &task, &train, None, &RunConfig { batch_size: 1, grad_accum_steps: 2, ..base.clone() }).unwrap();
            let mut b = toy_backend();
            finetune(&mut b, &task, &train, None, &RunConfig { batch_size: 2, grad_accum_steps: 1, ..base }).unwrap();
            prop_assert_eq!(a.parameters(), b.parameters());
        }
    }
}
