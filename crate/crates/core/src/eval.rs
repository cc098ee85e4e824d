//! Cross-lingual evaluation, source-excluded aggregation and the few-shot
//! delta sweep.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::backend::MaskedLm;
use crate::data::{DataError, Dataset, Example};
use crate::pvp::{argmax, candidate_token_ids, encode_plain, predict_with_candidates, PvpError, TaskSpec};
use crate::training::{multi_seed_run, Experiment, Method, RunConfig, Shots, TrainError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("only the source language is present")]
    OnlySourcePresent,
    #[error("nothing to evaluate")]
    EmptyInput,
    #[error("{0} has no per-example predictor")]
    Unsupported(Method),
    #[error("{0} predictions for {1} gold labels")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Pvp(#[from] PvpError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// One accuracy observation: a (run, language) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_id: String,
    pub task_id: String,
    pub method: Method,
    pub backend: String,
    pub seed: u64,
    pub shots: Shots,
    pub language: String,
    pub accuracy: f64,
    /// Wall-clock seconds, when the caller has a clock. Not part of the
    /// persisted record.
    pub timestamp: Option<u64>,
}

/// Predicted labels. Direct and ProFiT score verbalizer words at the mask;
/// Vanilla takes the argmax of the task's classification head.
pub fn predict_all<B: MaskedLm + ?Sized>(
    backend: &B,
    method: Method,
    task: &TaskSpec,
    examples: &[Example],
    max_len: usize,
) -> Result<Vec<usize>, EvalError> {
    match method {
        Method::Direct | Method::Profit => {
            let candidates = candidate_token_ids(&task.pvp, backend)?;
            examples
                .iter()
                .map(|ex| Ok(predict_with_candidates(backend, &task.pvp, ex, max_len, &candidates)?))
                .collect()
        }
        Method::Vanilla => Ok(examples
            .iter()
            .map(|ex| {
                let tokens = encode_plain(ex, backend, max_len);
                argmax(&backend.cls_distribution(&tokens, &task.task_id, task.num_labels()))
            })
            .collect()),
        Method::Maj => Err(EvalError::Unsupported(method)),
    }
}

/// Exact-match fraction.
pub fn accuracy(predictions: &[usize], gold: &[usize]) -> Result<f64, EvalError> {
    if predictions.len() != gold.len() {
        return Err(EvalError::LengthMismatch(predictions.len(), gold.len()));
    }
    if gold.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let hits = predictions.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Accuracy of `method` on a labeled test set, with the source pattern and
/// verbalizer unchanged.
pub fn evaluate<B: MaskedLm + ?Sized>(
    backend: &B,
    method: Method,
    task: &TaskSpec,
    test: &Dataset,
    max_len: usize,
) -> Result<f64, EvalError> {
    let gold = test.labels()?;
    let preds = predict_all(backend, method, task, &test.examples, max_len)?;
    accuracy(&preds, &gold)
}

/// Unweighted mean over every language except `source`.
pub fn aggregate_excluding_source<'a, I>(per_language: I, source: &str) -> Result<f64, EvalError>
where
    I: IntoIterator<Item = (&'a str, f64)>,
{
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut any = false;
    for (lang, acc) in per_language {
        any = true;
        if lang != source {
            sum += acc;
            n += 1;
        }
    }
    match (any, n) {
        (false, _) => Err(EvalError::EmptyInput),
        (true, 0) => Err(EvalError::OnlySourcePresent),
        _ => Ok(sum / n as f64),
    }
}

/// Mean accuracy per language over all given records, in first-seen
/// language order.
pub fn mean_by_language(records: &[RunRecord]) -> Vec<(String, f64)> {
    let mut order: Vec<String> = Vec::new();
    let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = sums.entry(r.language.as_str()).or_insert_with(|| {
            order.push(r.language.clone());
            (0.0, 0)
        });
        e.0 += r.accuracy;
        e.1 += 1;
    }
    order
        .into_iter()
        .map(|l| {
            let (s, n) = sums[l.as_str()];
            (l, s / n as f64)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRow {
    pub task_id: String,
    pub backend: String,
    pub shots: Shots,
    pub profit: f64,
    pub vanilla: f64,
    /// `profit - vanilla`.
    pub delta: f64,
}

/// ProFiT minus Vanilla per (task, backend, K), rows sorted with K ascending
/// and the full-data row last.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeltaTable {
    pub rows: Vec<DeltaRow>,
}

impl DeltaTable {
    pub fn from_rows(mut rows: Vec<DeltaRow>) -> Self {
        rows.sort_by(|a, b| {
            (&a.task_id, &a.backend, a.shots).cmp(&(&b.task_id, &b.backend, b.shots))
        });
        Self { rows }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `(task, backend)` series in row order.
    pub fn series(&self) -> Vec<(&str, &str, Vec<&DeltaRow>)> {
        let mut out: Vec<(&str, &str, Vec<&DeltaRow>)> = Vec::new();
        for row in &self.rows {
            match out.last_mut() {
                Some((t, b, rows)) if *t == row.task_id && *b == row.backend => rows.push(row),
                _ => out.push((&row.task_id, &row.backend, alloc::vec![row])),
            }
        }
        out
    }
}

/// Mean over seeds per language, then over target languages.
fn method_mean(records: &[&RunRecord], source: &str) -> Result<f64, EvalError> {
    let owned: Vec<RunRecord> = records.iter().map(|r| (*r).clone()).collect();
    let per_lang = mean_by_language(&owned);
    aggregate_excluding_source(per_lang.iter().map(|(l, a)| (l.as_str(), *a)), source)
}

/// Builds the delta table from records holding both methods. Groups that
/// lack either method are skipped.
pub fn delta_table(records: &[RunRecord], source: &str) -> Result<DeltaTable, EvalError> {
    type Key = (String, String, Shots);
    let mut groups: BTreeMap<Key, (Vec<&RunRecord>, Vec<&RunRecord>)> = BTreeMap::new();
    for r in records {
        let key = (r.task_id.clone(), r.backend.clone(), r.shots);
        let slot = groups.entry(key).or_default();
        match r.method {
            Method::Profit => slot.0.push(r),
            Method::Vanilla => slot.1.push(r),
            _ => {}
        }
    }
    let mut rows = Vec::new();
    for ((task_id, backend, shots), (p, v)) in groups {
        if p.is_empty() || v.is_empty() {
            continue;
        }
        let profit = method_mean(&p, source)?;
        let vanilla = method_mean(&v, source)?;
        rows.push(DeltaRow {
            task_id,
            backend,
            shots,
            profit,
            vanilla,
            delta: profit - vanilla,
        });
    }
    if rows.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(DeltaTable::from_rows(rows))
}

/// Runs Vanilla and ProFiT over every seed at every shot setting and returns
/// the delta table together with all records.
///
/// `template` supplies the hyperparameters; its shot count, method and seed
/// are replaced per run, and the Table-style defaults for the other shot
/// mode are not applied.
pub fn fewshot_sweep<B: MaskedLm + Clone>(
    base: &B,
    exp: &Experiment<'_>,
    template: &RunConfig,
    shots: &[Shots],
    seeds: &[u64],
    source: &str,
) -> Result<(DeltaTable, Vec<RunRecord>), TrainError> {
    if shots.is_empty() {
        return Err(TrainError::Eval(EvalError::EmptyInput));
    }
    let mut records = Vec::new();
    for &k in shots {
        for method in [Method::Vanilla, Method::Profit] {
            let cfg = RunConfig {
                method,
                shots: k,
                ..template.clone()
            };
            records.extend(multi_seed_run(base, exp, &cfg, seeds)?);
        }
    }
    let table = delta_table(&records, source)?;
    Ok((table, records))
}
