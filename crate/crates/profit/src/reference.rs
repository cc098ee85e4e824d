//! Published result tables shipped with the crate.
//!
//! Absolute accuracies are reference data for aggregation and correlation
//! checks; nothing here is claimed to be reproducible by training.

use std::collections::BTreeMap;

use profit_core::analysis::{Factor, LanguageFeatureRow, Stat};
use profit_core::eval::{aggregate_excluding_source, DeltaRow, DeltaTable};
use profit_core::training::Shots;

use crate::features::parse_features;
use crate::tsv::TsvError;

pub const OVERVIEW: &str = include_str!("../data/overview.tsv");
pub const FULL_RESULTS: &str = include_str!("../data/full_results.tsv");
pub const LANGUAGE_FEATURES: &str = include_str!("../data/language_features.tsv");
pub const PRINTED_CORRELATIONS: &str = include_str!("../data/printed_correlations.tsv");
pub const AMAZON_FEWSHOT: &str = include_str!("../data/amazon_fewshot.tsv");
pub const PAWSX_FEWSHOT: &str = include_str!("../data/pawsx_fewshot.tsv");
pub const XNLI_FEWSHOT: &str = include_str!("../data/xnli_fewshot.tsv");

/// Per-language cell of a results table. The language `avg` holds the
/// printed average.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultCell {
    pub task: String,
    pub shots: Shots,
    pub method: String,
    pub model: String,
    pub language: String,
    pub accuracy: f64,
}

fn malformed(line: usize, reason: impl Into<String>) -> TsvError {
    TsvError::MalformedRow {
        line,
        reason: reason.into(),
    }
}

pub fn parse_results(text: &str) -> Result<Vec<ResultCell>, TsvError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(malformed(i + 1, "expected 6 fields"));
        }
        out.push(ResultCell {
            task: f[0].into(),
            shots: f[1].parse().map_err(|_| malformed(i + 1, "bad shot"))?,
            method: f[2].into(),
            model: f[3].into(),
            language: f[4].into(),
            accuracy: f[5].parse().map_err(|_| malformed(i + 1, "bad accuracy"))?,
        });
    }
    Ok(out)
}

fn shipped(text: &str) -> Vec<ResultCell> {
    parse_results(text).expect("shipped table parses")
}

/// Full-data results per language.
pub fn full_results() -> Vec<ResultCell> {
    shipped(FULL_RESULTS)
}

/// Few-shot results of all three tasks.
pub fn fewshot_tables() -> Vec<ResultCell> {
    [AMAZON_FEWSHOT, PAWSX_FEWSHOT, XNLI_FEWSHOT].iter().flat_map(|t| shipped(t)).collect()
}

pub fn language_features() -> Vec<LanguageFeatureRow> {
    parse_features(LANGUAGE_FEATURES).expect("shipped table parses")
}

/// Printed average next to the one recomputed from the language cells.
#[derive(Debug, Clone, PartialEq)]
pub struct AvgCheck {
    pub task: String,
    pub shots: Shots,
    pub method: String,
    pub model: String,
    pub printed: f64,
    pub recomputed: f64,
}

/// One check per (task, shots, method, model) row that prints an average.
pub fn avg_checks(cells: &[ResultCell], source: &str) -> Vec<AvgCheck> {
    type Key = (String, Shots, String, String);
    type Group<'a> = (Option<f64>, Vec<(&'a str, f64)>);
    let mut groups: BTreeMap<Key, Group> = BTreeMap::new();
    for c in cells {
        let g = groups
            .entry((c.task.clone(), c.shots, c.method.clone(), c.model.clone()))
            .or_default();
        if c.language == "avg" {
            g.0 = Some(c.accuracy);
        } else {
            g.1.push((&c.language, c.accuracy));
        }
    }
    groups
        .into_iter()
        .filter_map(|((task, shots, method, model), (printed, langs))| {
            let recomputed = aggregate_excluding_source(langs.iter().copied(), source).ok()?;
            Some(AvgCheck {
                task,
                shots,
                method,
                model,
                printed: printed?,
                recomputed,
            })
        })
        .collect()
}

pub fn model_name(letter: &str) -> &str {
    match letter {
        "M" => "mBERT",
        "X" => "XLM-R",
        other => other,
    }
}

/// ProFiT minus Vanilla from the printed average rows.
pub fn reference_delta_table(cells: &[ResultCell]) -> DeltaTable {
    type Key = (String, String, Shots);
    let mut avgs: BTreeMap<Key, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for c in cells.iter().filter(|c| c.language == "avg") {
        let e = avgs
            .entry((c.task.clone(), model_name(&c.model).to_string(), c.shots))
            .or_default();
        match c.method.as_str() {
            "ProFiT" => e.0 = Some(c.accuracy),
            "Vanilla" => e.1 = Some(c.accuracy),
            _ => {}
        }
    }
    DeltaTable::from_rows(
        avgs.into_iter()
            .filter_map(|((task_id, backend, shots), (p, v))| {
                let (profit, vanilla) = (p?, v?);
                Some(DeltaRow {
                    task_id,
                    backend,
                    shots,
                    profit,
                    vanilla,
                    delta: profit - vanilla,
                })
            })
            .collect(),
    )
}

/// A printed correlation cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PrintedCorrelation {
    pub task: String,
    pub model: String,
    pub stat: Stat,
    pub factor: Factor,
    pub corr: f64,
    pub p_text: String,
    pub insignificant: bool,
}

impl PrintedCorrelation {
    /// Accuracy column of the feature table this cell correlates.
    pub fn column(&self) -> String {
        format!("{}-{}", self.task, self.model)
    }
}

pub fn printed_correlations() -> Vec<PrintedCorrelation> {
    PRINTED_CORRELATIONS
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            PrintedCorrelation {
                task: f[0].into(),
                model: f[1].into(),
                stat: if f[2] == "P" { Stat::Pearson } else { Stat::Spearman },
                factor: match f[3] {
                    "sim1" => Factor::Sim1,
                    "sim2" => Factor::Sim2,
                    _ => Factor::Size,
                },
                corr: f[4].parse().expect("shipped table parses"),
                p_text: f[5].into(),
                insignificant: f[6] == "1",
            }
        })
        .collect()
}

/// Overview row: method, model, then per-task averages and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct OverviewRow {
    pub method: String,
    pub model: String,
    pub amazon: f64,
    pub pawsx: f64,
    pub xnli: f64,
    pub avg: f64,
}

pub fn overview() -> Vec<OverviewRow> {
    OVERVIEW
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            let num = |s: &str| s.parse::<f64>().expect("shipped table parses");
            OverviewRow {
                method: f[0].into(),
                model: f[1].into(),
                amazon: num(f[2]),
                pawsx: num(f[3]),
                xnli: num(f[4]),
                avg: num(f[5]),
            }
        })
        .collect()
}
