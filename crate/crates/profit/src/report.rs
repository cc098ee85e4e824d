//! Per-language accuracy reports and feature correlation reports.
//! Both are pure functions of their inputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use profit_core::analysis::{correlation_report, AnalysisError, CorrelationReport, Factor, LanguageFeatureRow, Stat};
use profit_core::eval::{aggregate_excluding_source, RunRecord};
use profit_core::training::{Method, Shots};

use crate::store::StoreError;

/// Mean accuracy of one language over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageMean {
    pub language: String,
    pub mean: f64,
    /// Number of seeds averaged; 1 is flagged in the rendering.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRow {
    pub task: String,
    pub method: Method,
    pub backend: String,
    pub shots: Shots,
    pub languages: Vec<LanguageMean>,
    /// Mean over languages other than the source; `None` when only the
    /// source was evaluated.
    pub avg: Option<f64>,
}

impl AccuracyRow {
    pub fn single_seed(&self) -> bool {
        self.languages.iter().any(|l| l.n == 1)
    }
}

/// Groups records by (task, method, backend, K), averages each language over
/// seeds, then averages languages without `source`.
pub fn accuracy_rows(records: &[RunRecord], source: &str) -> Result<Vec<AccuracyRow>, StoreError> {
    if records.is_empty() {
        return Err(StoreError::EmptyStore);
    }
    type Key = (String, Method, String, Shots);
    let mut groups: BTreeMap<Key, Vec<(String, f64, usize)>> = BTreeMap::new();
    for r in records {
        let langs = groups
            .entry((r.task_id.clone(), r.method, r.backend.clone(), r.shots))
            .or_default();
        match langs.iter_mut().find(|(l, _, _)| *l == r.language) {
            Some(e) => {
                e.1 += r.accuracy;
                e.2 += 1;
            }
            None => langs.push((r.language.clone(), r.accuracy, 1)),
        }
    }
    Ok(groups
        .into_iter()
        .map(|((task, method, backend, shots), langs)| {
            let languages: Vec<LanguageMean> = langs
                .into_iter()
                .map(|(language, sum, n)| LanguageMean {
                    language,
                    mean: sum / n as f64,
                    n,
                })
                .collect();
            let avg = aggregate_excluding_source(languages.iter().map(|l| (l.language.as_str(), l.mean)), source).ok();
            AccuracyRow {
                task,
                method,
                backend,
                shots,
                languages,
                avg,
            }
        })
        .collect())
}

/// Long-format TSV: one line per language plus an `avg` line per row.
pub fn render_accuracy_tsv(rows: &[AccuracyRow]) -> String {
    let mut out = String::from("task\tmethod\tbackend\tK\tlanguage\tmean\tn\n");
    for r in rows {
        let prefix = format!("{}\t{}\t{}\t{}", r.task, r.method, r.backend, r.shots);
        for l in &r.languages {
            let _ = writeln!(out, "{prefix}\t{}\t{}\t{}", l.language, l.mean, l.n);
        }
        if let Some(avg) = r.avg {
            let _ = writeln!(out, "{prefix}\tavg\t{avg}\t{}", r.languages.len());
        }
    }
    out
}

/// Text table with percentages to two decimals. Languages averaged over a
/// single seed are marked with `!`.
pub fn render_accuracy_text(rows: &[AccuracyRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let _ = write!(out, "{} {} {} K={} |", r.task, r.method, r.backend, r.shots);
        for l in &r.languages {
            let flag = if l.n == 1 { "!" } else { "" };
            let _ = write!(out, " {} {:.2}{flag}", l.language, 100.0 * l.mean);
        }
        match r.avg {
            Some(avg) => {
                let _ = writeln!(out, " | avg {:.2}", 100.0 * avg);
            }
            None => out.push_str(" | avg -\n"),
        }
    }
    if rows.iter().any(AccuracyRow::single_seed) {
        out.push_str("! n=1: a single seed, no averaging\n");
    }
    out
}

/// p-value as printed in correlation tables: two decimals, or one
/// significant digit in scientific notation below 0.01.
pub fn format_p(p: f64) -> String {
    if p == 0.0 {
        return "0".into();
    }
    if p >= 0.01 {
        return format!("{p:.2}");
    }
    let s = format!("{p:.0e}");
    match s.split_once('e') {
        Some((m, e)) => {
            let e: i32 = e.parse().unwrap_or(0);
            format!("{m}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
        }
        None => s,
    }
}

pub fn is_insignificant(p: f64) -> bool {
    p > 0.05
}

fn error_text(e: &AnalysisError) -> &'static str {
    match e {
        AnalysisError::ZeroVariance => "zero-variance",
        AnalysisError::TooFewPoints(_) => "too-few-points",
        AnalysisError::MissingFeature(_) => "missing",
        AnalysisError::LengthMismatch(..) => "length-mismatch",
        AnalysisError::NonFinite => "non-finite",
    }
}

/// Correlation report over every accuracy column of the feature rows.
pub fn correlations(rows: &[LanguageFeatureRow]) -> CorrelationReport {
    let columns = crate::features::accuracy_columns(rows);
    let refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    correlation_report(rows, &refs)
}

pub fn render_correlation_tsv(report: &CorrelationReport) -> String {
    let mut out = String::from("column\tfactor\tstat\tcorr\tp\tn\tinsignificant\n");
    for c in &report.cells {
        let _ = write!(out, "{}\t{}\t{}\t", c.column, c.factor.as_str(), c.stat.letter());
        match &c.result {
            Ok(r) => {
                let _ = writeln!(out, "{}\t{}\t{}\t{}", r.value, r.p, r.n, u8::from(is_insignificant(r.p)));
            }
            Err(e) => {
                let _ = writeln!(out, "\t\t\t{}", error_text(e));
            }
        }
    }
    out
}

/// One line per (column, statistic), one cell per factor: `corr (p)` with
/// `*` when p > 0.05.
pub fn render_correlation_text(report: &CorrelationReport) -> String {
    let mut columns: Vec<&str> = Vec::new();
    for c in &report.cells {
        if !columns.contains(&c.column.as_str()) {
            columns.push(&c.column);
        }
    }
    let mut out = String::from("column\tstat");
    for f in Factor::ALL {
        let _ = write!(out, "\t{}", f.as_str());
    }
    out.push('\n');
    for col in columns {
        for stat in [Stat::Pearson, Stat::Spearman] {
            let _ = write!(out, "{col}\t{}", stat.letter());
            for f in Factor::ALL {
                let cell = match report.get(col, f, stat).map(|c| &c.result) {
                    Some(Ok(r)) => {
                        let star = if is_insignificant(r.p) { "*" } else { "" };
                        format!("{:.2} ({}){star}", r.value, format_p(r.p))
                    }
                    Some(Err(e)) => error_text(e).to_string(),
                    None => "-".into(),
                };
                let _ = write!(out, "\t{cell}");
            }
            out.push('\n');
        }
    }
    out.push_str("* p > 0.05\n");
    out
}

/// Adds a `<task>-<backend>` accuracy column from ProFiT records to the
/// feature rows of matching languages. Records are averaged over seeds and K.
/// What the correlation report correlates language features against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationTarget {
    /// Mean ProFiT accuracy per language.
    #[default]
    Accuracy,
    /// Mean ProFiT minus mean Vanilla accuracy per language.
    Delta,
}

fn means(records: &[RunRecord], method: Method) -> BTreeMap<(String, String), f64> {
    let mut sums: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.method == method) {
        let e = sums
            .entry((format!("{}-{}", r.task_id, r.backend), r.language.clone()))
            .or_default();
        e.0 += r.accuracy;
        e.1 += 1;
    }
    sums.into_iter().map(|(k, (sum, n))| (k, 100.0 * sum / n as f64)).collect()
}

/// Adds one `<task>-<backend>` accuracy column per store group to the
/// matching feature rows. Delta columns need both methods for a language.
pub fn attach_store_values(rows: &mut [LanguageFeatureRow], records: &[RunRecord], target: CorrelationTarget) {
    let profit = means(records, Method::Profit);
    let values: Vec<_> = match target {
        CorrelationTarget::Accuracy => profit.into_iter().collect(),
        CorrelationTarget::Delta => {
            let vanilla = means(records, Method::Vanilla);
            profit
                .into_iter()
                .filter_map(|(k, p)| vanilla.get(&k).map(|v| (k, p - v)))
                .collect()
        }
    };
    for ((column, lang), v) in values {
        if let Some(row) = rows.iter_mut().find(|r| r.language == lang) {
            row.accuracies.insert(column, v);
        }
    }
}

pub fn attach_profit_accuracies(rows: &mut [LanguageFeatureRow], records: &[RunRecord]) {
    attach_store_values(rows, records, CorrelationTarget::Accuracy);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(method: Method, seed: u64, lang: &str, acc: f64) -> RunRecord {
        RunRecord {
            run_id: format!("r:{method}:8:{seed}"),
            task_id: "synth".into(),
            method,
            backend: "reference".into(),
            seed,
            shots: Shots::K(8),
            language: lang.into(),
            accuracy: acc,
            timestamp: None,
        }
    }

    #[test]
    fn p_formatting() {
        assert_eq!(format_p(0.0482), "0.05");
        assert_eq!(format_p(0.3), "0.30");
        assert_eq!(format_p(9.2e-5), "9e-05");
        assert_eq!(format_p(0.0042), "4e-03");
        assert_eq!(format_p(0.0), "0");
    }

    #[test]
    fn single_record_flagged() {
        let rows = accuracy_rows(&[rec(Method::Profit, 1, "en", 0.5)], "en").unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].single_seed());
        assert_eq!(rows[0].avg, None);
        let text = render_accuracy_text(&rows);
        assert!(text.contains("en 50.00!"), "{text}");
        assert!(text.contains("n=1"));
    }

    #[test]
    fn means_over_seeds_then_languages() {
        let recs = [
            rec(Method::Profit, 1, "en", 0.9),
            rec(Method::Profit, 1, "s1", 0.4),
            rec(Method::Profit, 2, "s1", 0.6),
            rec(Method::Profit, 1, "s2", 0.2),
            rec(Method::Profit, 2, "s2", 0.2),
        ];
        let rows = accuracy_rows(&recs, "en").unwrap();
        assert!((rows[0].avg.unwrap() - 0.35).abs() < 1e-12);
        assert!(render_accuracy_tsv(&rows).contains("synth\tProFiT\treference\t8\tavg\t"));
    }

    #[test]
    fn empty_store() {
        assert!(matches!(accuracy_rows(&[], "en"), Err(StoreError::EmptyStore)));
    }

    #[test]
    fn report_is_stable() {
        let rows = crate::reference::language_features();
        let a = render_correlation_text(&correlations(&rows));
        let b = render_correlation_text(&correlations(&rows));
        assert_eq!(a, b);
        assert!(a.contains("xnli-M\tP"));
    }

    #[test]
    fn delta_target_needs_both_methods() {
        let recs = vec![
            rec(Method::Profit, 1, "de", 0.6),
            rec(Method::Profit, 2, "de", 0.8),
            rec(Method::Vanilla, 1, "de", 0.5),
            rec(Method::Profit, 1, "fr", 0.9),
        ];
        let blank = |l: &str| LanguageFeatureRow {
            language: l.into(),
            ..LanguageFeatureRow::default()
        };
        let mut rows = vec![blank("de"), blank("fr")];
        attach_store_values(&mut rows, &recs, CorrelationTarget::Delta);
        assert!((rows[0].accuracies["synth-reference"] - 20.0).abs() < 1e-9);
        assert!(rows[1].accuracies.is_empty());

        let mut rows = vec![blank("de"), blank("fr")];
        attach_store_values(&mut rows, &recs, CorrelationTarget::Accuracy);
        assert!((rows[0].accuracies["synth-reference"] - 70.0).abs() < 1e-9);
        assert!((rows[1].accuracies["synth-reference"] - 90.0).abs() < 1e-9);
    }
}
