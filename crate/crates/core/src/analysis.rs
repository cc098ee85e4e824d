//! Language similarity aggregation, correlation statistics and the paired
//! t-test.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("missing feature {0}")]
    MissingFeature(&'static str),
    #[error("zero variance")]
    ZeroVariance,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("too few points: {0}")]
    TooFewPoints(usize),
    #[error("non-finite input")]
    NonFinite,
}

/// One language's similarity features and per-(task, model) accuracies.
///
/// Similarities are cosine x 100; `size` is log2 of the Wikipedia article
/// count. `accuracies` is keyed by column name such as `"xnli-M"`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LanguageFeatureRow {
    pub language: String,
    pub syn: Option<f64>,
    pub pho: Option<f64>,
    pub inv: Option<f64>,
    pub fam: Option<f64>,
    pub geo: Option<f64>,
    pub umap: Option<f64>,
    pub svd: Option<f64>,
    pub size: Option<f64>,
    /// Sim1 as printed in the source table, kept for comparison.
    pub reported_sim1: Option<f64>,
    /// Sim2 as printed in the source table, kept for comparison.
    pub reported_sim2: Option<f64>,
    pub accuracies: BTreeMap<String, f64>,
}

/// Mean of the five typological similarities.
pub fn sim1(row: &LanguageFeatureRow) -> Result<f64, AnalysisError> {
    let parts = [
        (row.syn, "syn"),
        (row.pho, "pho"),
        (row.inv, "inv"),
        (row.fam, "fam"),
        (row.geo, "geo"),
    ];
    let mut sum = 0.0;
    for (v, name) in parts {
        sum += v.ok_or(AnalysisError::MissingFeature(name))?;
    }
    Ok(sum / 5.0)
}

/// Mean of the two lexical similarities.
pub fn sim2(row: &LanguageFeatureRow) -> Result<f64, AnalysisError> {
    let u = row.umap.ok_or(AnalysisError::MissingFeature("umap"))?;
    let s = row.svd.ok_or(AnalysisError::MissingFeature("svd"))?;
    Ok((u + s) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Factor {
    Sim1,
    Sim2,
    Size,
}

impl Factor {
    pub const ALL: [Factor; 3] = [Factor::Sim1, Factor::Sim2, Factor::Size];

    pub fn as_str(self) -> &'static str {
        match self {
            Factor::Sim1 => "sim1",
            Factor::Sim2 => "sim2",
            Factor::Size => "size",
        }
    }

    pub fn value(self, row: &LanguageFeatureRow) -> Result<f64, AnalysisError> {
        match self {
            Factor::Sim1 => sim1(row),
            Factor::Sim2 => sim2(row),
            Factor::Size => row.size.ok_or(AnalysisError::MissingFeature("size")),
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stat {
    Pearson,
    Spearman,
}

impl Stat {
    pub const ALL: [Stat; 2] = [Stat::Pearson, Stat::Spearman];

    /// One-letter label used in reports.
    pub fn letter(self) -> &'static str {
        match self {
            Stat::Pearson => "P",
            Stat::Spearman => "S",
        }
    }
}

/// Coefficient, two-tailed p-value and sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub value: f64,
    pub p: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
}

const CF_EPS: f64 = 1e-15;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 10_000;

/// Continued fraction of the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b)
        + a * libm::log(x)
        + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-tailed Student-t p-value, `P(|T| >= |t|)` with `df` degrees of
/// freedom: `I_{df/(df+t^2)}(df/2, 1/2)`.
pub fn student_t_two_tailed(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    inc_beta(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<usize, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(AnalysisError::TooFewPoints(x.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }
    Ok(x.len())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// p-value of a correlation coefficient from `t = r sqrt((n-2)/(1-r^2))`.
/// A perfect correlation has p = 0.
pub fn correlation_p(r: f64, n: usize) -> f64 {
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    student_t_two_tailed(r * libm::sqrt(df / denom), df)
}

fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalysisError::ZeroVariance);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation, AnalysisError> {
    let n = check_pair(x, y)?;
    let r = pearson_r(x, y)?;
    Ok(Correlation {
        value: r,
        p: correlation_p(r, n),
        n,
    })
}

/// 1-based ranks with ties given the mean of the positions they span.
pub fn fractional_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = alloc::vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of the fractional ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Correlation, AnalysisError> {
    let n = check_pair(x, y)?;
    let r = pearson_r(&fractional_ranks(x), &fractional_ranks(y))?;
    Ok(Correlation {
        value: r,
        p: correlation_p(r, n),
        n,
    })
}

/// Two-tailed paired t-test on `d = b - a`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest, AnalysisError> {
    if a.len() != b.len() {
        return Err(AnalysisError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(AnalysisError::TooFewPoints(a.len()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let n = d.len() as f64;
    let md = mean(&d);
    let var = d.iter().map(|v| (v - md) * (v - md)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Err(AnalysisError::ZeroVariance);
    }
    let t = md / libm::sqrt(var / n);
    let df = d.len() - 1;
    Ok(TTest {
        t,
        p: student_t_two_tailed(t, df as f64),
        df,
    })
}

/// One (column, factor, statistic) cell of a correlation report.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCell {
    /// Accuracy column, e.g. `"xnli-M"`.
    pub column: String,
    pub factor: Factor,
    pub stat: Stat,
    pub result: Result<Correlation, AnalysisError>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrelationReport {
    pub cells: Vec<CorrelationCell>,
}

impl CorrelationReport {
    pub fn get(&self, column: &str, factor: Factor, stat: Stat) -> Option<&CorrelationCell> {
        self.cells
            .iter()
            .find(|c| c.column == column && c.factor == factor && c.stat == stat)
    }
}

/// `(factor values, accuracies)` over the languages that have both.
pub fn paired_values(rows: &[LanguageFeatureRow], column: &str, factor: Factor) -> (Vec<f64>, Vec<f64>) {
    rows.iter()
        .filter_map(|r| Some((factor.value(r).ok()?, *r.accuracies.get(column)?)))
        .unzip()
}

/// Six cells (3 factors x 2 statistics) per accuracy column, with missing
/// values deleted pairwise per factor. Failures stay in their cell.
pub fn correlation_report(rows: &[LanguageFeatureRow], columns: &[&str]) -> CorrelationReport {
    let mut cells = Vec::new();
    for &column in columns {
        for factor in Factor::ALL {
            let (x, y) = paired_values(rows, column, factor);
            for stat in Stat::ALL {
                let result = match stat {
                    Stat::Pearson => pearson(&x, &y),
                    Stat::Spearman => spearman(&x, &y),
                };
                cells.push(CorrelationCell {
                    column: String::from(column),
                    factor,
                    stat,
                    result,
                });
            }
        }
    }
    CorrelationReport { cells }
}
