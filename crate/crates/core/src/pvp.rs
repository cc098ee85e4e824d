//! Pattern-verbalizer pairs and the two core operations built on them:
//! classifying by the mask-position probability of each label word, and the
//! cross-entropy objective on the gold label word.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::backend::{BackendError, Head, MaskedLm, Target};
use crate::data::Example;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PvpError {
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("pattern must contain exactly one mask, found {0}")]
    MaskCount(usize),
    #[error("verbalizer needs at least two labels, got {0}")]
    TooFewLabels(usize),
    #[error("verbalizer is not injective: {0:?} appears twice")]
    NonInjective(String),
    #[error("input slot {{{slot}}} exceeds task arity {arity}")]
    SlotOutOfArity { slot: usize, arity: usize },
    #[error("pattern needs {needed} tokens but max_len is {max_len}")]
    PatternOverflow { needed: usize, max_len: usize },
    #[error("pattern expects {expected} segment(s), example has {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("label {0} is outside the verbalizer domain")]
    UnknownLabel(usize),
    #[error("verbalizer word {0:?} is not a single backend token")]
    VerbalizerNotSingleToken(String),
    #[error("verbalizer words {0:?} and {1:?} map to the same backend token")]
    VerbalizerCollision(String, String),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("example has no label")]
    Unlabeled,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// One piece of a cloze template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplatePart {
    Literal(String),
    /// 1-based input segment index.
    Input(usize),
    Mask,
}

/// A prompt pattern with exactly one mask slot plus a label -> word map.
///
/// Labels are 0-based; `verbalizer[y]` is the word for label `y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternVerbalizerPair {
    task_id: String,
    template: Vec<TemplatePart>,
    verbalizer: Vec<String>,
}

impl PatternVerbalizerPair {
    pub fn new(
        task_id: impl Into<String>,
        template: Vec<TemplatePart>,
        verbalizer: Vec<String>,
    ) -> Result<Self, PvpError> {
        let masks = template
            .iter()
            .filter(|p| matches!(p, TemplatePart::Mask))
            .count();
        if masks != 1 {
            return Err(PvpError::MaskCount(masks));
        }
        for part in &template {
            if let TemplatePart::Input(slot) = *part {
                if !(1..=2).contains(&slot) {
                    return Err(PvpError::SlotOutOfArity { slot, arity: 2 });
                }
            }
        }
        if verbalizer.len() < 2 {
            return Err(PvpError::TooFewLabels(verbalizer.len()));
        }
        for (i, word) in verbalizer.iter().enumerate() {
            if verbalizer[..i].contains(word) {
                return Err(PvpError::NonInjective(word.clone()));
            }
        }
        Ok(Self {
            task_id: task_id.into(),
            template,
            verbalizer,
        })
    }

    /// Builds a pair from a `{1}`/`{2}`/`{MASK}` placeholder template.
    pub fn from_template_str(
        task_id: impl Into<String>,
        template: &str,
        verbalizer: &[&str],
    ) -> Result<Self, PvpError> {
        Self::new(
            task_id,
            parse_template(template)?,
            verbalizer.iter().map(|w| w.to_string()).collect(),
        )
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn template(&self) -> &[TemplatePart] {
        &self.template
    }

    pub fn verbalizer(&self) -> &[String] {
        &self.verbalizer
    }

    pub fn num_labels(&self) -> usize {
        self.verbalizer.len()
    }

    /// Highest input slot referenced by the template.
    pub fn arity(&self) -> usize {
        self.template
            .iter()
            .filter_map(|p| match p {
                TemplatePart::Input(i) => Some(*i),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn verbalize(&self, label: usize) -> Result<&str, PvpError> {
        self.verbalizer
            .get(label)
            .map(String::as_str)
            .ok_or(PvpError::UnknownLabel(label))
    }

    pub fn inverse_verbalize(&self, word: &str) -> Option<usize> {
        self.verbalizer.iter().position(|w| w == word)
    }

    /// The template in `{1}`/`{2}`/`{MASK}` placeholder syntax.
    pub fn template_string(&self) -> String {
        render_template(&self.template)
    }
}

/// Parses `{1}`, `{2}` and `{MASK}` placeholders; every other character is
/// literal text.
pub fn parse_template(text: &str) -> Result<Vec<TemplatePart>, PvpError> {
    let mut parts = Vec::new();
    let mut literal = String::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        literal.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| PvpError::InvalidTemplate(String::from("unclosed '{'")))?;
        let part = match &after[..close] {
            "1" => TemplatePart::Input(1),
            "2" => TemplatePart::Input(2),
            "MASK" => TemplatePart::Mask,
            other => {
                return Err(PvpError::InvalidTemplate(alloc::format!(
                    "unknown placeholder {{{other}}}"
                )))
            }
        };
        if !literal.is_empty() {
            parts.push(TemplatePart::Literal(core::mem::take(&mut literal)));
        }
        parts.push(part);
        rest = &after[close + 1..];
    }
    literal.push_str(rest);
    if !literal.is_empty() {
        parts.push(TemplatePart::Literal(literal));
    }
    Ok(parts)
}

pub fn render_template(parts: &[TemplatePart]) -> String {
    let mut out = String::new();
    for part in parts {
        match part {
            TemplatePart::Literal(s) => out.push_str(s),
            TemplatePart::Input(i) => {
                out.push('{');
                out.push_str(&i.to_string());
                out.push('}');
            }
            TemplatePart::Mask => out.push_str("{MASK}"),
        }
    }
    out
}

/// A classification task: arity, label space and its pattern-verbalizer pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSpec {
    pub task_id: String,
    pub arity: usize,
    pub pvp: PatternVerbalizerPair,
    pub label_names: Vec<String>,
    /// Added to internal 0-based labels to get the label written in data
    /// files (1 for the 1-5 star Amazon ratings, 0 elsewhere).
    pub label_offset: i64,
}

impl TaskSpec {
    pub fn new(
        task_id: impl Into<String>,
        arity: usize,
        pvp: PatternVerbalizerPair,
        label_names: Vec<String>,
        label_offset: i64,
    ) -> Result<Self, PvpError> {
        if !(1..=2).contains(&arity) {
            return Err(PvpError::InvalidTemplate(alloc::format!(
                "arity must be 1 or 2, got {arity}"
            )));
        }
        let used = pvp.arity();
        if used > arity {
            return Err(PvpError::SlotOutOfArity { slot: used, arity });
        }
        if label_names.len() != pvp.num_labels() {
            return Err(PvpError::InvalidTemplate(alloc::format!(
                "{} label names for {} verbalizer words",
                label_names.len(),
                pvp.num_labels()
            )));
        }
        Ok(Self {
            task_id: task_id.into(),
            arity,
            pvp,
            label_names,
            label_offset,
        })
    }

    pub fn num_labels(&self) -> usize {
        self.pvp.num_labels()
    }

    /// Multilingual Amazon reviews: 1-5 stars.
    pub fn amazon() -> Self {
        Self::builtin(
            "amazon",
            1,
            "{1} All in all, it was {MASK}.",
            &["terrible", "bad", "ok", "good", "great"],
            &["1", "2", "3", "4", "5"],
            1,
        )
    }

    /// PAWS-X paraphrase identification.
    pub fn pawsx() -> Self {
        Self::builtin(
            "pawsx",
            2,
            "{1}? {MASK}, {2}",
            &["Wrong", "Right"],
            &["not_paraphrase", "paraphrase"],
            0,
        )
    }

    /// XNLI natural language inference.
    pub fn xnli() -> Self {
        Self::builtin(
            "xnli",
            2,
            "{1}? {MASK}, {2}",
            &["Yes", "Maybe", "No"],
            &["entailment", "neutral", "contradiction"],
            0,
        )
    }

    pub fn builtin_by_id(task_id: &str) -> Option<Self> {
        match task_id {
            "amazon" => Some(Self::amazon()),
            "pawsx" => Some(Self::pawsx()),
            "xnli" => Some(Self::xnli()),
            _ => None,
        }
    }

    fn builtin(
        id: &str,
        arity: usize,
        template: &str,
        words: &[&str],
        names: &[&str],
        offset: i64,
    ) -> Self {
        let pvp = PatternVerbalizerPair::from_template_str(id, template, words)
            .expect("built-in pattern is valid");
        Self::new(
            id,
            arity,
            pvp,
            names.iter().map(|s| s.to_string()).collect(),
            offset,
        )
        .expect("built-in task is valid")
    }
}

impl fmt::Display for TaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.task_id, self.pvp.template_string())
    }
}

/// Keep-counts after shrinking segments to fit `budget` tokens.
///
/// One token at a time is removed from the longer segment; on equal lengths
/// the second segment loses a token, which makes equal-length pairs
/// alternate.
pub(crate) fn truncate_lengths(lens: &mut [usize], budget: usize) {
    while lens.iter().sum::<usize>() > budget {
        let idx = match lens {
            [_] => 0,
            [a, b] => {
                if *a > *b {
                    0
                } else {
                    1
                }
            }
            _ => unreachable!("at most two segments"),
        };
        lens[idx] -= 1;
    }
}

fn neutralize_mask(segment: &str, mask: &str) -> String {
    if mask.is_empty() || !segment.contains(mask) {
        return segment.to_string();
    }
    let stripped: String = mask.chars().filter(|c| c.is_alphanumeric()).collect();
    segment.replace(mask, &stripped)
}

/// Renders `example` into the cloze prompt, truncating input segments (never
/// literals or the mask) so the result tokenizes to at most `max_len` tokens.
///
/// Occurrences of the backend's mask literal inside input text are rewritten
/// to a plain word so the prompt carries exactly one mask.
pub fn apply_pattern<B: MaskedLm + ?Sized>(
    pvp: &PatternVerbalizerPair,
    example: &Example,
    backend: &B,
    max_len: usize,
) -> Result<String, PvpError> {
    let arity = pvp.arity();
    if example.segments.len() != arity {
        return Err(PvpError::ArityMismatch {
            expected: arity,
            found: example.segments.len(),
        });
    }
    let mask = backend.mask_token();
    let mut literal_tokens = 0;
    for part in pvp.template() {
        if let TemplatePart::Literal(text) = part {
            if text.contains(mask) {
                return Err(PvpError::MaskCount(2));
            }
            literal_tokens += backend.tokenize(text).len();
        }
    }
    let needed = literal_tokens + 1;
    if needed > max_len {
        return Err(PvpError::PatternOverflow { needed, max_len });
    }
    let segments: Vec<String> = example
        .segments
        .iter()
        .map(|s| neutralize_mask(s, mask))
        .collect();
    let mut keep: Vec<usize> = segments.iter().map(|s| backend.tokenize(s).len()).collect();
    truncate_lengths(&mut keep, max_len - needed);

    let mut out = String::new();
    for part in pvp.template() {
        match part {
            TemplatePart::Literal(text) => out.push_str(text),
            TemplatePart::Mask => out.push_str(mask),
            TemplatePart::Input(slot) => {
                let seg = &segments[slot - 1];
                out.push_str(&seg[..backend.prefix_len(seg, keep[slot - 1])]);
            }
        }
    }
    Ok(out)
}

/// Prompt tokens for `example`: [`apply_pattern`] followed by tokenization.
pub fn encode_prompt<B: MaskedLm + ?Sized>(
    pvp: &PatternVerbalizerPair,
    example: &Example,
    backend: &B,
    max_len: usize,
) -> Result<Vec<String>, PvpError> {
    Ok(backend.tokenize(&apply_pattern(pvp, example, backend, max_len)?))
}

/// Tokens of the raw input without any pattern, for the classification-head
/// baseline. Pairs are joined in order and truncated with the same rule.
pub fn encode_plain<B: MaskedLm + ?Sized>(
    example: &Example,
    backend: &B,
    max_len: usize,
) -> Vec<String> {
    let per_segment: Vec<Vec<String>> = example
        .segments
        .iter()
        .map(|s| backend.tokenize(&neutralize_mask(s, backend.mask_token())))
        .collect();
    let mut keep: Vec<usize> = per_segment.iter().map(Vec::len).collect();
    truncate_lengths(&mut keep, max_len);
    per_segment
        .into_iter()
        .zip(keep)
        .flat_map(|(toks, k)| toks.into_iter().take(k))
        .collect()
}

/// Backend vocabulary ids of the verbalizer words, in label order.
pub fn candidate_token_ids<B: MaskedLm + ?Sized>(
    pvp: &PatternVerbalizerPair,
    backend: &B,
) -> Result<Vec<usize>, PvpError> {
    let mut ids: Vec<usize> = Vec::with_capacity(pvp.num_labels());
    for (label, word) in pvp.verbalizer().iter().enumerate() {
        let tokens = backend.tokenize(word);
        let id = match tokens.as_slice() {
            [token] => backend.token_id(token),
            _ => None,
        }
        .ok_or_else(|| PvpError::VerbalizerNotSingleToken(word.clone()))?;
        if let Some(prev) = ids.iter().position(|&other| other == id) {
            return Err(PvpError::VerbalizerCollision(
                pvp.verbalizer()[prev].clone(),
                pvp.verbalizer()[label].clone(),
            ));
        }
        ids.push(id);
    }
    Ok(ids)
}

/// Argmax over labels of `distribution[candidates[label]]`; the lowest label
/// wins ties.
pub fn argmax_candidates(distribution: &[f64], candidates: &[usize]) -> usize {
    let mut best = 0;
    let mut best_p = f64::NEG_INFINITY;
    for (label, &id) in candidates.iter().enumerate() {
        let p = distribution[id];
        if p > best_p {
            best = label;
            best_p = p;
        }
    }
    best
}

/// Lowest-index argmax.
pub fn argmax(values: &[f64]) -> usize {
    let identity: Vec<usize> = (0..values.len()).collect();
    argmax_candidates(values, &identity)
}

/// The label whose verbalizer word gets the highest mask-position probability.
pub fn predict_label<B: MaskedLm + ?Sized>(
    backend: &B,
    pvp: &PatternVerbalizerPair,
    example: &Example,
    max_len: usize,
) -> Result<usize, PvpError> {
    let candidates = candidate_token_ids(pvp, backend)?;
    predict_with_candidates(backend, pvp, example, max_len, &candidates)
}

pub(crate) fn predict_with_candidates<B: MaskedLm + ?Sized>(
    backend: &B,
    pvp: &PatternVerbalizerPair,
    example: &Example,
    max_len: usize,
    candidates: &[usize],
) -> Result<usize, PvpError> {
    let tokens = encode_prompt(pvp, example, backend, max_len)?;
    let distribution = backend.mask_distribution(&tokens)?;
    Ok(argmax_candidates(&distribution, candidates))
}

/// Masked-LM training targets for a labeled batch: prompt tokens plus the
/// vocabulary id of the gold label word.
pub fn verbalizer_targets<B: MaskedLm + ?Sized>(
    backend: &B,
    pvp: &PatternVerbalizerPair,
    batch: &[&Example],
    max_len: usize,
    candidates: &[usize],
) -> Result<Vec<Target>, PvpError> {
    batch
        .iter()
        .map(|ex| {
            let label = ex.label.ok_or(PvpError::Unlabeled)?;
            let class = *candidates.get(label).ok_or(PvpError::UnknownLabel(label))?;
            Ok(Target {
                tokens: encode_prompt(pvp, ex, backend, max_len)?,
                class,
            })
        })
        .collect()
}

/// Mean over the batch of `-ln p(v(y))` under the full-vocabulary mask
/// distribution.
pub fn verbalizer_loss<B: MaskedLm + ?Sized>(
    backend: &B,
    pvp: &PatternVerbalizerPair,
    batch: &[&Example],
    max_len: usize,
) -> Result<f64, PvpError> {
    if batch.is_empty() {
        return Err(PvpError::EmptyBatch);
    }
    let candidates = candidate_token_ids(pvp, backend)?;
    let targets = verbalizer_targets(backend, pvp, batch, max_len, &candidates)?;
    Ok(backend.loss(&targets, Head::Mlm)?)
}
