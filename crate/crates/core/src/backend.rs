//! The masked-LM contract every downstream module is written against, and a
//! small trainable reference implementation of it.
//!
//! [`ReferenceBackend`] featurizes text as a hashed bag of tokens
//! (`phi`, `dim` buckets, value = count) and puts two kinds of softmax heads
//! on top: one masked-LM head over the whole vocabulary and one
//! classification head per task. It is convex in its parameters, so the
//! training procedures can be checked to convergence in unit tests.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use thiserror::Error;

use crate::rng::{hash_bytes, mix64, Prng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("input has no mask token")]
    NoMask,
    #[error("input has {0} mask tokens, expected one")]
    MultipleMasks(usize),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("gradient has length {found}, parameters have {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("learning rate must be positive and finite, got {0}")]
    InvalidLearningRate(f64),
    #[error("target class {class} outside head of size {size}")]
    TargetOutOfRange { class: usize, size: usize },
    #[error("no classification head for task {0:?}")]
    MissingHead(String),
    #[error("pretraining corpus is empty")]
    EmptyCorpus,
    #[error("invalid backend configuration: {0}")]
    Config(String),
}

/// Which softmax head a training target addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head<'a> {
    /// Masked-LM head; targets are vocabulary ids at the mask position.
    Mlm,
    /// Classification head of `task_id`; targets are label ids.
    Cls { task_id: &'a str, num_labels: usize },
}

/// A tokenized input and its gold class under some head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Target {
    pub tokens: Vec<String>,
    pub class: usize,
}

/// A named slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamGroup {
    pub name: String,
    pub range: Range<usize>,
}

/// The masked language model contract.
///
/// Forward methods take `&self` and may be called concurrently. Anything that
/// changes parameters takes `&mut self`. Classification heads are created
/// zero-initialized by [`MaskedLm::reset_cls_head`], which appends their
/// parameters the first time a task is seen.
pub trait MaskedLm {
    fn name(&self) -> &str;

    fn mask_token(&self) -> &str;

    fn tokenize(&self, text: &str) -> Vec<String>;

    /// Byte length of the shortest prefix of `text` that holds its first
    /// `n` tokens (the whole text when it has fewer).
    fn prefix_len(&self, text: &str, n: usize) -> usize;

    fn vocab_size(&self) -> usize;

    fn token_id(&self, token: &str) -> Option<usize>;

    /// Probability of every vocabulary entry at the single mask position.
    fn mask_distribution(&self, tokens: &[String]) -> Result<Vec<f64>, BackendError>;

    /// Natural log of [`MaskedLm::mask_distribution`].
    fn mask_log_distribution(&self, tokens: &[String]) -> Result<Vec<f64>, BackendError> {
        Ok(self
            .mask_distribution(tokens)?
            .into_iter()
            .map(libm::log)
            .collect())
    }

    /// Label distribution of the classification head for `task_id`. A task
    /// without a head yet behaves as a zero-initialized head (uniform).
    fn cls_distribution(&self, tokens: &[String], task_id: &str, num_labels: usize) -> Vec<f64>;

    /// Creates the head for `task_id` if needed and sets it to zero.
    fn reset_cls_head(&mut self, task_id: &str, num_labels: usize);

    fn parameters(&self) -> &[f64];

    fn parameters_mut(&mut self) -> &mut [f64];

    fn parameter_groups(&self) -> Vec<ParamGroup>;

    /// Adds `scale * d(sum of per-target cross-entropy)/d(theta)` into `out`
    /// and returns the summed loss.
    fn accumulate_gradient(
        &self,
        batch: &[Target],
        head: Head<'_>,
        scale: f64,
        out: &mut [f64],
    ) -> Result<f64, BackendError>;

    /// Mean cross-entropy over `batch`.
    fn loss(&self, batch: &[Target], head: Head<'_>) -> Result<f64, BackendError>;

    /// Mean cross-entropy and its gradient, one entry per parameter.
    fn loss_and_gradient(
        &self,
        batch: &[Target],
        head: Head<'_>,
    ) -> Result<(f64, Vec<f64>), BackendError> {
        if batch.is_empty() {
            return Err(BackendError::EmptyBatch);
        }
        let n = batch.len() as f64;
        let mut grad = vec![0.0; self.parameters().len()];
        let total = self.accumulate_gradient(batch, head, 1.0 / n, &mut grad)?;
        Ok((total / n, grad))
    }

    fn gradient(&self, batch: &[Target], head: Head<'_>) -> Result<Vec<f64>, BackendError> {
        self.loss_and_gradient(batch, head).map(|(_, g)| g)
    }

    /// `theta <- theta - lr * gradient`, elementwise.
    fn sgd_step(&mut self, gradient: &[f64], lr: f64) -> Result<(), BackendError> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(BackendError::InvalidLearningRate(lr));
        }
        let params = self.parameters_mut();
        if gradient.len() != params.len() {
            return Err(BackendError::ShapeMismatch {
                expected: params.len(),
                found: gradient.len(),
            });
        }
        for (p, g) in params.iter_mut().zip(gradient) {
            *p -= lr * g;
        }
        Ok(())
    }
}

/// Hash of the bit patterns of a parameter slice.
pub fn params_digest(params: &[f64]) -> u64 {
    params
        .iter()
        .fold(hash_bytes(b"params") ^ params.len() as u64, |h, p| {
            mix64(h ^ p.to_bits()).wrapping_add(0x9E37_79B9_7F4A_7C15)
        })
}

/// Lowercasing whitespace/punctuation splitter that keeps the mask literal
/// as one token.
///
/// Alphanumeric runs become one token each; every other non-space character
/// is a token by itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicTokenizer {
    mask: String,
}

impl BasicTokenizer {
    pub fn new(mask: impl Into<String>) -> Self {
        Self { mask: mask.into() }
    }

    pub fn mask(&self) -> &str {
        &self.mask
    }

    /// Byte spans of the tokens of `text`.
    pub fn spans(&self, text: &str) -> Vec<Range<usize>> {
        let mut spans = Vec::new();
        let mut i = 0;
        while i < text.len() {
            let rest = &text[i..];
            if !self.mask.is_empty() && rest.starts_with(self.mask.as_str()) {
                spans.push(i..i + self.mask.len());
                i += self.mask.len();
                continue;
            }
            let c = rest.chars().next().expect("non-empty");
            if c.is_whitespace() {
                i += c.len_utf8();
            } else if c.is_alphanumeric() {
                let mut j = i;
                for (off, d) in rest.char_indices() {
                    if !d.is_alphanumeric()
                        || (off > 0 && !self.mask.is_empty() && rest[off..].starts_with(self.mask.as_str()))
                    {
                        break;
                    }
                    j = i + off + d.len_utf8();
                }
                spans.push(i..j);
                i = j;
            } else {
                spans.push(i..i + c.len_utf8());
                i += c.len_utf8();
            }
        }
        spans
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        self.spans(text)
            .into_iter()
            .map(|span| {
                let piece = &text[span];
                if piece == self.mask {
                    piece.to_string()
                } else {
                    piece.to_lowercase()
                }
            })
            .collect()
    }

    pub fn prefix_len(&self, text: &str, n: usize) -> usize {
        if n == 0 {
            return 0;
        }
        let spans = self.spans(text);
        spans.get(n - 1).map_or(text.len(), |s| s.end)
    }
}

fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in logits.iter_mut() {
        *l = libm::exp(*l - max);
        sum += *l;
    }
    for l in logits.iter_mut() {
        *l /= sum;
    }
}

fn log_softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + libm::log(logits.iter().map(|l| libm::exp(l - max)).sum::<f64>());
    for l in logits.iter_mut() {
        *l -= lse;
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ClsHead {
    task_id: String,
    num_labels: usize,
    /// Start of `num_labels * dim` weights followed by `num_labels` biases.
    offset: usize,
}

/// Build-time settings of the reference backend.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceConfig {
    pub name: String,
    /// Hashed feature dimension.
    pub dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Words added to the vocabulary besides the corpus tokens, e.g.
    /// verbalizer words.
    pub extra_words: Vec<String>,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            name: String::from("reference"),
            dim: 4096,
            epochs: 5,
            lr: 0.1,
            seed: 42,
            extra_words: Vec::new(),
        }
    }
}

/// Hashed bag-of-tokens masked LM with softmax heads.
///
/// Parameter layout: MLM weights (`vocab x dim`, row-major), MLM biases
/// (`vocab`), then each classification head in creation order as weights
/// (`labels x dim`) followed by biases (`labels`).
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceBackend {
    name: String,
    tokenizer: BasicTokenizer,
    unk: String,
    vocab: Vec<String>,
    index: BTreeMap<String, usize>,
    dim: usize,
    params: Vec<f64>,
    heads: Vec<ClsHead>,
}

pub const MASK_TOKEN: &str = "[MASK]";
pub const UNK_TOKEN: &str = "[UNK]";

impl ReferenceBackend {
    /// Zero-initialized backend. The vocabulary is `[UNK]`, `[MASK]`, then
    /// the lowercased `words` in first-seen order.
    pub fn new<'a>(name: &str, words: impl IntoIterator<Item = &'a str>, dim: usize) -> Self {
        let mut vocab = vec![String::from(UNK_TOKEN), String::from(MASK_TOKEN)];
        for w in words {
            let w = if w == MASK_TOKEN { w.to_string() } else { w.to_lowercase() };
            if !vocab.contains(&w) {
                vocab.push(w);
            }
        }
        Self::from_vocab(name, vocab, dim).expect("vocabulary holds the special tokens")
    }

    /// Backend with exactly this vocabulary, which must contain `[UNK]` and
    /// `[MASK]` and no duplicates.
    pub fn from_vocab(name: &str, vocab: Vec<String>, dim: usize) -> Result<Self, BackendError> {
        if dim == 0 {
            return Err(BackendError::Config(String::from("dim must be positive")));
        }
        let mut index = BTreeMap::new();
        for (i, w) in vocab.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(BackendError::Config(alloc::format!("duplicate vocabulary entry {w:?}")));
            }
        }
        for special in [UNK_TOKEN, MASK_TOKEN] {
            if !index.contains_key(special) {
                return Err(BackendError::Config(alloc::format!("vocabulary lacks {special}")));
            }
        }
        let params = vec![0.0; vocab.len() * (dim + 1)];
        Ok(Self {
            name: name.to_string(),
            tokenizer: BasicTokenizer::new(MASK_TOKEN),
            unk: String::from(UNK_TOKEN),
            vocab,
            index,
            dim,
            params,
            heads: Vec::new(),
        })
    }

    /// Restores a backend from its vocabulary, head shapes and flat
    /// parameters (the checkpoint contents).
    pub fn from_parts(
        name: &str,
        vocab: Vec<String>,
        dim: usize,
        heads: &[(String, usize)],
        params: Vec<f64>,
    ) -> Result<Self, BackendError> {
        let mut backend = Self::from_vocab(name, vocab, dim)?;
        for (task, labels) in heads {
            backend.reset_cls_head(task, *labels);
        }
        if params.len() != backend.params.len() {
            return Err(BackendError::ShapeMismatch {
                expected: backend.params.len(),
                found: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(BackendError::Config(String::from("non-finite parameter")));
        }
        backend.params = params;
        Ok(backend)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn unk_token(&self) -> &str {
        &self.unk
    }

    /// `(task_id, num_labels)` of every classification head in layout order.
    pub fn head_shapes(&self) -> Vec<(String, usize)> {
        self.heads
            .iter()
            .map(|h| (h.task_id.clone(), h.num_labels))
            .collect()
    }

    /// Sparse `phi`: sorted `(bucket, count)` pairs over the tokens that are
    /// not the mask.
    pub fn features(&self, tokens: &[String]) -> Vec<(usize, f64)> {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in tokens.iter().filter(|t| t.as_str() != MASK_TOKEN) {
            let bucket = (hash_bytes(t.as_bytes()) % self.dim as u64) as usize;
            *counts.entry(bucket).or_insert(0.0) += 1.0;
        }
        counts.into_iter().collect()
    }

    fn mlm_bias_offset(&self) -> usize {
        self.vocab.len() * self.dim
    }

    fn head(&self, task_id: &str) -> Option<&ClsHead> {
        self.heads.iter().find(|h| h.task_id == task_id)
    }

    /// Logits of a softmax block of `rows` outputs whose weights start at
    /// `offset` and whose biases follow them.
    fn block_logits(&self, offset: usize, rows: usize, phi: &[(usize, f64)]) -> Vec<f64> {
        let bias = offset + rows * self.dim;
        (0..rows)
            .map(|r| {
                let w = &self.params[offset + r * self.dim..offset + (r + 1) * self.dim];
                self.params[bias + r] + phi.iter().map(|&(j, x)| w[j] * x).sum::<f64>()
            })
            .collect()
    }

    fn check_single_mask(tokens: &[String]) -> Result<(), BackendError> {
        match tokens.iter().filter(|t| t.as_str() == MASK_TOKEN).count() {
            0 => Err(BackendError::NoMask),
            1 => Ok(()),
            n => Err(BackendError::MultipleMasks(n)),
        }
    }

    fn mlm_logits(&self, tokens: &[String]) -> Result<Vec<f64>, BackendError> {
        Self::check_single_mask(tokens)?;
        Ok(self.block_logits(0, self.vocab.len(), &self.features(tokens)))
    }

    /// Resolves the parameter block addressed by `head`.
    fn block_of(&self, head: Head<'_>) -> Result<(usize, usize), BackendError> {
        match head {
            Head::Mlm => Ok((0, self.vocab.len())),
            Head::Cls { task_id, .. } => self
                .head(task_id)
                .map(|h| (h.offset, h.num_labels))
                .ok_or_else(|| BackendError::MissingHead(task_id.to_string())),
        }
    }

    /// One SGD step on a single target, touching only the rows and buckets
    /// it uses. Same result as `gradient` followed by `sgd_step`.
    pub fn sgd_single(&mut self, target: &Target, head: Head<'_>, lr: f64) -> Result<f64, BackendError> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(BackendError::InvalidLearningRate(lr));
        }
        let (offset, rows) = self.block_of(head)?;
        Self::check_mask_for(head, &target.tokens)?;
        if target.class >= rows {
            return Err(BackendError::TargetOutOfRange {
                class: target.class,
                size: rows,
            });
        }
        let phi = self.features(&target.tokens);
        let mut logp = self.block_logits(offset, rows, &phi);
        log_softmax_in_place(&mut logp);
        let bias = offset + rows * self.dim;
        for (r, lp) in logp.iter().enumerate() {
            let mut d = libm::exp(*lp);
            if r == target.class {
                d -= 1.0;
            }
            let row = offset + r * self.dim;
            for &(j, x) in &phi {
                self.params[row + j] -= lr * (d * x);
            }
            self.params[bias + r] -= lr * d;
        }
        Ok(-logp[target.class])
    }

    fn check_mask_for(head: Head<'_>, tokens: &[String]) -> Result<(), BackendError> {
        match head {
            Head::Mlm => Self::check_single_mask(tokens),
            Head::Cls { .. } => Ok(()),
        }
    }
}

impl MaskedLm for ReferenceBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn mask_token(&self) -> &str {
        self.tokenizer.mask()
    }

    fn tokenize(&self, text: &str) -> Vec<String> {
        self.tokenizer.tokenize(text)
    }

    fn prefix_len(&self, text: &str, n: usize) -> usize {
        self.tokenizer.prefix_len(text, n)
    }

    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn token_id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    fn mask_distribution(&self, tokens: &[String]) -> Result<Vec<f64>, BackendError> {
        let mut logits = self.mlm_logits(tokens)?;
        softmax_in_place(&mut logits);
        Ok(logits)
    }

    fn mask_log_distribution(&self, tokens: &[String]) -> Result<Vec<f64>, BackendError> {
        let mut logits = self.mlm_logits(tokens)?;
        log_softmax_in_place(&mut logits);
        Ok(logits)
    }

    fn cls_distribution(&self, tokens: &[String], task_id: &str, num_labels: usize) -> Vec<f64> {
        match self.head(task_id) {
            Some(h) => {
                let mut logits = self.block_logits(h.offset, h.num_labels, &self.features(tokens));
                softmax_in_place(&mut logits);
                logits
            }
            None => vec![1.0 / num_labels as f64; num_labels],
        }
    }

    fn reset_cls_head(&mut self, task_id: &str, num_labels: usize) {
        if let Some(pos) = self.heads.iter().position(|h| h.task_id == task_id) {
            let h = &self.heads[pos];
            if h.num_labels == num_labels {
                let start = h.offset;
                let end = start + num_labels * (self.dim + 1);
                self.params[start..end].fill(0.0);
                return;
            }
            // Shape change: drop the old block and re-append.
            let h = self.heads.remove(pos);
            let len = h.num_labels * (self.dim + 1);
            self.params.drain(h.offset..h.offset + len);
            for other in self.heads.iter_mut().filter(|o| o.offset > h.offset) {
                other.offset -= len;
            }
        }
        let offset = self.params.len();
        self.params
            .resize(offset + num_labels * (self.dim + 1), 0.0);
        self.heads.push(ClsHead {
            task_id: task_id.to_string(),
            num_labels,
            offset,
        });
    }

    fn parameters(&self) -> &[f64] {
        &self.params
    }

    fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn parameter_groups(&self) -> Vec<ParamGroup> {
        let mut groups = vec![ParamGroup {
            name: String::from("mlm"),
            range: 0..self.mlm_bias_offset() + self.vocab.len(),
        }];
        for h in &self.heads {
            groups.push(ParamGroup {
                name: alloc::format!("cls:{}", h.task_id),
                range: h.offset..h.offset + h.num_labels * (self.dim + 1),
            });
        }
        groups
    }

    fn accumulate_gradient(
        &self,
        batch: &[Target],
        head: Head<'_>,
        scale: f64,
        out: &mut [f64],
    ) -> Result<f64, BackendError> {
        if batch.is_empty() {
            return Err(BackendError::EmptyBatch);
        }
        if out.len() != self.params.len() {
            return Err(BackendError::ShapeMismatch {
                expected: self.params.len(),
                found: out.len(),
            });
        }
        let (offset, rows) = self.block_of(head)?;
        let bias = offset + rows * self.dim;
        let mut total = 0.0;
        for target in batch {
            Self::check_mask_for(head, &target.tokens)?;
            if target.class >= rows {
                return Err(BackendError::TargetOutOfRange {
                    class: target.class,
                    size: rows,
                });
            }
            let phi = self.features(&target.tokens);
            let mut logp = self.block_logits(offset, rows, &phi);
            log_softmax_in_place(&mut logp);
            total -= logp[target.class];
            for (r, lp) in logp.iter().enumerate() {
                let mut d = libm::exp(*lp);
                if r == target.class {
                    d -= 1.0;
                }
                let d = d * scale;
                let row = offset + r * self.dim;
                for &(j, x) in &phi {
                    out[row + j] += d * x;
                }
                out[bias + r] += d;
            }
        }
        Ok(total)
    }

    fn loss(&self, batch: &[Target], head: Head<'_>) -> Result<f64, BackendError> {
        if batch.is_empty() {
            return Err(BackendError::EmptyBatch);
        }
        let (offset, rows) = self.block_of(head)?;
        let mut total = 0.0;
        for target in batch {
            Self::check_mask_for(head, &target.tokens)?;
            if target.class >= rows {
                return Err(BackendError::TargetOutOfRange {
                    class: target.class,
                    size: rows,
                });
            }
            let mut logp = self.block_logits(offset, rows, &self.features(&target.tokens));
            log_softmax_in_place(&mut logp);
            total -= logp[target.class];
        }
        Ok(total / batch.len() as f64)
    }
}

/// Masked-LM pretraining of a fresh reference backend.
///
/// The vocabulary is every corpus token plus `config.extra_words`. Each token
/// position of each sentence becomes one example (that position masked, the
/// token as target). Every epoch visits the examples in a shuffle drawn from
/// the `pretrain` stream of `config.seed` and takes one SGD step per example.
pub fn pretrain_reference(
    corpus: &[String],
    config: &ReferenceConfig,
) -> Result<ReferenceBackend, BackendError> {
    if corpus.is_empty() {
        return Err(BackendError::EmptyCorpus);
    }
    if !(config.lr > 0.0 && config.lr.is_finite()) {
        return Err(BackendError::InvalidLearningRate(config.lr));
    }
    let tokenizer = BasicTokenizer::new(MASK_TOKEN);
    let tokenized: Vec<Vec<String>> = corpus.iter().map(|s| tokenizer.tokenize(s)).collect();
    let words = tokenized
        .iter()
        .flatten()
        .map(String::as_str)
        .chain(config.extra_words.iter().map(String::as_str));
    let mut backend = ReferenceBackend::new(&config.name, words, config.dim);

    let mut examples: Vec<Target> = Vec::new();
    for tokens in &tokenized {
        for (pos, tok) in tokens.iter().enumerate() {
            if tok == MASK_TOKEN {
                continue;
            }
            let mut masked = tokens.clone();
            masked[pos] = String::from(MASK_TOKEN);
            let class = backend.token_id(tok).expect("corpus token is in vocabulary");
            examples.push(Target { tokens: masked, class });
        }
    }
    if examples.is_empty() {
        return Err(BackendError::EmptyCorpus);
    }

    let mut order: Vec<usize> = (0..examples.len()).collect();
    let stream = crate::rng::derive_seed(config.seed, "pretrain");
    for epoch in 0..config.epochs {
        Prng::new(stream ^ mix64(epoch as u64)).shuffle(&mut order);
        for &i in &order {
            backend.sgd_single(&examples[i], Head::Mlm, config.lr)?;
        }
    }
    Ok(backend)
}

/// A backend with fixed output distributions and no parameters.
///
/// Useful as a stand-in wherever only the data flow matters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantBackend {
    tokenizer: BasicTokenizer,
    vocab: Vec<String>,
    mask_probs: Vec<f64>,
    cls_probs: Vec<f64>,
}

impl ConstantBackend {
    pub fn new(
        tokenizer: BasicTokenizer,
        vocab: Vec<String>,
        mask_probs: Vec<f64>,
        cls_probs: Vec<f64>,
    ) -> Self {
        assert_eq!(vocab.len(), mask_probs.len(), "one probability per word");
        Self {
            tokenizer,
            vocab,
            mask_probs,
            cls_probs,
        }
    }
}

impl MaskedLm for ConstantBackend {
    fn name(&self) -> &str {
        "constant"
    }

    fn mask_token(&self) -> &str {
        self.tokenizer.mask()
    }

    fn tokenize(&self, text: &str) -> Vec<String> {
        self.tokenizer.tokenize(text)
    }

    fn prefix_len(&self, text: &str, n: usize) -> usize {
        self.tokenizer.prefix_len(text, n)
    }

    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn token_id(&self, token: &str) -> Option<usize> {
        self.vocab.iter().position(|w| w == token)
    }

    fn mask_distribution(&self, _tokens: &[String]) -> Result<Vec<f64>, BackendError> {
        Ok(self.mask_probs.clone())
    }

    fn cls_distribution(&self, _tokens: &[String], _task_id: &str, num_labels: usize) -> Vec<f64> {
        if self.cls_probs.len() == num_labels {
            self.cls_probs.clone()
        } else {
            vec![1.0 / num_labels as f64; num_labels]
        }
    }

    fn reset_cls_head(&mut self, _task_id: &str, _num_labels: usize) {}

    fn parameters(&self) -> &[f64] {
        &[]
    }

    fn parameters_mut(&mut self) -> &mut [f64] {
        &mut []
    }

    fn parameter_groups(&self) -> Vec<ParamGroup> {
        Vec::new()
    }

    fn accumulate_gradient(
        &self,
        batch: &[Target],
        head: Head<'_>,
        _scale: f64,
        _out: &mut [f64],
    ) -> Result<f64, BackendError> {
        Ok(self.loss(batch, head)? * batch.len() as f64)
    }

    fn loss(&self, batch: &[Target], head: Head<'_>) -> Result<f64, BackendError> {
        if batch.is_empty() {
            return Err(BackendError::EmptyBatch);
        }
        let probs = match head {
            Head::Mlm => &self.mask_probs,
            Head::Cls { .. } => &self.cls_probs,
        };
        let total: f64 = batch
            .iter()
            .map(|t| -libm::log(probs.get(t.class).copied().unwrap_or(0.0)))
            .sum();
        Ok(total / batch.len() as f64)
    }
}
