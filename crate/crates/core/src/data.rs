//! Examples, datasets, the K-per-class sampler and the synthetic multilingual
//! corpus generator.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::pvp::{PatternVerbalizerPair, TaskSpec};
use crate::rng::Prng;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DataError {
    #[error("class {class} has {have} examples, need {need}")]
    InsufficientExamples { class: usize, have: usize, need: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("example {index} has {found} segment(s), task arity is {expected}")]
    ArityMismatch { index: usize, expected: usize, found: usize },
    #[error("example {index} has label {label}, task has {num_labels} labels")]
    LabelOutOfRange { index: usize, label: usize, num_labels: usize },
    #[error("example {0} has no label")]
    Unlabeled(usize),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
}

/// One or two text segments, an optional 0-based label and a language tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub segments: Vec<String>,
    pub label: Option<usize>,
    pub language: String,
}

impl Example {
    pub fn new(segments: Vec<String>, label: Option<usize>, language: impl Into<String>) -> Self {
        Self {
            segments,
            label,
            language: language.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(DataError::ConfigInvalid(format!("unknown split {other:?}"))),
        }
    }
}

/// A language-tagged collection of examples of one task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub task_id: String,
    pub language: String,
    pub split: Split,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn new(
        task_id: impl Into<String>,
        language: impl Into<String>,
        split: Split,
        examples: Vec<Example>,
    ) -> Self {
        Self {
            task_id: task_id.into(),
            language: language.into(),
            split,
            examples,
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Checks arity and label range against `task`.
    pub fn validate(&self, task: &TaskSpec) -> Result<(), DataError> {
        for (index, ex) in self.examples.iter().enumerate() {
            if ex.segments.len() != task.arity {
                return Err(DataError::ArityMismatch {
                    index,
                    expected: task.arity,
                    found: ex.segments.len(),
                });
            }
            if let Some(label) = ex.label {
                if label >= task.num_labels() {
                    return Err(DataError::LabelOutOfRange {
                        index,
                        label,
                        num_labels: task.num_labels(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Labels of every example; fails on the first unlabeled one.
    pub fn labels(&self) -> Result<Vec<usize>, DataError> {
        self.examples
            .iter()
            .enumerate()
            .map(|(i, ex)| ex.label.ok_or(DataError::Unlabeled(i)))
            .collect()
    }

    fn subset(&self, indices: &[usize], split: Split) -> Dataset {
        Dataset::new(
            self.task_id.clone(),
            self.language.clone(),
            split,
            indices.iter().map(|&i| self.examples[i].clone()).collect(),
        )
    }
}

/// Index form of [`sample_few_shot`]: `(train, dev)` positions into `labels`.
pub fn sample_few_shot_indices(
    labels: &[usize],
    num_labels: usize,
    k: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if k == 0 {
        return Err(DataError::ConfigInvalid(String::from("K must be positive")));
    }
    let mut rng = Prng::for_purpose(seed, "fewshot");
    let mut train = Vec::with_capacity(k * num_labels);
    let mut dev = Vec::with_capacity(k * num_labels);
    for class in 0..num_labels {
        let mut idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        if idx.len() < 2 * k {
            return Err(DataError::InsufficientExamples {
                class,
                have: idx.len(),
                need: 2 * k,
            });
        }
        rng.shuffle(&mut idx);
        train.extend_from_slice(&idx[..k]);
        dev.extend_from_slice(&idx[k..2 * k]);
    }
    Ok((train, dev))
}

/// K training and K dev examples per class, drawn without replacement from
/// `train`, class-major.
///
/// One generator seeded from the `fewshot` stream shuffles each class's
/// indices in label order; the first K go to train and the next K to dev.
pub fn sample_few_shot(
    train: &Dataset,
    num_labels: usize,
    k: usize,
    seed: u64,
) -> Result<(Dataset, Dataset), DataError> {
    let labels = train.labels()?;
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= num_labels) {
        return Err(DataError::LabelOutOfRange {
            index,
            label,
            num_labels,
        });
    }
    let (tr, dv) = sample_few_shot_indices(&labels, num_labels, k, seed)?;
    Ok((train.subset(&tr, Split::Train), train.subset(&dv, Split::Dev)))
}

/// Settings of the synthetic multilingual corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_languages: usize,
    pub vocab_size: usize,
    /// Fraction of the source vocabulary every language keeps verbatim.
    pub anchor_fraction: f64,
    pub sentences_per_language: usize,
    pub num_labels: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_languages: 3,
            vocab_size: 48,
            anchor_fraction: 0.5,
            sentences_per_language: 120,
            num_labels: 3,
            seed: 7,
        }
    }
}

pub const SYNTH_TASK_ID: &str = "synth";
pub const SOURCE_LANGUAGE: &str = "en";

const NUMBER_WORDS: [&str; 10] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
];
const KEYWORDS_PER_SENTENCE: usize = 3;
const FILLERS_PER_SENTENCE: usize = 4;

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: String| Err(DataError::ConfigInvalid(msg));
        if !(0.0..=1.0).contains(&self.anchor_fraction) {
            return bad(format!("anchor fraction {} outside [0, 1]", self.anchor_fraction));
        }
        if self.num_languages == 0 {
            return bad(String::from("need at least one language"));
        }
        if !(2..=NUMBER_WORDS.len()).contains(&self.num_labels) {
            return bad(format!("num_labels must be in 2..=10, got {}", self.num_labels));
        }
        if self.vocab_size < 4 * self.num_labels {
            return bad(format!(
                "vocab_size {} < 4 x num_labels {}",
                self.vocab_size, self.num_labels
            ));
        }
        if self.sentences_per_language < self.num_labels {
            return bad(String::from("fewer sentences than labels"));
        }
        Ok(())
    }

    /// Language codes: the source first, then `s1`, `s2`, ...
    pub fn languages(&self) -> Vec<String> {
        (0..self.num_languages)
            .map(|l| {
                if l == 0 {
                    String::from(SOURCE_LANGUAGE)
                } else {
                    format!("s{l}")
                }
            })
            .collect()
    }
}

/// Task used for synthetic corpora: `"{1} It was {MASK}."` with number words.
pub fn synth_task(num_labels: usize) -> TaskSpec {
    let words: Vec<String> = NUMBER_WORDS[..num_labels].iter().map(|w| w.to_string()).collect();
    let pvp = PatternVerbalizerPair::new(
        SYNTH_TASK_ID,
        crate::pvp::parse_template("{1} It was {MASK}.").expect("static template"),
        words.clone(),
    )
    .expect("distinct number words");
    TaskSpec::new(SYNTH_TASK_ID, 1, pvp, words, 0).expect("arity 1 pattern")
}

/// Output of [`synth_corpus`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub task: TaskSpec,
    /// Source-language training set.
    pub train: Dataset,
    /// Source-language dev set.
    pub dev: Dataset,
    /// One test set per language, source first. All languages render the
    /// same underlying sentences.
    pub tests: Vec<Dataset>,
    /// Unlabeled sentences of every language.
    pub pretrain: Vec<String>,
    /// Source word ids whose surface form is shared by all languages.
    pub anchors: Vec<usize>,
}

/// Surface form of source word `id` in language `lang`.
pub fn synth_word(id: usize, lang: usize, anchors: &BTreeSet<usize>) -> String {
    if lang == 0 || anchors.contains(&id) {
        format!("w{id}")
    } else {
        format!("w{id}x{lang}")
    }
}

/// Anchor word ids: the first `floor(rho * vocab)` of a seeded permutation.
pub fn synth_anchors(cfg: &SynthConfig) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..cfg.vocab_size).collect();
    Prng::for_purpose(cfg.seed, "anchors").shuffle(&mut ids);
    let n = libm::floor(cfg.anchor_fraction * cfg.vocab_size as f64) as usize;
    let mut anchors = ids[..n.min(cfg.vocab_size)].to_vec();
    anchors.sort_unstable();
    anchors
}

/// Generates a learnable multilingual classification corpus.
///
/// Source word `i` is `w{i}`; language `l > 0` renames every non-anchor word
/// to `w{i}x{l}`. Each label owns `vocab / (2 * labels)` keywords; a sentence
/// of label `y` has three keywords of `y` and four filler words in shuffled
/// order. The pretraining text is every sentence of every language, where
/// only source sentences carry the cue " It was <label word>." so the masked
/// LM learns the verbalizer on the source side alone.
pub fn synth_corpus(cfg: &SynthConfig) -> Result<SynthCorpus, DataError> {
    cfg.validate()?;
    let task = synth_task(cfg.num_labels);
    let languages = cfg.languages();
    let anchors = synth_anchors(cfg);
    let anchor_set: BTreeSet<usize> = anchors.iter().copied().collect();

    let mut ids: Vec<usize> = (0..cfg.vocab_size).collect();
    Prng::for_purpose(cfg.seed, "keywords").shuffle(&mut ids);
    let per_label = cfg.vocab_size / (2 * cfg.num_labels);
    let keywords: Vec<&[usize]> = (0..cfg.num_labels)
        .map(|y| &ids[y * per_label..(y + 1) * per_label])
        .collect();
    let fillers = &ids[cfg.num_labels * per_label..];

    let mut rng = Prng::for_purpose(cfg.seed, "sentences");
    let mut draw = |count: usize| -> Vec<(Vec<usize>, usize)> {
        (0..count)
            .map(|s| {
                let y = s % cfg.num_labels;
                let mut words = Vec::with_capacity(KEYWORDS_PER_SENTENCE + FILLERS_PER_SENTENCE);
                for _ in 0..KEYWORDS_PER_SENTENCE {
                    words.push(keywords[y][rng.below(per_label as u64) as usize]);
                }
                for _ in 0..FILLERS_PER_SENTENCE {
                    words.push(fillers[rng.below(fillers.len() as u64) as usize]);
                }
                rng.shuffle(&mut words);
                (words, y)
            })
            .collect()
    };
    let n = cfg.sentences_per_language;
    let train_base = draw(n);
    let dev_base = draw(n / 2 + cfg.num_labels);
    let test_base = draw(n);

    let render = |words: &[usize], lang: usize| -> String {
        words
            .iter()
            .map(|&w| synth_word(w, lang, &anchor_set))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let to_dataset = |base: &[(Vec<usize>, usize)], lang: usize, split: Split| {
        Dataset::new(
            SYNTH_TASK_ID,
            languages[lang].clone(),
            split,
            base.iter()
                .map(|(w, y)| Example::new(alloc::vec![render(w, lang)], Some(*y), languages[lang].clone()))
                .collect(),
        )
    };

    let train = to_dataset(&train_base, 0, Split::Train);
    let dev = to_dataset(&dev_base, 0, Split::Dev);
    let tests = (0..cfg.num_languages)
        .map(|l| to_dataset(&test_base, l, Split::Test))
        .collect();

    let mut pretrain = Vec::new();
    for lang in 0..cfg.num_languages {
        for (words, y) in &train_base {
            let mut s = render(words, lang);
            if lang == 0 {
                s.push_str(" It was ");
                s.push_str(NUMBER_WORDS[*y]);
                s.push('.');
            }
            pretrain.push(s);
        }
    }

    Ok(SynthCorpus {
        task,
        train,
        dev,
        tests,
        pretrain,
        anchors,
    })
}
