//! Prompt-based finetuning with pattern-verbalizer pairs, for cross-lingual
//! text classification.
//!
//! This crate is the allocation-only algorithmic core. It has no IO: datasets,
//! checkpoints, configs and reports are read and written by the `profit`
//! companion crate.
//!
//! # Layout
//!
//! - [`pvp`]: pattern-verbalizer pairs, cloze rendering, masked-token
//!   classification and the verbalizer cross-entropy objective.
//! - [`backend`]: the [`MaskedLm`](backend::MaskedLm) contract and the
//!   hashed bag-of-context [`ReferenceBackend`](backend::ReferenceBackend).
//! - [`training`]: MAJ, Direct, Vanilla and ProFiT as runnable procedures,
//!   plus the multi-seed runner.
//! - [`data`]: datasets, the SplitMix64 generator, the K-per-class sampler and
//!   the synthetic multilingual corpus generator.
//! - [`eval`]: cross-lingual evaluation, source-excluded aggregation and the
//!   few-shot delta sweep.
//! - [`analysis`]: language similarity aggregation, Pearson/Spearman with
//!   Student-t p-values and the paired t-test.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analysis;
pub mod backend;
pub mod data;
pub mod eval;
pub mod pvp;
pub mod rng;
pub mod training;

pub use backend::{BackendError, Head, MaskedLm, ReferenceBackend, Target};
pub use data::{Dataset, Example, Split};
pub use pvp::{PatternVerbalizerPair, PvpError, TaskSpec};
pub use rng::Prng;
pub use training::{Method, RunConfig, Shots};
