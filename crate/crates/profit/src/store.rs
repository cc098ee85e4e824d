//! Append-only results store, one `results.tsv` per output directory.
//!
//! The first line is `#checksum\t<hex>` over the header line; the header is
//! `run_id task method backend seed K language accuracy`. Every append holds
//! a lock file, writes the whole new store to a temp file and renames it over
//! the old one, so readers never see a partial record.

use std::collections::BTreeSet;
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use profit_core::eval::RunRecord;
use profit_core::rng::hash_bytes;
use thiserror::Error;

pub const STORE_FILE: &str = "results.tsv";
pub const HEADER: &str = "run_id\ttask\tmethod\tbackend\tseed\tK\tlanguage\taccuracy";
const LOCK_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("run {0:?} is already in the store (use --force to replace it)")]
    DuplicateRun(String),
    #[error("store is empty")]
    EmptyStore,
    #[error("store header checksum mismatch")]
    BadChecksum,
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("field contains a tab or newline: {0:?}")]
    BadField(String),
    #[error("timed out waiting for lock {0}")]
    Locked(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn checksum_line() -> String {
    format!("#checksum\t{:016x}", hash_bytes(HEADER.as_bytes()))
}

fn field(s: &str) -> Result<&str, StoreError> {
    if s.contains(['\t', '\n', '\r']) {
        return Err(StoreError::BadField(s.to_string()));
    }
    Ok(s)
}

/// One TSV line, without the newline. Accuracies use the shortest text that
/// parses back to the same `f64`.
pub fn render_record(r: &RunRecord) -> Result<String, StoreError> {
    Ok(format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        field(&r.run_id)?,
        field(&r.task_id)?,
        r.method,
        field(&r.backend)?,
        r.seed,
        r.shots,
        field(&r.language)?,
        r.accuracy
    ))
}

pub fn render_store(records: &[RunRecord]) -> Result<String, StoreError> {
    let mut out = format!("{}\n{HEADER}\n", checksum_line());
    for r in records {
        out.push_str(&render_record(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_store(text: &str) -> Result<Vec<RunRecord>, StoreError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l == checksum_line() => {}
        Some((_, l)) if l.starts_with("#checksum\t") => return Err(StoreError::BadChecksum),
        _ => {
            return Err(StoreError::Malformed {
                line: 1,
                reason: "missing checksum line".into(),
            })
        }
    }
    match lines.next() {
        Some((_, l)) if l == HEADER => {}
        _ => return Err(StoreError::BadChecksum),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let bad = |reason: &str| StoreError::Malformed {
            line: i + 1,
            reason: reason.to_string(),
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 8 {
            return Err(bad("expected 8 fields"));
        }
        out.push(RunRecord {
            run_id: f[0].into(),
            task_id: f[1].into(),
            method: f[2].parse().map_err(|_| bad("bad method"))?,
            backend: f[3].into(),
            seed: f[4].parse().map_err(|_| bad("bad seed"))?,
            shots: f[5].parse().map_err(|_| bad("bad K"))?,
            language: f[6].into(),
            accuracy: f[7].parse().map_err(|_| bad("bad accuracy"))?,
            timestamp: None,
        });
    }
    Ok(out)
}

pub fn read_store(path: &Path) -> Result<Vec<RunRecord>, StoreError> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    parse_store(&text)
}

/// Store file of an output directory.
#[derive(Debug, Clone)]
pub struct Store {
    path: PathBuf,
}

struct LockGuard(PathBuf);

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

impl Store {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            path: dir.join(STORE_FILE),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// All records, or none if the store does not exist yet.
    pub fn records(&self) -> Result<Vec<RunRecord>, StoreError> {
        if !self.path.exists() {
            return Ok(Vec::new());
        }
        read_store(&self.path)
    }

    pub fn contains_run(&self, run_id: &str) -> Result<bool, StoreError> {
        Ok(self.records()?.iter().any(|r| r.run_id == run_id))
    }

    fn lock(&self) -> Result<LockGuard, StoreError> {
        let lock = self.path.with_extension("tsv.lock");
        let start = Instant::now();
        loop {
            match OpenOptions::new().write(true).create_new(true).open(&lock) {
                Ok(_) => return Ok(LockGuard(lock)),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    if start.elapsed() > LOCK_TIMEOUT {
                        return Err(StoreError::Locked(lock));
                    }
                    std::thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(io(&lock)(e)),
            }
        }
    }

    /// Appends a batch of records atomically. Run ids already present are
    /// refused, or replaced when `force` is set.
    pub fn append(&self, batch: &[RunRecord], force: bool) -> Result<(), StoreError> {
        if let Some(dir) = self.path.parent() {
            std::fs::create_dir_all(dir).map_err(io(dir))?;
        }
        let _guard = self.lock()?;
        let mut records = self.records()?;
        let incoming: BTreeSet<&str> = batch.iter().map(|r| r.run_id.as_str()).collect();
        if let Some(dup) = records.iter().find(|r| incoming.contains(r.run_id.as_str())) {
            if !force {
                return Err(StoreError::DuplicateRun(dup.run_id.clone()));
            }
            records.retain(|r| !incoming.contains(r.run_id.as_str()));
        }
        records.extend_from_slice(batch);
        let text = render_store(&records)?;
        let tmp = self
            .path
            .with_extension(format!("tsv.tmp{}", std::process::id()));
        std::fs::write(&tmp, text).map_err(io(&tmp))?;
        std::fs::rename(&tmp, &self.path).map_err(io(&self.path))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use profit_core::training::{Method, Shots};
    use proptest::prelude::*;

    fn rec(run_id: &str, lang: &str, acc: f64) -> RunRecord {
        RunRecord {
            run_id: run_id.into(),
            task_id: "xnli".into(),
            method: Method::Profit,
            backend: "reference".into(),
            seed: 42,
            shots: Shots::K(8),
            language: lang.into(),
            accuracy: acc,
            timestamp: None,
        }
    }

    #[test]
    fn duplicate_refused_then_forced() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::in_dir(dir.path());
        store.append(&[rec("a", "en", 0.5), rec("a", "de", 0.25)], false).unwrap();
        store.append(&[rec("b", "en", 0.75)], false).unwrap();
        assert!(matches!(
            store.append(&[rec("a", "en", 0.1)], false),
            Err(StoreError::DuplicateRun(id)) if id == "a"
        ));
        assert_eq!(store.records().unwrap().len(), 3);
        store.append(&[rec("a", "en", 0.1)], true).unwrap();
        let rs = store.records().unwrap();
        assert_eq!(rs, [rec("b", "en", 0.75), rec("a", "en", 0.1)]);
        assert!(!dir.path().join("results.tsv.lock").exists());
    }

    #[test]
    fn tampered_header_detected() {
        let text = render_store(&[rec("a", "en", 0.5)]).unwrap().replace("accuracy", "acc");
        assert!(matches!(parse_store(&text), Err(StoreError::BadChecksum)));
    }

    #[test]
    fn concurrent_appends_all_land() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::in_dir(dir.path());
        std::thread::scope(|s| {
            for t in 0..4 {
                let store = store.clone();
                s.spawn(move || {
                    for i in 0..5 {
                        store.append(&[rec(&format!("r{t}-{i}"), "en", 0.5)], false).unwrap();
                    }
                });
            }
        });
        assert_eq!(store.records().unwrap().len(), 20);
    }

    proptest! {
        #[test]
        fn records_round_trip(acc in 0.0f64..=1.0, seed in any::<u64>(), k in 1u32..2000) {
            let mut r = rec("run:x", "fr", acc);
            r.seed = seed;
            r.shots = Shots::K(k);
            let text = render_store(&[r.clone()]).unwrap();
            prop_assert_eq!(parse_store(&text).unwrap(), vec![r]);
        }
    }
}
