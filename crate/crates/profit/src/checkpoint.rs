//! Reference backend checkpoints.
//!
//! Layout: the magic `PFITB1`, a little-endian `u32` header length, a UTF-8
//! header of tab-separated lines (`name`, `dim`, `mask`, `unk`, `vocab <n>`
//! followed by n words one per line, then one `head <task> <labels>` line per
//! classification head), a little-endian `u64` parameter count and the
//! parameters as little-endian `f64`.

use std::path::Path;

use profit_core::backend::{MASK_TOKEN, UNK_TOKEN};
use profit_core::{MaskedLm, ReferenceBackend};
use thiserror::Error;

pub const MAGIC: &[u8; 6] = b"PFITB1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("truncated checkpoint")]
    Truncated,
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error(transparent)]
    Backend(#[from] profit_core::BackendError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

pub fn encode(backend: &ReferenceBackend) -> Vec<u8> {
    let mut header = String::new();
    header.push_str(&format!("name\t{}\n", backend.name()));
    header.push_str(&format!("dim\t{}\n", backend.dim()));
    header.push_str(&format!("mask\t{}\n", backend.mask_token()));
    header.push_str(&format!("unk\t{}\n", backend.unk_token()));
    header.push_str(&format!("vocab\t{}\n", backend.vocab().len()));
    for w in backend.vocab() {
        header.push_str(w);
        header.push('\n');
    }
    for (task, labels) in backend.head_shapes() {
        header.push_str(&format!("head\t{task}\t{labels}\n"));
    }
    let params = backend.parameters();
    let mut out = Vec::with_capacity(18 + header.len() + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8], CheckpointError> {
    if bytes.len() < n {
        return Err(CheckpointError::Truncated);
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

fn field<'a>(lines: &mut std::str::Lines<'a>, key: &str) -> Result<&'a str, CheckpointError> {
    let line = lines
        .next()
        .ok_or_else(|| CheckpointError::BadHeader(format!("missing {key}")))?;
    line.strip_prefix(key)
        .and_then(|r| r.strip_prefix('\t'))
        .ok_or_else(|| CheckpointError::BadHeader(format!("expected {key}, got {line:?}")))
}

pub fn decode(mut bytes: &[u8]) -> Result<ReferenceBackend, CheckpointError> {
    if take(&mut bytes, MAGIC.len())? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let len = u32::from_le_bytes(take(&mut bytes, 4)?.try_into().expect("4 bytes")) as usize;
    let header = std::str::from_utf8(take(&mut bytes, len)?)
        .map_err(|_| CheckpointError::BadHeader("not UTF-8".into()))?;
    let mut lines = header.lines();
    let name = field(&mut lines, "name")?.to_string();
    let bad = |what: &str| CheckpointError::BadHeader(what.to_string());
    let dim: usize = field(&mut lines, "dim")?.parse().map_err(|_| bad("dim"))?;
    if field(&mut lines, "mask")? != MASK_TOKEN || field(&mut lines, "unk")? != UNK_TOKEN {
        return Err(bad("unsupported special tokens"));
    }
    let n: usize = field(&mut lines, "vocab")?.parse().map_err(|_| bad("vocab"))?;
    let vocab: Vec<String> = (0..n)
        .map(|_| lines.next().map(String::from).ok_or_else(|| bad("vocab list")))
        .collect::<Result<_, _>>()?;
    let mut heads = Vec::new();
    for line in lines {
        let rest = line.strip_prefix("head\t").ok_or_else(|| bad(line))?;
        let (task, labels) = rest.rsplit_once('\t').ok_or_else(|| bad(line))?;
        heads.push((task.to_string(), labels.parse().map_err(|_| bad(line))?));
    }
    let count = u64::from_le_bytes(take(&mut bytes, 8)?.try_into().expect("8 bytes")) as usize;
    let raw = take(&mut bytes, count.checked_mul(8).ok_or(CheckpointError::Truncated)?)?;
    if !bytes.is_empty() {
        return Err(bad("trailing bytes"));
    }
    let params = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(ReferenceBackend::from_parts(&name, vocab, dim, &heads, params)?)
}

pub fn save(path: &Path, backend: &ReferenceBackend) -> Result<(), CheckpointError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, encode(backend))?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ReferenceBackend, CheckpointError> {
    decode(&std::fs::read(path)?)
}
