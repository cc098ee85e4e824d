//! Dataset TSV: a header row, then `seg1[\tseg2]\tlabel` per example.
//!
//! Labels in files are task labels (Amazon stars 1-5); they are shifted by
//! the task's label offset to the 0-based internal labels at load time.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use profit_core::data::{Dataset, Example, Split};
use profit_core::TaskSpec;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TsvError {
    #[error("line {line}: malformed row ({reason})")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: label {label:?} out of range")]
    LabelOutOfRange { line: usize, label: String },
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("segment contains a tab or newline: {0:?}")]
    BadSegment(String),
}

/// Parses dataset text. CRLF and LF parse identically; blank trailing lines
/// are ignored.
pub fn parse_tsv(text: &str, task: &TaskSpec, language: &str, split: Split) -> Result<Dataset, TsvError> {
    let text = text.replace("\r\n", "\n");
    let mut lines = text.split('\n').enumerate();
    let width = task.arity + 1;
    match lines.next() {
        Some((_, header)) if header.split('\t').count() == width => {}
        _ => {
            return Err(TsvError::MalformedRow {
                line: 1,
                reason: format!("header must have {width} columns"),
            })
        }
    }
    let mut examples = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != width {
            return Err(TsvError::MalformedRow {
                line: line_no,
                reason: format!("{} fields, expected {width}", fields.len()),
            });
        }
        let raw = fields[task.arity].trim();
        let label = if raw.is_empty() {
            None
        } else {
            let parsed: i64 = raw.parse().map_err(|_| TsvError::MalformedRow {
                line: line_no,
                reason: format!("label {raw:?} is not an integer"),
            })?;
            let internal = parsed - task.label_offset;
            if internal < 0 || internal >= task.num_labels() as i64 {
                return Err(TsvError::LabelOutOfRange {
                    line: line_no,
                    label: raw.to_string(),
                });
            }
            Some(internal as usize)
        };
        examples.push(Example::new(
            fields[..task.arity].iter().map(|s| s.to_string()).collect(),
            label,
            language,
        ));
    }
    Ok(Dataset::new(task.task_id.clone(), language, split, examples))
}

pub fn load_tsv(path: &Path, task: &TaskSpec, language: &str, split: Split) -> Result<Dataset, TsvError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => TsvError::MissingFile(path.to_path_buf()),
        _ => TsvError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        },
    })?;
    parse_tsv(&text, task, language, split)
}

/// Renders a dataset in the file schema. Labels are written with the task's
/// offset; unlabeled examples get an empty label cell.
pub fn render_tsv(ds: &Dataset, task: &TaskSpec) -> Result<String, TsvError> {
    let mut out = String::new();
    let header: Vec<String> = (1..=task.arity).map(|i| format!("seg{i}")).collect();
    out.push_str(&header.join("\t"));
    out.push_str("\tlabel\n");
    for ex in &ds.examples {
        for seg in &ex.segments {
            if seg.contains(['\t', '\n', '\r']) {
                return Err(TsvError::BadSegment(seg.clone()));
            }
            out.push_str(seg);
            out.push('\t');
        }
        if let Some(y) = ex.label {
            let _ = write!(out, "{}", y as i64 + task.label_offset);
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_tsv(path: &Path, ds: &Dataset, task: &TaskSpec) -> Result<(), TsvError> {
    let text = render_tsv(ds, task)?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| TsvError::Io {
            path: parent.to_path_buf(),
            message: e.to_string(),
        })?;
    }
    std::fs::write(path, text).map_err(|e| TsvError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rows() {
        let text = "seg1\tseg2\tlabel\na\tb\t0\nc\td\t1\ne\tf\t1\n";
        let ds = parse_tsv(text, &TaskSpec::pawsx(), "en", Split::Test).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.examples[1].segments, ["c", "d"]);
        assert_eq!(ds.labels().unwrap(), [0, 1, 1]);
    }

    #[test]
    fn label_out_of_range() {
        let text = "seg1\tseg2\tlabel\na\tb\t7\n";
        assert_eq!(
            parse_tsv(text, &TaskSpec::pawsx(), "en", Split::Test),
            Err(TsvError::LabelOutOfRange {
                line: 2,
                label: "7".into()
            })
        );
    }

    #[test]
    fn crlf_equals_lf() {
        let lf = "seg1\tlabel\ngreat stuff\t5\nmeh\t3\n";
        let crlf = lf.replace('\n', "\r\n");
        let a = parse_tsv(lf, &TaskSpec::amazon(), "de", Split::Train).unwrap();
        let b = parse_tsv(&crlf, &TaskSpec::amazon(), "de", Split::Train).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.labels().unwrap(), [4, 2]);
    }

    #[test]
    fn tab_inside_segment_is_malformed() {
        let text = "seg1\tlabel\na\tb\t1\n";
        assert!(matches!(
            parse_tsv(text, &TaskSpec::amazon(), "en", Split::Train),
            Err(TsvError::MalformedRow { line: 2, .. })
        ));
    }

    #[test]
    fn round_trip() {
        let text = "seg1\tlabel\nfine\t1\nlovely\t5\nunknown\t\n";
        let task = TaskSpec::amazon();
        let ds = parse_tsv(text, &task, "en", Split::Test).unwrap();
        assert_eq!(ds.examples[2].label, None);
        assert_eq!(render_tsv(&ds, &task).unwrap(), text);
    }
}
