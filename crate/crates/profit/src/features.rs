//! Language feature table: one row per language with the five typological
//! similarities, printed Sim1, UMAP/SVD, printed Sim2, size, and any number
//! of trailing `task-model` accuracy columns. Missing cells are blank.

use std::collections::BTreeMap;
use std::path::Path;

use profit_core::analysis::LanguageFeatureRow;

use crate::tsv::TsvError;

const FIXED: [&str; 11] = [
    "language", "syn", "pho", "inv", "fam", "geo", "sim1", "umap", "svd", "sim2", "size",
];

fn cell(line: usize, raw: &str) -> Result<Option<f64>, TsvError> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse::<f64>()
        .map(Some)
        .map_err(|_| TsvError::MalformedRow {
            line,
            reason: format!("{raw:?} is not a number"),
        })
}

pub fn parse_features(text: &str) -> Result<Vec<LanguageFeatureRow>, TsvError> {
    let text = text.replace("\r\n", "\n");
    let mut lines = text.lines().enumerate();
    let header: Vec<&str> = match lines.next() {
        Some((_, h)) => h.split('\t').collect(),
        None => {
            return Err(TsvError::MalformedRow {
                line: 1,
                reason: "empty file".into(),
            })
        }
    };
    if header.len() < FIXED.len() || header[..FIXED.len()] != FIXED {
        return Err(TsvError::MalformedRow {
            line: 1,
            reason: format!("header must start with {}", FIXED.join(" ")),
        });
    }
    let accuracy_columns = &header[FIXED.len()..];
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() > header.len() {
            return Err(TsvError::MalformedRow {
                line: line_no,
                reason: format!("{} fields, header has {}", f.len(), header.len()),
            });
        }
        let get = |k: usize| cell(line_no, f.get(k).copied().unwrap_or(""));
        let mut accuracies = BTreeMap::new();
        for (j, name) in accuracy_columns.iter().enumerate() {
            if let Some(v) = get(FIXED.len() + j)? {
                accuracies.insert(name.to_string(), v);
            }
        }
        rows.push(LanguageFeatureRow {
            language: f[0].trim().to_string(),
            syn: get(1)?,
            pho: get(2)?,
            inv: get(3)?,
            fam: get(4)?,
            geo: get(5)?,
            reported_sim1: get(6)?,
            umap: get(7)?,
            svd: get(8)?,
            reported_sim2: get(9)?,
            size: get(10)?,
            accuracies,
        });
    }
    Ok(rows)
}

pub fn load_features(path: &Path) -> Result<Vec<LanguageFeatureRow>, TsvError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => TsvError::MissingFile(path.to_path_buf()),
        _ => TsvError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        },
    })?;
    parse_features(&text)
}

/// Accuracy column names in first-seen order across rows.
pub fn accuracy_columns(rows: &[LanguageFeatureRow]) -> Vec<String> {
    let mut cols: Vec<String> = Vec::new();
    for r in rows {
        for k in r.accuracies.keys() {
            if !cols.contains(k) {
                cols.push(k.clone());
            }
        }
    }
    cols
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_blank_cells() {
        let text = "language\tsyn\tpho\tinv\tfam\tgeo\tsim1\tumap\tsvd\tsim2\tsize\txnli-M\n\
                    ja\t49.63\t64.44\t65.92\t0.00\t85.65\t53.13\t\t\t\t20.39\t\n";
        let rows = parse_features(text).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].umap, None);
        assert_eq!(rows[0].size, Some(20.39));
        assert!(rows[0].accuracies.is_empty());
    }

    #[test]
    fn rejects_bad_header() {
        assert!(parse_features("lang\tsyn\n").is_err());
    }
}
