//! Loading and saving of embeddings, labels, class assignments, and scores.
//!
//! The embedding format is deliberately minimal so any pipeline can emit it:
//! magic `SODAEMB1`, two little-endian u32 dimensions, then row-major
//! float32 little-endian payload. Any length mismatch is an error; loading
//! never truncates or pads.

use std::fs;
use std::path::Path;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

pub const EMB_MAGIC: &[u8; 8] = b"SODAEMB1";
const EMB_HEADER_LEN: u64 = 16;

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&bytes)
}

fn parse_embeddings(bytes: &[u8]) -> Result<EmbeddingMatrix> {
    let magic_len = bytes.len().min(EMB_MAGIC.len());
    if bytes[..magic_len] != EMB_MAGIC[..magic_len] {
        return Err(Error::BadMagic);
    }
    if (bytes.len() as u64) < EMB_HEADER_LEN {
        return Err(Error::TruncatedFile {
            expected: EMB_HEADER_LEN,
            actual: bytes.len() as u64,
        });
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as u64;
    let d = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as u64;
    let expected = EMB_HEADER_LEN + 4 * n * d;
    if bytes.len() as u64 != expected {
        return Err(Error::TruncatedFile {
            expected,
            actual: bytes.len() as u64,
        });
    }
    let data: Vec<f32> = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    EmbeddingMatrix::new(data, n as usize, d as usize)
}

pub fn save_embeddings(path: impl AsRef<Path>, m: &EmbeddingMatrix) -> Result<()> {
    let path = path.as_ref();
    if m.n() > u32::MAX as usize || m.d() > u32::MAX as usize {
        return Err(Error::InvalidFormat {
            detail: "matrix dimensions exceed u32 range".into(),
        });
    }
    let mut buf = Vec::with_capacity(16 + 4 * m.data().len());
    buf.extend_from_slice(EMB_MAGIC);
    buf.extend_from_slice(&(m.n() as u32).to_le_bytes());
    buf.extend_from_slice(&(m.d() as u32).to_le_bytes());
    for v in m.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// One test sample's ground truth: OOD flag plus optional class name.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelEntry {
    pub index: usize,
    pub is_ood: bool,
    pub class_label: Option<String>,
}

/// Validated label set; indices cover 0..N-1 exactly once, entries are
/// kept sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTable {
    entries: Vec<LabelEntry>,
}

impl LabelTable {
    pub fn new(mut entries: Vec<LabelEntry>) -> Result<Self> {
        let n = entries.len();
        let mut seen = vec![false; n];
        for e in &entries {
            if e.index < n {
                if seen[e.index] {
                    return Err(Error::DuplicateIndex { index: e.index });
                }
                seen[e.index] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::MissingIndex { index: missing });
        }
        entries.sort_by_key(|e| e.index);
        Ok(LabelTable { entries })
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[LabelEntry] {
        &self.entries
    }

    pub fn ood_flags(&self) -> Vec<bool> {
        self.entries.iter().map(|e| e.is_ood).collect()
    }

    /// Class names by index; `None` if any entry lacks one.
    pub fn class_labels(&self) -> Option<Vec<&str>> {
        self.entries
            .iter()
            .map(|e| e.class_label.as_deref())
            .collect()
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_detail(e: csv::Error) -> Error {
    Error::InvalidFormat {
        detail: e.to_string(),
    }
}

fn expect_header(record: Option<&csv::StringRecord>, wanted: &[&str], optional: &[&str]) -> Result<usize> {
    let record = record.ok_or_else(|| Error::InvalidFormat {
        detail: "empty file: missing header".into(),
    })?;
    let fields: Vec<&str> = record.iter().collect();
    let min = wanted.len();
    let max = wanted.len() + optional.len();
    let full: Vec<&str> = wanted.iter().chain(optional).copied().collect();
    if fields.len() < min || fields.len() > max || fields != full[..fields.len()] {
        return Err(Error::InvalidFormat {
            detail: format!("bad header {fields:?}: expected {wanted:?} (+ optional {optional:?})"),
        });
    }
    Ok(fields.len())
}

fn parse_index(field: &str, line: usize) -> Result<usize> {
    field.parse::<usize>().map_err(|_| Error::InvalidFormat {
        detail: format!("line {line}: {field:?} is not a valid index"),
    })
}

/// Reads a `index,ood_label[,class_label]` CSV. Label tokens match
/// case-insensitively; class labels are optional per file, and an empty
/// class field reads as absent.
pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelTable> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let mut records = reader.records();
    let header = records.next().transpose().map_err(csv_detail)?;
    let width = expect_header(header.as_ref(), &["index", "ood_label"], &["class_label"])?;
    let mut entries = Vec::new();
    for (pos, record) in records.enumerate() {
        let record = record.map_err(csv_detail)?;
        let line = pos + 2;
        if record.len() != width {
            return Err(Error::InvalidFormat {
                detail: format!("line {line}: expected {width} fields, got {}", record.len()),
            });
        }
        let index = parse_index(&record[0], line)?;
        let is_ood = match record[1].to_ascii_uppercase().as_str() {
            "ID" => false,
            "OOD" => true,
            _ => {
                return Err(Error::UnknownLabelToken {
                    token: record[1].to_string(),
                })
            }
        };
        let class_label = record
            .get(2)
            .filter(|s| !s.is_empty())
            .map(|s| s.to_string());
        entries.push(LabelEntry {
            index,
            is_ood,
            class_label,
        });
    }
    LabelTable::new(entries)
}

pub fn save_labels(path: impl AsRef<Path>, table: &LabelTable) -> Result<()> {
    let path = path.as_ref();
    let with_classes = table.entries.iter().any(|e| e.class_label.is_some());
    let mut out = String::new();
    out.push_str(if with_classes {
        "index,ood_label,class_label\n"
    } else {
        "index,ood_label\n"
    });
    for e in &table.entries {
        let token = if e.is_ood { "OOD" } else { "ID" };
        if with_classes {
            let class = e.class_label.as_deref().unwrap_or("");
            out.push_str(&format!("{},{},{}\n", e.index, token, class));
        } else {
            out.push_str(&format!("{},{}\n", e.index, token));
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a `row,class_name` CSV mapping each matrix row to a class.
/// Rows must cover 0..M-1 exactly once; the result is indexed by row.
pub fn load_class_assignments(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let mut records = reader.records();
    let header = records.next().transpose().map_err(csv_detail)?;
    expect_header(header.as_ref(), &["row", "class_name"], &[])?;
    let mut rows = Vec::new();
    for (pos, record) in records.enumerate() {
        let record = record.map_err(csv_detail)?;
        let line = pos + 2;
        if record.len() != 2 {
            return Err(Error::InvalidFormat {
                detail: format!("line {line}: expected 2 fields, got {}", record.len()),
            });
        }
        let row = parse_index(&record[0], line)?;
        rows.push((row, record[1].to_string()));
    }
    let n = rows.len();
    let mut names: Vec<Option<String>> = vec![None; n];
    for (row, name) in rows {
        if row < n {
            if names[row].is_some() {
                return Err(Error::DuplicateIndex { index: row });
            }
            names[row] = Some(name);
        }
    }
    if let Some(missing) = names.iter().position(|v| v.is_none()) {
        return Err(Error::MissingIndex { index: missing });
    }
    Ok(names.into_iter().map(|v| v.unwrap()).collect())
}

pub fn save_class_assignments(path: impl AsRef<Path>, names: &[String]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("row,class_name\n");
    for (row, name) in names.iter().enumerate() {
        out.push_str(&format!("{},{}\n", row, name));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Maps per-row class names to dense indices, classes ordered by first
/// appearance. Returns (class index per row, class names).
pub fn class_indices(names: &[String]) -> (Vec<usize>, Vec<String>) {
    let mut class_names: Vec<String> = Vec::new();
    let mut indices = Vec::with_capacity(names.len());
    for name in names {
        let idx = match class_names.iter().position(|c| c == name) {
            Some(idx) => idx,
            None => {
                class_names.push(name.clone());
                class_names.len() - 1
            }
        };
        indices.push(idx);
    }
    (indices, class_names)
}

/// Per-sample score columns as written to a scores CSV. `d_src` is absent
/// in zero-shot runs and its column is then left empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub s_text: Vec<f64>,
    pub d_src: Option<Vec<f64>>,
    pub score_initial: Vec<f64>,
    pub score_final: Vec<f64>,
}

impl ScoreTable {
    pub fn validate(&self) -> Result<()> {
        let n = self.s_text.len();
        for len in [
            self.d_src.as_ref().map_or(n, |v| v.len()),
            self.score_initial.len(),
            self.score_final.len(),
        ] {
            if len != n {
                return Err(Error::LengthMismatch { left: n, right: len });
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.s_text.len()
    }
}

/// Serializes a real with 9 significant digits, enough to reload within
/// 1e-8 relative error.
fn fmt_sig9(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn save_scores(path: impl AsRef<Path>, table: &ScoreTable) -> Result<()> {
    let path = path.as_ref();
    table.validate()?;
    let mut out = String::from("index,s_text,d_src,score_initial,score_final\n");
    for i in 0..table.n() {
        let d_src = table
            .d_src
            .as_ref()
            .map(|v| fmt_sig9(v[i]))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i,
            fmt_sig9(table.s_text[i]),
            d_src,
            fmt_sig9(table.score_initial[i]),
            fmt_sig9(table.score_final[i]),
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<ScoreTable> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let mut records = reader.records();
    let header = records.next().transpose().map_err(csv_detail)?;
    expect_header(
        header.as_ref(),
        &["index", "s_text", "d_src", "score_initial", "score_final"],
        &[],
    )?;
    let parse_real = |field: &str, line: usize| -> Result<f64> {
        field.parse::<f64>().map_err(|_| Error::InvalidFormat {
            detail: format!("line {line}: {field:?} is not a real number"),
        })
    };
    let mut rows = Vec::new();
    for (pos, record) in records.enumerate() {
        let record = record.map_err(csv_detail)?;
        let line = pos + 2;
        if record.len() != 5 {
            return Err(Error::InvalidFormat {
                detail: format!("line {line}: expected 5 fields, got {}", record.len()),
            });
        }
        let index = parse_index(&record[0], line)?;
        let s_text = parse_real(&record[1], line)?;
        let d_src = if record[2].is_empty() {
            None
        } else {
            Some(parse_real(&record[2], line)?)
        };
        let initial = parse_real(&record[3], line)?;
        let final_score = parse_real(&record[4], line)?;
        rows.push((index, s_text, d_src, initial, final_score));
    }
    let n = rows.len();
    let mut seen = vec![false; n];
    for &(index, ..) in &rows {
        if index < n {
            if seen[index] {
                return Err(Error::DuplicateIndex { index });
            }
            seen[index] = true;
        }
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::MissingIndex { index: missing });
    }
    rows.sort_by_key(|r| r.0);
    let with_d_src = rows.iter().filter(|r| r.2.is_some()).count();
    if with_d_src != 0 && with_d_src != n {
        return Err(Error::InvalidFormat {
            detail: "d_src column must be empty everywhere or filled everywhere".into(),
        });
    }
    Ok(ScoreTable {
        s_text: rows.iter().map(|r| r.1).collect(),
        d_src: if with_d_src == 0 {
            None
        } else {
            Some(rows.iter().map(|r| r.2.unwrap()).collect())
        },
        score_initial: rows.iter().map(|r| r.3).collect(),
        score_final: rows.iter().map(|r| r.4).collect(),
    })
}

/// Hex SHA-256 of a file, used for input digests in run manifests.
pub fn sha256_hex(path: impl AsRef<Path>) -> Result<String> {
    use sha2::{Digest, Sha256};
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    Ok(out)
}
