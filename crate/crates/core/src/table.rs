//! The lookup table: ordered, immutable mapping from utterance id to its
//! standardized latent vector, persisted as line-delimited JSON (`.ltab`).

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::style::{LatentVector, Scaler};

pub const TABLE_FORMAT_VERSION: u32 = 1;

/// What went wrong with one record or one line of a table file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecordProblem {
    Malformed(String),
    Version(u32),
    Dimension { expected: usize, got: usize },
    DuplicateId(String),
    EmptyId,
    NonFinite,
}

impl fmt::Display for RecordProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Malformed(m) => write!(f, "malformed line: {m}"),
            Self::Version(v) => write!(f, "unsupported format version {v} (expected {TABLE_FORMAT_VERSION})"),
            Self::Dimension { expected, got } => write!(f, "dimension {got} does not match table dimension {expected}"),
            Self::DuplicateId(id) => write!(f, "duplicate id {id:?}"),
            Self::EmptyId => write!(f, "empty id"),
            Self::NonFinite => write!(f, "non-finite latent value"),
        }
    }
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {problem}")]
    Line { line: usize, problem: RecordProblem },
    #[error("record {index}: {problem}")]
    Record { index: usize, problem: RecordProblem },
    #[error("empty table file (missing header)")]
    MissingHeader,
    #[error("unknown id {0:?}")]
    NotFound(String),
}

impl TableError {
    /// 1-based line number for file-level errors.
    pub fn line(&self) -> Option<usize> {
        match self {
            Self::Line { line, .. } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub id: String,
    pub latent: LatentVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
}

#[derive(Debug, Clone)]
pub struct LatentTable {
    records: Vec<UtteranceRecord>,
    scaler: Scaler,
    dim: usize,
    format_version: u32,
    index: HashMap<String, usize>,
}

impl PartialEq for LatentTable {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
            && self.scaler == other.scaler
            && self.dim == other.dim
            && self.format_version == other.format_version
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    dim: usize,
    scaler: Scaler,
}

fn check_record(record: &UtteranceRecord, dim: usize, index: &HashMap<String, usize>) -> Result<(), RecordProblem> {
    if record.id.is_empty() {
        return Err(RecordProblem::EmptyId);
    }
    if record.latent.dim() != dim {
        return Err(RecordProblem::Dimension {
            expected: dim,
            got: record.latent.dim(),
        });
    }
    if !record.latent.is_finite() {
        return Err(RecordProblem::NonFinite);
    }
    if index.contains_key(&record.id) {
        return Err(RecordProblem::DuplicateId(record.id.clone()));
    }
    Ok(())
}

impl LatentTable {
    /// Builds a table; ids must be unique and non-empty and every latent must
    /// have the scaler's dimension.
    pub fn new(records: Vec<UtteranceRecord>, scaler: Scaler) -> Result<Self, TableError> {
        let dim = scaler.dim();
        if scaler.std.len() != dim {
            return Err(TableError::Record {
                index: 0,
                problem: RecordProblem::Dimension {
                    expected: dim,
                    got: scaler.std.len(),
                },
            });
        }
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            check_record(r, dim, &index).map_err(|problem| TableError::Record { index: i, problem })?;
            index.insert(r.id.clone(), i);
        }
        Ok(Self {
            records,
            scaler,
            dim,
            format_version: TABLE_FORMAT_VERSION,
            index,
        })
    }

    pub fn records(&self) -> &[UtteranceRecord] {
        &self.records
    }

    pub fn scaler(&self) -> &Scaler {
        &self.scaler
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn format_version(&self) -> u32 {
        self.format_version
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id.as_str())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&UtteranceRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    /// Stored latent for `id`.
    pub fn get_latent(&self, id: &str) -> Result<&LatentVector, TableError> {
        self.get(id)
            .map(|r| &r.latent)
            .ok_or_else(|| TableError::NotFound(id.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TableError> {
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        let header = Header {
            version: self.format_version,
            dim: self.dim,
            scaler: self.scaler.clone(),
        };
        writeln!(out, "{}", serde_json::to_string(&header).map_err(std::io::Error::other)?)?;
        for r in &self.records {
            writeln!(out, "{}", serde_json::to_string(r).map_err(std::io::Error::other)?)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TableError> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines();
        let first = lines.next().ok_or(TableError::MissingHeader)??;
        let at = |line: usize| move |problem: RecordProblem| TableError::Line { line, problem };
        let header: Header =
            serde_json::from_str(&first).map_err(|e| at(1)(RecordProblem::Malformed(e.to_string())))?;
        if header.version != TABLE_FORMAT_VERSION {
            return Err(at(1)(RecordProblem::Version(header.version)));
        }
        if header.scaler.mean.len() != header.dim || header.scaler.std.len() != header.dim {
            return Err(at(1)(RecordProblem::Dimension {
                expected: header.dim,
                got: header.scaler.mean.len().min(header.scaler.std.len()),
            }));
        }

        let mut records = Vec::new();
        let mut index = HashMap::new();
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let text = line?;
            if text.trim().is_empty() {
                continue;
            }
            let record: UtteranceRecord =
                serde_json::from_str(&text).map_err(|e| at(line_no)(RecordProblem::Malformed(e.to_string())))?;
            check_record(&record, header.dim, &index).map_err(at(line_no))?;
            index.insert(record.id.clone(), records.len());
            records.push(record);
        }
        Ok(Self {
            records,
            scaler: header.scaler,
            dim: header.dim,
            format_version: header.version,
            index,
        })
    }
}
