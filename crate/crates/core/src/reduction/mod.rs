//! Projection of the latent table to a clickable plane, and the `.emb2`
//! on-disk format for the result.

mod pca;
pub mod tsne;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::LatentTable;

pub use pca::{pca_fit, pca_fit_rows, PcaModel};
pub use tsne::{calibrate_sigma, tsne_fit, tsne_fit_traced, Calibration, TsneConfig, TsneTrace};

pub const EMBEDDING_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("latent dimension {0} is too small to project to 2-D")]
    DimensionTooSmall(usize),
    #[error("perplexity {perplexity} outside [1, {max}] for {n} points")]
    InvalidPerplexity { perplexity: f64, max: f64, n: usize },
    #[error("invalid t-SNE config: {0}")]
    InvalidConfig(String),
    #[error("squared-distance row needs at least 2 finite entries")]
    DegenerateRow,
    #[error("non-finite coordinate for {0:?}")]
    NonFinite(String),
    #[error("duplicate point id {0:?}")]
    DuplicateId(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("missing header line")]
    MissingHeader,
    #[error("embedding ids do not match the table: {0}")]
    IdMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReductionMethod {
    Pca,
    Tsne,
}

impl fmt::Display for ReductionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pca => "pca",
            Self::Tsne => "tsne",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl BoundingBox {
    pub fn of_points<'a>(points: impl IntoIterator<Item = &'a EmbeddedPoint>) -> Option<Self> {
        points.into_iter().fold(None, |acc, p| {
            Some(match acc {
                None => Self {
                    xmin: p.x,
                    xmax: p.x,
                    ymin: p.y,
                    ymax: p.y,
                },
                Some(b) => Self {
                    xmin: b.xmin.min(p.x),
                    xmax: b.xmax.max(p.x),
                    ymin: b.ymin.min(p.y),
                    ymax: b.ymax.max(p.y),
                },
            })
        })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.xmin..=self.xmax).contains(&x) && (self.ymin..=self.ymax).contains(&y)
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    /// Grows each side by `fraction` of the span. A zero span is treated as
    /// a unit span centred on the degenerate coordinate.
    pub fn with_margin(&self, fraction: f64) -> Self {
        fn grow(lo: f64, hi: f64, fraction: f64) -> (f64, f64) {
            let span = hi - lo;
            if span > 0.0 {
                (lo - fraction * span, hi + fraction * span)
            } else {
                let c = 0.5 * (lo + hi);
                (c - 0.5 - fraction, c + 0.5 + fraction)
            }
        }
        let (xmin, xmax) = grow(self.xmin, self.xmax, fraction);
        let (ymin, ymax) = grow(self.ymin, self.ymax, fraction);
        Self { xmin, xmax, ymin, ymax }
    }

    fn max_abs_diff(&self, other: &Self) -> f64 {
        [
            self.xmin - other.xmin,
            self.xmax - other.xmax,
            self.ymin - other.ymin,
            self.ymax - other.ymax,
        ]
        .iter()
        .fold(0.0f64, |m, d| m.max(d.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedPoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

/// 2-D coordinates for every record of a table, in table order.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding2D {
    method: ReductionMethod,
    points: Vec<EmbeddedPoint>,
    bbox: BoundingBox,
    pca: Option<PcaModel>,
}

impl Embedding2D {
    pub fn new(
        method: ReductionMethod,
        points: Vec<EmbeddedPoint>,
        pca: Option<PcaModel>,
    ) -> Result<Self, ReductionError> {
        let mut seen = HashSet::with_capacity(points.len());
        for p in &points {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(ReductionError::NonFinite(p.id.clone()));
            }
            if !seen.insert(p.id.as_str()) {
                return Err(ReductionError::DuplicateId(p.id.clone()));
            }
        }
        let bbox = BoundingBox::of_points(&points).ok_or(ReductionError::TooFewPoints { needed: 1, got: 0 })?;
        Ok(Self {
            method,
            points,
            bbox,
            pca,
        })
    }

    pub fn method(&self) -> ReductionMethod {
        self.method
    }

    pub fn points(&self) -> &[EmbeddedPoint] {
        &self.points
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    pub fn pca(&self) -> Option<&PcaModel> {
        self.pca.as_ref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&EmbeddedPoint> {
        self.points.iter().find(|p| p.id == id)
    }

    /// Checks that the embedding covers exactly the ids of `table`.
    pub fn validate_against(&self, table: &LatentTable) -> Result<(), ReductionError> {
        let ours: HashSet<&str> = self.points.iter().map(|p| p.id.as_str()).collect();
        let extra: Vec<&str> = self.points.iter().map(|p| p.id.as_str()).filter(|id| !table.contains(id)).collect();
        let missing: Vec<&str> = table.ids().filter(|id| !ours.contains(id)).collect();
        if extra.is_empty() && missing.is_empty() {
            return Ok(());
        }
        let mut parts = Vec::new();
        if !extra.is_empty() {
            parts.push(format!("not in table: {}", extra.join(", ")));
        }
        if !missing.is_empty() {
            parts.push(format!("missing from embedding: {}", missing.join(", ")));
        }
        Err(ReductionError::IdMismatch(parts.join("; ")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ReductionError> {
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        let header = Header {
            version: EMBEDDING_FORMAT_VERSION,
            method: self.method,
            bbox: self.bbox,
            pca: self.pca.clone(),
        };
        writeln!(out, "{}", serde_json::to_string(&header).map_err(std::io::Error::other)?)?;
        for p in &self.points {
            writeln!(out, "{}", serde_json::to_string(p).map_err(std::io::Error::other)?)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Loads an `.emb2` file. With a companion table, the id set is checked
    /// and the first offending line is reported.
    pub fn load(path: impl AsRef<Path>, table: Option<&LatentTable>) -> Result<Self, ReductionError> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines();
        let first = lines.next().ok_or(ReductionError::MissingHeader)??;
        let at = |line: usize| move |message: String| ReductionError::Line { line, message };
        let header: Header = serde_json::from_str(&first).map_err(|e| at(1)(e.to_string()))?;
        if header.version != EMBEDDING_FORMAT_VERSION {
            return Err(at(1)(format!("unsupported format version {}", header.version)));
        }
        let mut points = Vec::new();
        let mut seen = HashMap::new();
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let text = line?;
            if text.trim().is_empty() {
                continue;
            }
            let p: EmbeddedPoint = serde_json::from_str(&text).map_err(|e| at(line_no)(e.to_string()))?;
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(at(line_no)(format!("non-finite coordinate for {:?}", p.id)));
            }
            if let Some(prev) = seen.insert(p.id.clone(), line_no) {
                return Err(at(line_no)(format!("duplicate id {:?} (first on line {prev})", p.id)));
            }
            if let Some(t) = table {
                if !t.contains(&p.id) {
                    return Err(at(line_no)(format!("id {:?} is not in the table", p.id)));
                }
            }
            points.push(p);
        }
        let emb = Self::new(header.method, points, header.pca).map_err(|e| at(1)(e.to_string()))?;
        if let Some(t) = table {
            emb.validate_against(t)?;
        }
        let drift = emb.bbox.max_abs_diff(&header.bbox);
        if drift > 1e-12 {
            return Err(at(1)(format!("stored bounding box differs from the points by {drift:e}")));
        }
        Ok(emb)
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    method: ReductionMethod,
    bbox: BoundingBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pca: Option<PcaModel>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::style::{LatentVector, Scaler};
    use crate::table::UtteranceRecord;

    fn pt(id: &str, x: f64, y: f64) -> EmbeddedPoint {
        EmbeddedPoint { id: id.into(), x, y }
    }

    fn three() -> Embedding2D {
        Embedding2D::new(
            ReductionMethod::Tsne,
            vec![pt("a", 0.1, -2.0), pt("b", 1.0 / 3.0, 5.5), pt("c", -7.25, 0.0)],
            None,
        )
        .unwrap()
    }

    fn table(ids: &[&str]) -> LatentTable {
        LatentTable::new(
            ids.iter()
                .map(|id| UtteranceRecord {
                    id: id.to_string(),
                    latent: LatentVector(vec![0.0, 0.0]),
                    source_path: None,
                    transcript: None,
                })
                .collect(),
            Scaler::identity(2),
        )
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.emb2");
        let e = three();
        e.save(&path).unwrap();
        assert_eq!(Embedding2D::load(&path, Some(&table(&["a", "b", "c"]))).unwrap(), e);
        let header: serde_json::Value =
            serde_json::from_str(std::fs::read_to_string(&path).unwrap().lines().next().unwrap()).unwrap();
        assert_eq!(header["version"], 1);
        assert_eq!(header["method"], "tsne");
        assert_eq!(header["bbox"]["xmin"], -7.25);
    }

    #[test]
    fn bbox_is_recomputed() {
        let e = three();
        let b = e.bbox();
        assert_eq!((b.xmin, b.xmax, b.ymin, b.ymax), (-7.25, 1.0 / 3.0, -2.0, 5.5));
        assert!(e.points().iter().all(|p| b.contains(p.x, p.y)));
    }

    #[test]
    fn id_absent_from_table_is_rejected_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.emb2");
        three().save(&path).unwrap();
        let err = Embedding2D::load(&path, Some(&table(&["a", "c", "d"]))).unwrap_err();
        assert!(matches!(err, ReductionError::Line { line: 3, .. }), "{err}");
        let err = Embedding2D::load(&path, Some(&table(&["a", "b", "c", "d"]))).unwrap_err();
        assert!(matches!(err, ReductionError::IdMismatch(_)), "{err}");
    }

    #[test]
    fn tampered_bbox_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.emb2");
        three().save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap().replace("\"xmin\":-7.25", "\"xmin\":-8.0");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(Embedding2D::load(&path, None), Err(ReductionError::Line { line: 1, .. })));
    }

    #[test]
    fn margin_on_degenerate_box() {
        let b = BoundingBox {
            xmin: 2.0,
            xmax: 2.0,
            ymin: 0.0,
            ymax: 10.0,
        }
        .with_margin(0.05);
        assert!(b.xmax > b.xmin);
        assert!((b.ymin + 0.5).abs() < 1e-12 && (b.ymax - 10.5).abs() < 1e-12);
    }
}
