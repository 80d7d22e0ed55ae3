//! Click resolution: pixel → data-space mapping, exact nearest-neighbour
//! search over the embedding, and lookup of the snapped point's latent.

use thiserror::Error;

use crate::reduction::{BoundingBox, Embedding2D, ReductionError};
use crate::style::LatentVector;
use crate::table::LatentTable;

/// Fraction of the data span added on every side of the plotted box.
pub const VIEW_MARGIN: f64 = 0.05;

#[derive(Debug, Error)]
pub enum PickerError {
    #[error("embedding has no points")]
    EmptyEmbedding,
    #[error("k = {k} outside 1..={n}")]
    InvalidK { k: usize, n: usize },
    #[error("invalid viewport: {0}")]
    InvalidViewport(String),
    #[error(transparent)]
    IdMismatch(#[from] ReductionError),
    #[error("unknown id {0:?}")]
    NotFound(String),
}

/// Canvas size in pixels plus the data box it displays. Pixel origin is the
/// top-left corner; data y grows upwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewport {
    width: u32,
    height: u32,
    bbox: BoundingBox,
}

impl Viewport {
    /// Viewport showing exactly `bbox`.
    pub fn new(width: u32, height: u32, bbox: BoundingBox) -> Result<Self, PickerError> {
        if width == 0 || height == 0 {
            return Err(PickerError::InvalidViewport(format!("{width}x{height} canvas")));
        }
        let finite = [bbox.xmin, bbox.xmax, bbox.ymin, bbox.ymax].iter().all(|v| v.is_finite());
        if !finite || bbox.xmax <= bbox.xmin || bbox.ymax <= bbox.ymin {
            return Err(PickerError::InvalidViewport(format!("degenerate data box {bbox:?}")));
        }
        Ok(Self { width, height, bbox })
    }

    /// Viewport over the embedding's bounding box grown by [`VIEW_MARGIN`].
    pub fn for_embedding(width: u32, height: u32, embedding: &Embedding2D) -> Result<Self, PickerError> {
        Self::new(width, height, embedding.bbox().with_margin(VIEW_MARGIN))
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    /// Affine map; pixels outside the canvas extrapolate linearly.
    pub fn pixel_to_data(&self, px: f64, py: f64) -> (f64, f64) {
        let b = &self.bbox;
        (
            b.xmin + px / self.width as f64 * (b.xmax - b.xmin),
            b.ymax - py / self.height as f64 * (b.ymax - b.ymin),
        )
    }

    pub fn data_to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        let b = &self.bbox;
        (
            (x - b.xmin) / (b.xmax - b.xmin) * self.width as f64,
            (b.ymax - y) / (b.ymax - b.ymin) * self.height as f64,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub id: String,
    pub distance: f64,
}

/// Uniform grid over the embedding for exact k-nearest queries. Results are
/// ordered by distance, ties by ascending id, so they do not depend on the
/// storage order of the points.
#[derive(Debug, Clone)]
pub struct PointIndex {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ids: Vec<String>,
    origin: (f64, f64),
    cell: (f64, f64),
    dims: (usize, usize),
    cells: Vec<Vec<usize>>,
}

impl PointIndex {
    pub fn new(embedding: &Embedding2D) -> Result<Self, PickerError> {
        let n = embedding.len();
        if n == 0 {
            return Err(PickerError::EmptyEmbedding);
        }
        let b = embedding.bbox();
        let side = ((n as f64 / 2.0).sqrt().ceil() as usize).max(1);
        let span = |lo: f64, hi: f64| if hi > lo { (hi - lo) / side as f64 } else { 1.0 };
        let cell = (span(b.xmin, b.xmax), span(b.ymin, b.ymax));
        let mut index = Self {
            xs: embedding.points().iter().map(|p| p.x).collect(),
            ys: embedding.points().iter().map(|p| p.y).collect(),
            ids: embedding.points().iter().map(|p| p.id.clone()).collect(),
            origin: (b.xmin, b.ymin),
            cell,
            dims: (side, side),
            cells: vec![Vec::new(); side * side],
        };
        for i in 0..n {
            let (cx, cy) = index.cell_of(index.xs[i], index.ys[i]);
            index.cells[cy * side + cx].push(i);
        }
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        let clamp = |v: f64, lo: f64, w: f64, n: usize| (((v - lo) / w).floor().max(0.0) as usize).min(n - 1);
        (
            clamp(x, self.origin.0, self.cell.0, self.dims.0),
            clamp(y, self.origin.1, self.cell.1, self.dims.1),
        )
    }

    /// Lower bound on the distance from `(x, y)` to any point outside the
    /// block of cells `[x0, x1] × [y0, y1]`.
    fn outside_bound(&self, x: f64, y: f64, (x0, x1): (usize, usize), (y0, y1): (usize, usize)) -> f64 {
        let mut bound = f64::INFINITY;
        if x0 > 0 {
            bound = bound.min((x - (self.origin.0 + x0 as f64 * self.cell.0)).max(0.0));
        }
        if x1 + 1 < self.dims.0 {
            bound = bound.min((self.origin.0 + (x1 + 1) as f64 * self.cell.0 - x).max(0.0));
        }
        if y0 > 0 {
            bound = bound.min((y - (self.origin.1 + y0 as f64 * self.cell.1)).max(0.0));
        }
        if y1 + 1 < self.dims.1 {
            bound = bound.min((self.origin.1 + (y1 + 1) as f64 * self.cell.1 - y).max(0.0));
        }
        bound
    }

    fn sq_dist(&self, i: usize, x: f64, y: f64) -> f64 {
        let dx = self.xs[i] - x;
        let dy = self.ys[i] - y;
        dx * dx + dy * dy
    }

    /// The `k` nearest points to `(x, y)`.
    pub fn nearest(&self, x: f64, y: f64, k: usize) -> Result<Vec<Neighbor>, PickerError> {
        let n = self.len();
        if k == 0 || k > n {
            return Err(PickerError::InvalidK { k, n });
        }
        let (cx, cy) = self.cell_of(x, y);
        let mut found: Vec<(f64, usize)> = Vec::new();
        let max_ring = self.dims.0.max(self.dims.1);
        for ring in 0..=max_ring {
            let x0 = cx.saturating_sub(ring);
            let x1 = (cx + ring).min(self.dims.0 - 1);
            let y0 = cy.saturating_sub(ring);
            let y1 = (cy + ring).min(self.dims.1 - 1);
            for gy in y0..=y1 {
                for gx in x0..=x1 {
                    let on_ring = gx.abs_diff(cx) == ring || gy.abs_diff(cy) == ring;
                    if !on_ring {
                        continue;
                    }
                    for &i in &self.cells[gy * self.dims.0 + gx] {
                        found.push((self.sq_dist(i, x, y), i));
                    }
                }
            }
            if found.len() >= k {
                self.sort(&mut found);
                let kth = found[k - 1].0;
                let bound = self.outside_bound(x, y, (x0, x1), (y0, y1));
                // strict, with slack, so equidistant points beyond the block are still visited
                if bound * bound > kth * (1.0 + 1e-9) + f64::MIN_POSITIVE {
                    break;
                }
            }
        }
        self.sort(&mut found);
        Ok(found
            .into_iter()
            .take(k)
            .map(|(d2, i)| Neighbor {
                id: self.ids[i].clone(),
                distance: d2.sqrt(),
            })
            .collect())
    }

    fn sort(&self, found: &mut [(f64, usize)]) {
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| self.ids[a.1].cmp(&self.ids[b.1])));
    }
}

/// Exact k-nearest embedded points to `(x, y)`.
pub fn nearest_point(x: f64, y: f64, embedding: &Embedding2D, k: usize) -> Result<Vec<Neighbor>, PickerError> {
    PointIndex::new(embedding)?.nearest(x, y, k)
}

/// Result of resolving a click.
#[derive(Debug, Clone, PartialEq)]
pub struct Pick {
    pub id: String,
    pub latent: LatentVector,
    /// Data-space coordinates of the click itself.
    pub x: f64,
    pub y: f64,
    pub distance: f64,
}

/// Snaps a data-space position to the nearest stored utterance.
pub fn pick_at(x: f64, y: f64, index: &PointIndex, table: &LatentTable) -> Result<Pick, PickerError> {
    let nearest = index.nearest(x, y, 1)?.remove(0);
    let latent = table
        .get_latent(&nearest.id)
        .map_err(|_| PickerError::NotFound(nearest.id.clone()))?
        .clone();
    Ok(Pick {
        id: nearest.id,
        latent,
        x,
        y,
        distance: nearest.distance,
    })
}

/// Pixel click → data coordinates → nearest point → stored latent.
pub fn pick_latent(
    px: f64,
    py: f64,
    viewport: &Viewport,
    embedding: &Embedding2D,
    table: &LatentTable,
) -> Result<Pick, PickerError> {
    embedding.validate_against(table)?;
    let (x, y) = viewport.pixel_to_data(px, py);
    pick_at(x, y, &PointIndex::new(embedding)?, table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::{EmbeddedPoint, ReductionMethod};

    fn unit_view() -> Viewport {
        Viewport::new(
            100,
            100,
            BoundingBox {
                xmin: 0.0,
                xmax: 1.0,
                ymin: 0.0,
                ymax: 1.0,
            },
        )
        .unwrap()
    }

    fn emb(points: &[(&str, f64, f64)]) -> Embedding2D {
        Embedding2D::new(
            ReductionMethod::Pca,
            points.iter().map(|&(id, x, y)| EmbeddedPoint { id: id.into(), x, y }).collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn corners_and_centre() {
        let v = unit_view();
        assert_eq!(v.pixel_to_data(0.0, 0.0), (0.0, 1.0));
        assert_eq!(v.pixel_to_data(100.0, 100.0), (1.0, 0.0));
        assert_eq!(v.pixel_to_data(50.0, 50.0), (0.5, 0.5));
        assert_eq!(v.data_to_pixel(0.0, 1.0), (0.0, 0.0));
    }

    #[test]
    fn margin_viewport() {
        let e = emb(&[("a", 0.0, 0.0), ("b", 10.0, 20.0)]);
        let v = Viewport::for_embedding(200, 100, &e).unwrap();
        let b = v.bbox();
        assert!((b.xmin + 0.5).abs() < 1e-12 && (b.xmax - 10.5).abs() < 1e-12);
        assert!((b.ymin + 1.0).abs() < 1e-12 && (b.ymax - 21.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_viewports() {
        let b = BoundingBox {
            xmin: 0.0,
            xmax: 0.0,
            ymin: 0.0,
            ymax: 1.0,
        };
        assert!(Viewport::new(10, 10, b).is_err());
        assert!(Viewport::new(0, 10, unit_view().bbox()).is_err());
    }

    #[test]
    fn exact_hit_and_tie_break() {
        let e = emb(&[("b", 1.0, 0.0), ("a", -1.0, 0.0), ("c", 0.0, 5.0)]);
        let hit = nearest_point(0.0, 5.0, &e, 1).unwrap();
        assert_eq!(hit[0].id, "c");
        assert_eq!(hit[0].distance, 0.0);
        let tie = nearest_point(0.0, 0.0, &e, 2).unwrap();
        assert_eq!(tie.iter().map(|n| n.id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
    }

    #[test]
    fn k_bounds() {
        let e = emb(&[("a", 0.0, 0.0)]);
        assert!(matches!(nearest_point(0.0, 0.0, &e, 0), Err(PickerError::InvalidK { .. })));
        assert!(matches!(nearest_point(0.0, 0.0, &e, 2), Err(PickerError::InvalidK { .. })));
    }

    #[test]
    fn far_outside_query() {
        let e = emb(&[("a", 0.0, 0.0), ("b", 1.0, 1.0), ("c", 0.5, 0.2), ("d", 0.9, 0.1), ("e", 0.3, 0.8)]);
        let hit = nearest_point(1e6, -1e6, &e, 1).unwrap();
        assert_eq!(hit[0].id, "d");
    }
}
