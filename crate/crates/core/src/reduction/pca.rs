use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{EmbeddedPoint, Embedding2D, ReductionError, ReductionMethod};
use crate::table::LatentTable;

/// Fitted two-component PCA projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Two orthonormal rows of length D.
    pub components: Vec<Vec<f64>>,
    /// Every covariance eigenvalue, descending.
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn project(&self, row: &[f64]) -> (f64, f64) {
        let dot = |c: &[f64]| c.iter().zip(row.iter().zip(&self.mean)).map(|(c, (x, m))| c * (x - m)).sum();
        (dot(&self.components[0]), dot(&self.components[1]))
    }

    /// Maps a 2-D point back into latent space (the rank-2 reconstruction).
    pub fn reconstruct(&self, x: f64, y: f64) -> Vec<f64> {
        self.mean
            .iter()
            .enumerate()
            .map(|(d, m)| m + x * self.components[0][d] + y * self.components[1][d])
            .collect()
    }
}

/// PCA on raw rows; returns the model and the projected coordinates.
///
/// The covariance is the population covariance. Each component's
/// largest-magnitude entry is made positive.
pub fn pca_fit_rows(rows: &[&[f64]]) -> Result<(PcaModel, Vec<(f64, f64)>), ReductionError> {
    let n = rows.len();
    if n < 2 {
        return Err(ReductionError::TooFewPoints { needed: 2, got: n });
    }
    let dim = rows[0].len();
    if dim < 2 {
        return Err(ReductionError::DimensionTooSmall(dim));
    }
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r.iter()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for r in rows {
        for i in 0..dim {
            let di = r[i] - mean[i];
            for j in i..dim {
                cov[(i, j)] += di * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let v = cov[(i, j)] / n as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let components: Vec<Vec<f64>> = order[..2]
        .iter()
        .map(|&k| {
            let mut c: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let lead = c
                .iter()
                .copied()
                .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
            if lead < 0.0 {
                c.iter_mut().for_each(|v| *v = -*v);
            }
            c
        })
        .collect();
    let model = PcaModel {
        mean,
        components,
        eigenvalues: order.iter().map(|&k| eig.eigenvalues[k]).collect(),
    };
    let coords = rows.iter().map(|r| model.project(r)).collect();
    Ok((model, coords))
}

/// Projects the table's latents onto their top two principal components.
pub fn pca_fit(table: &LatentTable) -> Result<Embedding2D, ReductionError> {
    let rows: Vec<&[f64]> = table.records().iter().map(|r| r.latent.as_slice()).collect();
    let (model, coords) = pca_fit_rows(&rows)?;
    let points = table
        .records()
        .iter()
        .zip(coords)
        .map(|(r, (x, y))| EmbeddedPoint { id: r.id.clone(), x, y })
        .collect();
    Embedding2D::new(ReductionMethod::Pca, points, Some(model))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_data() {
        let rows: Vec<Vec<f64>> = [-1.0, 0.0, 1.0]
            .iter()
            .map(|&v| {
                let mut r = vec![0.0; 8];
                r[0] = v;
                r
            })
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let (model, coords) = pca_fit_rows(&refs).unwrap();
        // sign convention makes the dominant entry positive, so x follows dim 0
        let xs: Vec<f64> = coords.iter().map(|c| c.0).collect();
        assert_eq!(xs, vec![-1.0, 0.0, 1.0]);
        assert!(coords.iter().all(|c| c.1.abs() < 1e-12));
        assert!((model.eigenvalues[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn needs_two_points() {
        let row = [1.0; 8];
        assert!(matches!(
            pca_fit_rows(&[&row[..]]),
            Err(ReductionError::TooFewPoints { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn components_orthonormal_and_ordered() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| (0..5).map(|d| ((i * 31 + d * 17) % 23) as f64 * (d + 1) as f64).collect())
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let (model, coords) = pca_fit_rows(&refs).unwrap();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let c = &model.components;
        assert!((dot(&c[0], &c[0]) - 1.0).abs() < 1e-10);
        assert!((dot(&c[1], &c[1]) - 1.0).abs() < 1e-10);
        assert!(dot(&c[0], &c[1]).abs() < 1e-10);
        let var = |f: fn(&(f64, f64)) -> f64| coords.iter().map(|p| f(p).powi(2)).sum::<f64>();
        assert!(var(|p| p.0) >= var(|p| p.1));
        assert!(model.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }
}
