//! Exact O(N²) t-SNE.
//!
//! Conditional affinities are calibrated per point to a target perplexity,
//! symmetrized, and matched by a Student-t (one degree of freedom) kernel in
//! the plane through gradient descent on KL(P‖Q) with early exaggeration,
//! momentum and per-coordinate gains.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{EmbeddedPoint, Embedding2D, ReductionError, ReductionMethod};
use crate::table::LatentTable;

const SIGMA_MIN: f64 = 1e-10;
const SIGMA_MAX: f64 = 1e10;
const MAX_BISECTION_STEPS: usize = 64;
/// Entropy error (bits) under which a calibration counts as converged.
pub const ENTROPY_TOLERANCE: f64 = 1e-5;
const INIT_STD: f64 = 1e-4;
const MIN_GAIN: f64 = 0.01;
const KL_TRACE_EVERY: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 10.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            seed: 0,
        }
    }
}

impl TsneConfig {
    /// Largest perplexity accepted for `n` points.
    pub fn max_perplexity(n: usize) -> f64 {
        (n as f64 - 1.0) / 3.0
    }

    pub fn validate(&self, n: usize) -> Result<(), ReductionError> {
        if n < 4 {
            return Err(ReductionError::TooFewPoints { needed: 4, got: n });
        }
        let max = Self::max_perplexity(n);
        if !(self.perplexity >= 1.0 && self.perplexity <= max) {
            return Err(ReductionError::InvalidPerplexity {
                perplexity: self.perplexity,
                max,
                n,
            });
        }
        if self.iterations < 1 {
            return Err(ReductionError::InvalidConfig("iterations must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ReductionError::InvalidConfig("learning rate must be positive".into()));
        }
        if self.early_exaggeration.is_nan() || self.early_exaggeration < 1.0 {
            return Err(ReductionError::InvalidConfig("early exaggeration must be >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of a perplexity calibration for one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub sigma: f64,
    /// Entropy in bits at `sigma`.
    pub entropy: f64,
    pub steps: usize,
    /// False when the target entropy was not reached; `sigma` is then the
    /// closest value found, usually a search boundary.
    pub converged: bool,
}

/// `p_j ∝ exp(-d²_j / 2σ²)`, normalized. Non-finite distances get zero mass.
pub fn conditional_row(sq_dists: &[f64], sigma: f64) -> Vec<f64> {
    let dmin = sq_dists
        .iter()
        .copied()
        .filter(|d| d.is_finite())
        .fold(f64::INFINITY, f64::min);
    let beta = 1.0 / (2.0 * sigma * sigma);
    let mut p: Vec<f64> = sq_dists
        .iter()
        .map(|&d| if d.is_finite() { (-(d - dmin) * beta).exp() } else { 0.0 })
        .collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.log2()).sum::<f64>()
}

/// Finds σ such that the entropy of [`conditional_row`] equals
/// `log2(perplexity)`, bisecting geometrically over [1e-10, 1e10].
pub fn calibrate_sigma(sq_dists: &[f64], perplexity: f64) -> Result<Calibration, ReductionError> {
    if sq_dists.iter().filter(|d| d.is_finite()).count() < 2 {
        return Err(ReductionError::DegenerateRow);
    }
    let target = perplexity.log2();
    let (mut lo, mut hi) = (SIGMA_MIN, SIGMA_MAX);
    let mut best = Calibration {
        sigma: f64::NAN,
        entropy: f64::NAN,
        steps: 0,
        converged: false,
    };
    let mut best_err = f64::INFINITY;
    for step in 1..=MAX_BISECTION_STEPS {
        let sigma = (lo * hi).sqrt();
        let h = entropy_bits(&conditional_row(sq_dists, sigma));
        let err = (h - target).abs();
        if err < best_err {
            best_err = err;
            best = Calibration {
                sigma,
                entropy: h,
                steps: step,
                converged: err < ENTROPY_TOLERANCE,
            };
        }
        if err < 1e-13 {
            break;
        }
        // entropy grows with sigma
        if h > target {
            hi = sigma;
        } else {
            lo = sigma;
        }
    }
    if !best.converged {
        let sigma = if best.entropy < target { SIGMA_MAX } else { SIGMA_MIN };
        best.sigma = sigma;
        best.entropy = entropy_bits(&conditional_row(sq_dists, sigma));
        log::warn!(
            "perplexity {perplexity} not reached: entropy {} vs target {target}",
            best.entropy
        );
    }
    Ok(best)
}

fn squared_distances(rows: &[&[f64]]) -> Vec<f64> {
    let n = rows.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = rows[i].iter().zip(rows[j]).map(|(a, b)| (a - b).powi(2)).sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Row-stochastic conditional affinities `p_{j|i}` (row-major, zero
/// diagonal) and the calibration of each row.
pub fn conditional_affinities(
    rows: &[&[f64]],
    perplexity: f64,
) -> Result<(Vec<f64>, Vec<Calibration>), ReductionError> {
    let n = rows.len();
    let d = squared_distances(rows);
    let mut p = vec![0.0; n * n];
    let mut calibrations = Vec::with_capacity(n);
    let mut row = Vec::with_capacity(n - 1);
    for i in 0..n {
        row.clear();
        row.extend((0..n).filter(|&j| j != i).map(|j| d[i * n + j]));
        let cal = calibrate_sigma(&row, perplexity)?;
        let cond = conditional_row(&row, cal.sigma);
        for (j, v) in (0..n).filter(|&j| j != i).zip(cond) {
            p[i * n + j] = v;
        }
        calibrations.push(cal);
    }
    Ok((p, calibrations))
}

/// `P = (P_{j|i} + P_{i|j}) / 2N`.
pub fn symmetrize(conditional: &[f64], n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (conditional[i * n + j] + conditional[j * n + i]) / (2.0 * n as f64);
        }
    }
    p
}

/// Unnormalized Student-t kernel `(1 + ‖y_i − y_j‖²)⁻¹` (zero diagonal)
/// and its sum.
fn student_t(y: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut w = vec![0.0; n * n];
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            w[i * n + j] = v;
            w[j * n + i] = v;
            total += 2.0 * v;
        }
    }
    (w, total)
}

/// Normalized low-dimensional affinities Q.
pub fn low_dim_affinities(y: &[[f64; 2]]) -> Vec<f64> {
    let (mut w, total) = student_t(y);
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// KL(P‖Q) for joint affinities `p` and layout `y`.
pub fn kl_divergence(p: &[f64], y: &[[f64; 2]]) -> f64 {
    let q = low_dim_affinities(y);
    p.iter()
        .zip(&q)
        .filter(|(&pv, _)| pv > 0.0)
        .map(|(&pv, &qv)| pv * (pv / qv.max(f64::MIN_POSITIVE)).ln())
        .sum()
}

/// `∂KL/∂y_i = 4 Σ_j (p_ij − q_ij)(y_i − y_j) / (1 + ‖y_i − y_j‖²)`.
pub fn kl_gradient(p: &[f64], y: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = y.len();
    let (w, total) = student_t(y);
    let mut grad = vec![[0.0; 2]; n];
    for i in 0..n {
        let mut g = [0.0; 2];
        for j in 0..n {
            if i == j {
                continue;
            }
            let wij = w[i * n + j];
            let mult = (p[i * n + j] - wij / total) * wij;
            g[0] += mult * (y[i][0] - y[j][0]);
            g[1] += mult * (y[i][1] - y[j][1]);
        }
        grad[i] = [4.0 * g[0], 4.0 * g[1]];
    }
    grad
}

/// KL values recorded during descent, always measured against the
/// unexaggerated P.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TsneTrace {
    /// `(iterations completed, KL)`.
    pub kl: Vec<(usize, f64)>,
}

impl TsneTrace {
    pub fn at(&self, iteration: usize) -> Option<f64> {
        self.kl.iter().find(|(i, _)| *i == iteration).map(|(_, v)| *v)
    }

    pub fn last(&self) -> Option<f64> {
        self.kl.last().map(|(_, v)| *v)
    }
}

/// Runs t-SNE on raw rows and returns the layout plus its KL trace.
pub fn tsne_rows(rows: &[&[f64]], cfg: &TsneConfig) -> Result<(Vec<[f64; 2]>, TsneTrace), ReductionError> {
    let n = rows.len();
    cfg.validate(n)?;
    let (cond, _) = conditional_affinities(rows, cfg.perplexity)?;
    let p = symmetrize(&cond, n);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)]).collect();
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut trace = TsneTrace::default();
    let exaggerated: Vec<f64> = p.iter().map(|v| v * cfg.early_exaggeration).collect();

    for iter in 0..cfg.iterations {
        let target = if iter < cfg.exaggeration_iterations { &exaggerated } else { &p };
        let momentum = if iter < cfg.momentum_switch {
            cfg.initial_momentum
        } else {
            cfg.final_momentum
        };
        let grad = kl_gradient(target, &y);
        for i in 0..n {
            for d in 0..2 {
                gains[i][d] = if (grad[i][d] > 0.0) != (update[i][d] > 0.0) {
                    gains[i][d] + 0.2
                } else {
                    (gains[i][d] * 0.8).max(MIN_GAIN)
                };
                update[i][d] = momentum * update[i][d] - cfg.learning_rate * gains[i][d] * grad[i][d];
                y[i][d] += update[i][d];
            }
        }
        let cx = y.iter().map(|v| v[0]).sum::<f64>() / n as f64;
        let cy = y.iter().map(|v| v[1]).sum::<f64>() / n as f64;
        y.iter_mut().for_each(|v| {
            v[0] -= cx;
            v[1] -= cy;
        });

        let done = iter + 1;
        if done % KL_TRACE_EVERY == 0 || done == cfg.exaggeration_iterations || done == cfg.iterations {
            trace.kl.push((done, kl_divergence(&p, &y)));
        }
    }
    if let Some(i) = y.iter().position(|v| !(v[0].is_finite() && v[1].is_finite())) {
        return Err(ReductionError::NonFinite(format!("point {i}")));
    }
    Ok((y, trace))
}

pub fn tsne_fit_traced(table: &LatentTable, cfg: &TsneConfig) -> Result<(Embedding2D, TsneTrace), ReductionError> {
    let rows: Vec<&[f64]> = table.records().iter().map(|r| r.latent.as_slice()).collect();
    let (y, trace) = tsne_rows(&rows, cfg)?;
    let points = table
        .records()
        .iter()
        .zip(y)
        .map(|(r, [x, y])| EmbeddedPoint { id: r.id.clone(), x, y })
        .collect();
    Ok((Embedding2D::new(ReductionMethod::Tsne, points, None)?, trace))
}

/// Deterministic for a fixed table and config (including the seed).
pub fn tsne_fit(table: &LatentTable, cfg: &TsneConfig) -> Result<Embedding2D, ReductionError> {
    tsne_fit_traced(table, cfg).map(|(e, _)| e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_equidistant_neighbours_are_uniform() {
        let cal = calibrate_sigma(&[4.0, 4.0], 2.0).unwrap();
        assert_eq!(cal.entropy, 1.0);
        assert!(cal.converged);
        assert_eq!(cal.steps, 1);
        assert_eq!(conditional_row(&[4.0, 4.0], cal.sigma), vec![0.5, 0.5]);
    }

    #[test]
    fn unreachable_perplexity_flags() {
        // two neighbours cannot carry more than 1 bit
        let cal = calibrate_sigma(&[1.0, 2.0], 3.0).unwrap();
        assert!(!cal.converged);
        assert_eq!(cal.sigma, SIGMA_MAX);
    }

    #[test]
    fn degenerate_row_rejected() {
        assert!(calibrate_sigma(&[1.0], 1.0).is_err());
        assert!(calibrate_sigma(&[1.0, f64::NAN], 1.0).is_err());
    }

    #[test]
    fn config_validation() {
        let cfg = TsneConfig::default();
        assert!(cfg.validate(31).is_ok());
        assert!(matches!(cfg.validate(30), Err(ReductionError::InvalidPerplexity { .. })));
        assert!(matches!(cfg.validate(3), Err(ReductionError::TooFewPoints { .. })));
        let zero = TsneConfig { iterations: 0, ..cfg };
        assert!(zero.validate(40).is_err());
    }

    #[test]
    fn affinity_normalizations() {
        let rows: Vec<Vec<f64>> = (0..12u32).map(|i| vec![(i as f64).sin() * 3.0, (i * i % 7) as f64, i as f64 * 0.1]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let (cond, cals) = conditional_affinities(&refs, 3.0).unwrap();
        assert!(cals.iter().all(|c| c.converged));
        for i in 0..12 {
            let s: f64 = cond[i * 12..(i + 1) * 12].iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert_eq!(cond[i * 12 + i], 0.0);
        }
        let p = symmetrize(&cond, 12);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let y: Vec<[f64; 2]> = (0..12).map(|i| [i as f64 * 0.3, (i as f64).cos()]).collect();
        assert!((low_dim_affinities(&y).iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
