//! Utterance-level prosody statistics standing in for a learned style
//! encoder, plus the z-score scaler that turns them into latent vectors.
//!
//! Every entry of [`RawStyleVector`] is an aggregate over the whole
//! utterance, so the vector is time-invariant by construction.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acoustic::{
    energy_envelope, estimate_f0, read_wav, stft, AcousticError, AudioBuffer, F0Params, FrameConfig,
};
use crate::table::{LatentTable, TableError, UtteranceRecord};

/// Number of style statistics.
pub const STYLE_DIM: usize = 8;

/// Shortest utterance accepted by [`extract_style`], in seconds.
pub const MIN_DURATION_SECS: f64 = 0.2;

const SMOOTHING_SECS: f64 = 0.05;
const MIN_PROMINENCE: f64 = 0.1;
const LOG_RMS_FLOOR: f64 = 1e-5;
const ACTIVE_FRAME_RATIO: f64 = 1e-6;
const LOG_MAG_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum StyleError {
    #[error(transparent)]
    Acoustic(#[from] AcousticError),
    #[error("audio too short: {secs:.3} s < {MIN_DURATION_SECS} s")]
    TooShort { secs: f64 },
    #[error("need at least 2 vectors to fit a scaler, got {0}")]
    TooFewVectors(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value at dimension {0}")]
    NonFinite(usize),
    #[error("corpus directory {0} does not exist")]
    MissingDirectory(PathBuf),
    #[error("corpus has {usable} usable wav files, need at least 2")]
    TooFewFiles { usable: usize },
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Physical-unit style statistics.
///
/// | dim | meaning |
/// |-----|---------|
/// | 0 | mean ln F0 over voiced frames |
/// | 1 | std of ln F0 over voiced frames |
/// | 2 | voiced-frame fraction |
/// | 3 | energy-envelope peaks per second (speaking-rate proxy) |
/// | 4 | mean ln RMS energy |
/// | 5 | std of ln RMS energy |
/// | 6 | mean spectral centroid, Hz |
/// | 7 | slope of the mean ln-magnitude spectrum vs normalized frequency |
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawStyleVector(pub [f64; STYLE_DIM]);

impl RawStyleVector {
    pub const LOG_F0_MEAN: usize = 0;
    pub const LOG_F0_STD: usize = 1;
    pub const VOICED_FRACTION: usize = 2;
    pub const PEAK_RATE: usize = 3;
    pub const LOG_ENERGY_MEAN: usize = 4;
    pub const LOG_ENERGY_STD: usize = 5;
    pub const CENTROID: usize = 6;
    pub const TILT: usize = 7;

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn from_slice(values: &[f64]) -> Result<Self, StyleError> {
        let arr: [f64; STYLE_DIM] = values.try_into().map_err(|_| StyleError::DimensionMismatch {
            expected: STYLE_DIM,
            got: values.len(),
        })?;
        Ok(Self(arr))
    }
}

/// Style vector in standardized (z-score) space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentVector(pub Vec<f64>);

impl LatentVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Per-dimension mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Identity transform of dimension `dim`.
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    fn check_dim(&self, got: usize) -> Result<(), StyleError> {
        if got != self.dim() {
            return Err(StyleError::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    /// `z = (raw - mean) / std`.
    pub fn standardize(&self, raw: &[f64]) -> Result<LatentVector, StyleError> {
        self.check_dim(raw.len())?;
        Ok(LatentVector(
            raw.iter()
                .zip(self.mean.iter().zip(&self.std))
                .map(|(x, (m, s))| (x - m) / s)
                .collect(),
        ))
    }

    /// `raw = z * std + mean`.
    pub fn unstandardize(&self, z: &LatentVector) -> Result<Vec<f64>, StyleError> {
        self.check_dim(z.dim())?;
        Ok(z.0
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| v * s + m)
            .collect())
    }
}

/// Fits a [`Scaler`]; dimensions with zero variance get `std = 1`.
pub fn fit_scaler<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Scaler, StyleError> {
    if vectors.len() < 2 {
        return Err(StyleError::TooFewVectors(vectors.len()));
    }
    let dim = vectors[0].as_ref().len();
    for v in vectors {
        let v = v.as_ref();
        if v.len() != dim {
            return Err(StyleError::DimensionMismatch { expected: dim, got: v.len() });
        }
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(StyleError::NonFinite(i));
        }
    }
    let n = vectors.len() as f64;
    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v.as_ref()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for v in vectors {
        for ((s, x), m) in var.iter_mut().zip(v.as_ref()).zip(&mean) {
            *s += (x - m).powi(2);
        }
    }
    let std = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 0.0 && sd.is_finite() {
                sd
            } else {
                1.0
            }
        })
        .collect();
    Ok(Scaler { mean, std })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Centred moving average; the window shrinks at the edges.
fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Local maxima (plateaus resolve to their middle) with their
/// topographic prominence.
pub(crate) fn peak_prominences(x: &[f64]) -> Vec<(usize, f64)> {
    let n = x.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            let mut ahead = i + 1;
            while ahead + 1 < n && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                peaks.push((i + ahead - 1) / 2);
                i = ahead;
            }
        }
        i += 1;
    }
    peaks
        .into_iter()
        .map(|p| {
            let h = x[p];
            let mut left_min = h;
            for &v in x[..p].iter().rev() {
                if v > h {
                    break;
                }
                left_min = left_min.min(v);
            }
            let mut right_min = h;
            for &v in &x[p + 1..] {
                if v > h {
                    break;
                }
                right_min = right_min.min(v);
            }
            (p, h - left_min.max(right_min))
        })
        .collect()
}

/// Counts energy-envelope peaks whose prominence reaches 10 % of the
/// envelope maximum, after 50 ms smoothing.
pub(crate) fn count_energy_peaks(rms: &[f64], cfg: &FrameConfig) -> usize {
    let frames_per_window = SMOOTHING_SECS / cfg.hop_secs();
    let width = 2 * ((frames_per_window - 1.0) / 2.0).round().max(0.0) as usize + 1;
    let smooth = moving_average(rms, width);
    let max = smooth.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0;
    }
    peak_prominences(&smooth)
        .into_iter()
        .filter(|&(_, prom)| prom >= MIN_PROMINENCE * max)
        .count()
}

/// Extracts the eight utterance-level statistics of [`RawStyleVector`].
///
/// Fully unvoiced audio reports the geometric centre of the F0 band for
/// dim 0 and zero spread for dim 1. Audio with no active frames reports
/// `sr / 4` as centroid and a flat tilt.
pub fn extract_style(audio: &AudioBuffer, cfg: &FrameConfig) -> Result<RawStyleVector, StyleError> {
    cfg.validate()?;
    if audio.sample_rate() != cfg.sample_rate {
        return Err(AcousticError::InvalidAudio(format!(
            "sample rate {} does not match configured {}",
            audio.sample_rate(),
            cfg.sample_rate
        ))
        .into());
    }
    let secs = audio.duration_secs();
    if secs < MIN_DURATION_SECS {
        return Err(StyleError::TooShort { secs });
    }
    let f0_params = F0Params::default();
    let mut v = [0.0; STYLE_DIM];

    let track = estimate_f0(audio, cfg, &f0_params)?;
    let log_f0: Vec<f64> = track.voiced().map(f64::ln).collect();
    if log_f0.is_empty() {
        v[RawStyleVector::LOG_F0_MEAN] = f0_params.band_centre().ln();
        v[RawStyleVector::LOG_F0_STD] = 0.0;
    } else {
        let (m, s) = mean_std(&log_f0);
        v[RawStyleVector::LOG_F0_MEAN] = m;
        v[RawStyleVector::LOG_F0_STD] = s;
    }
    v[RawStyleVector::VOICED_FRACTION] = track.voiced_fraction();

    let energy = energy_envelope(audio, cfg)?;
    v[RawStyleVector::PEAK_RATE] = count_energy_peaks(&energy.rms, cfg) as f64 / secs;
    let log_rms: Vec<f64> = energy.rms.iter().map(|e| e.max(LOG_RMS_FLOOR).ln()).collect();
    let (m, s) = mean_std(&log_rms);
    v[RawStyleVector::LOG_ENERGY_MEAN] = m;
    v[RawStyleVector::LOG_ENERGY_STD] = s;

    let (mag, _) = stft(audio, cfg)?;
    let bin_hz = cfg.bin_hz();
    let powers: Vec<f64> = mag.iter_frames().map(|f| f.iter().map(|x| x * x).sum()).collect();
    let max_power = powers.iter().copied().fold(0.0, f64::max);
    let active: Vec<usize> = (0..mag.frames())
        .filter(|&t| max_power > 0.0 && powers[t] >= ACTIVE_FRAME_RATIO * max_power)
        .collect();
    if active.is_empty() {
        v[RawStyleVector::CENTROID] = cfg.sample_rate as f64 / 4.0;
        v[RawStyleVector::TILT] = 0.0;
    } else {
        let centroids: Vec<f64> = active
            .iter()
            .map(|&t| {
                let f = mag.frame(t);
                let total: f64 = f.iter().sum();
                f.iter().enumerate().map(|(k, x)| k as f64 * bin_hz * x).sum::<f64>() / total
            })
            .collect();
        v[RawStyleVector::CENTROID] = mean_std(&centroids).0;

        let floor = LOG_MAG_FLOOR * mag.data().iter().copied().fold(0.0, f64::max);
        let bins = mag.bins();
        let mut mean_log = vec![0.0; bins];
        for &t in &active {
            for (acc, x) in mean_log.iter_mut().zip(mag.frame(t)) {
                *acc += (x + floor).ln();
            }
        }
        mean_log.iter_mut().for_each(|x| *x /= active.len() as f64);
        v[RawStyleVector::TILT] = least_squares_slope(&mean_log);
    }

    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(StyleError::NonFinite(i));
    }
    Ok(RawStyleVector(v))
}

/// Slope of the least-squares line through `y` against `k / (len - 1)`.
fn least_squares_slope(y: &[f64]) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    let xs: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
    let (mx, _) = mean_std(&xs);
    let my = y.iter().sum::<f64>() / n as f64;
    let sxy: f64 = xs.iter().zip(y).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Builds a [`LatentTable`] from a flat directory of `.wav` files.
///
/// Records are ordered by file name and keyed by file stem. Files that fail
/// to load or analyse are skipped with a warning.
pub fn ingest_corpus(dir: impl AsRef<Path>, cfg: &FrameConfig) -> Result<LatentTable, StyleError> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(StyleError::MissingDirectory(dir.to_path_buf()));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(AcousticError::from)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
        })
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));

    let extracted: Vec<Option<(PathBuf, RawStyleVector)>> = files
        .into_par_iter()
        .map(|path| {
            let result = read_wav(&path)
                .map_err(StyleError::from)
                .and_then(|audio| extract_style(&audio, cfg));
            match result {
                Ok(v) => Some((path, v)),
                Err(e) => {
                    log::warn!("skipping {}: {e}", path.display());
                    None
                }
            }
        })
        .collect();
    let usable: Vec<(PathBuf, RawStyleVector)> = extracted.into_iter().flatten().collect();
    if usable.len() < 2 {
        return Err(StyleError::TooFewFiles { usable: usable.len() });
    }

    let raws: Vec<&[f64]> = usable.iter().map(|(_, v)| v.as_slice()).collect();
    let scaler = fit_scaler(&raws)?;
    let records = usable
        .iter()
        .map(|(path, raw)| {
            Ok(UtteranceRecord {
                id: path.file_stem().unwrap_or_default().to_string_lossy().into_owned(),
                latent: scaler.standardize(raw.as_slice())?,
                source_path: Some(path.to_string_lossy().into_owned()),
                transcript: None,
            })
        })
        .collect::<Result<Vec<_>, StyleError>>()?;
    Ok(LatentTable::new(records, scaler)?)
}
