use std::f64::consts::LN_10;

use serde::{Deserialize, Serialize};

use super::SynthesisError;
use crate::style::{LatentVector, RawStyleVector, Scaler, STYLE_DIM};

pub const F0_MIN: f64 = 60.0;
pub const F0_MAX: f64 = 400.0;
pub const RATE_MIN: f64 = 1.0;
pub const RATE_MAX: f64 = 8.0;
pub const ENERGY_DB_MIN: f64 = -40.0;
pub const ENERGY_VAR_MAX: f64 = 0.5;
pub const CENTROID_MIN: f64 = 300.0;
pub const CENTROID_MAX: f64 = 6000.0;
pub const TILT_MIN: f64 = -2.0;
pub const TILT_MAX: f64 = 0.0;

/// Physical-unit synthesis controls decoded from a latent vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProsodyParams {
    /// Hz.
    pub f0_mean: f64,
    /// Relative F0 excursion, in [0, 1].
    pub f0_range: f64,
    /// Units per second.
    pub rate: f64,
    /// dB relative to full scale.
    pub energy_db: f64,
    /// Alternating per-unit amplitude modulation depth.
    pub energy_var: f64,
    /// Centre of the noise spectrum, Hz.
    pub centroid: f64,
    /// Source slope in dB per octave.
    pub tilt: f64,
    /// In [0, 1]; lower values give louder consonant noise.
    pub voicing_bias: f64,
}

impl Default for ProsodyParams {
    fn default() -> Self {
        Self {
            f0_mean: 150.0,
            f0_range: 0.0,
            rate: 4.0,
            energy_db: -12.0,
            energy_var: 0.0,
            centroid: 2000.0,
            tilt: -1.0,
            voicing_bias: 1.0,
        }
    }
}

impl ProsodyParams {
    pub fn is_finite(&self) -> bool {
        [
            self.f0_mean,
            self.f0_range,
            self.rate,
            self.energy_db,
            self.energy_var,
            self.centroid,
            self.tilt,
            self.voicing_bias,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

// `f64::clamp` lets NaN through; overflowed intermediates land on a bound.
fn clamp(x: f64, lo: f64, hi: f64) -> f64 {
    if x.is_nan() {
        lo
    } else {
        x.max(lo).min(hi)
    }
}

/// Maps unstandardized style statistics to synthesis controls.
pub fn prosody_from_raw(raw: &RawStyleVector) -> ProsodyParams {
    let r = raw.as_slice();
    ProsodyParams {
        f0_mean: clamp(r[RawStyleVector::LOG_F0_MEAN].exp(), F0_MIN, F0_MAX),
        f0_range: clamp(3.0 * r[RawStyleVector::LOG_F0_STD], 0.0, 1.0),
        rate: clamp(r[RawStyleVector::PEAK_RATE], RATE_MIN, RATE_MAX),
        energy_db: clamp(20.0 * r[RawStyleVector::LOG_ENERGY_MEAN] / LN_10, ENERGY_DB_MIN, 0.0),
        energy_var: clamp(0.1 * r[RawStyleVector::LOG_ENERGY_STD], 0.0, ENERGY_VAR_MAX),
        centroid: clamp(r[RawStyleVector::CENTROID], CENTROID_MIN, CENTROID_MAX),
        tilt: clamp(tilt_db_per_octave(r[RawStyleVector::TILT]), TILT_MIN, TILT_MAX),
        voicing_bias: clamp(r[RawStyleVector::VOICED_FRACTION], 0.0, 1.0),
    }
}

// Builtin renders measure a log-spectrum slope near -3.5 at zero tilt and
// about 0.5 lower per dB/octave of tilt.
const TILT_SLOPE_NEUTRAL: f64 = -3.5;
const TILT_SLOPE_GAIN: f64 = 2.0;

fn tilt_db_per_octave(slope: f64) -> f64 {
    TILT_SLOPE_GAIN * (slope - TILT_SLOPE_NEUTRAL)
}

/// Unstandardizes `z` with `scaler` and maps it through the clamps.
pub fn decode_latent(z: &LatentVector, scaler: &Scaler) -> Result<ProsodyParams, SynthesisError> {
    if z.dim() != STYLE_DIM {
        return Err(SynthesisError::InvalidRequest(format!(
            "latent has {} dimensions, expected {STYLE_DIM}",
            z.dim()
        )));
    }
    if let Some(i) = z.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(SynthesisError::InvalidRequest(format!("latent component {i} is not finite")));
    }
    let raw = scaler
        .unstandardize(z)
        .map_err(|e| SynthesisError::Internal(format!("scaler: {e}")))?;
    let raw = RawStyleVector::from_slice(&raw).map_err(|e| SynthesisError::Internal(e.to_string()))?;
    Ok(prosody_from_raw(&raw))
}

/// Latent whose decoded F0 mean is `f0` Hz, all other dimensions at the
/// corpus mean.
pub fn latent_for_f0(f0: f64, scaler: &Scaler) -> LatentVector {
    let mut z = vec![0.0; scaler.dim()];
    let i = RawStyleVector::LOG_F0_MEAN;
    z[i] = (f0.ln() - scaler.mean[i]) / scaler.std[i];
    LatentVector(z)
}
