//! Text plus latent vector to audio.
//!
//! The builtin backend decodes the latent to [`ProsodyParams`], segments the
//! text into syllable-like units, renders a source-filter magnitude
//! spectrogram and inverts it with Griffin-Lim. [`ExternalBackend`] forwards
//! the request to a remote model over HTTP instead.

mod decode;
mod external;
mod plan;
mod render;
mod text;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acoustic::{
    griffin_lim, mel_project, AcousticError, AudioBuffer, FrameConfig, MagnitudeSpectrogram, MelSpectrogram,
};
use crate::style::{LatentVector, Scaler};

pub use decode::{
    decode_latent, latent_for_f0, prosody_from_raw, ProsodyParams, F0_MAX, F0_MIN, RATE_MAX, RATE_MIN,
};
pub use external::{ExternalBackend, ExternalError, DEFAULT_TIMEOUT};
pub use plan::{plan_prosody, FrameKind, PlannedFrame, ProsodyPlan, ONSET_FRACTION};
pub use render::{formant_envelope, render_spectrogram};
pub use text::{text_to_units, validate_text, Segment, Unit, UnitSequence, Vowel, MAX_TEXT_CHARS, PAUSE_SECS};

pub const GRIFFIN_LIM_ITERATIONS: usize = 60;
pub const MEL_BANDS: usize = 80;
pub const MEL_FMIN: f64 = 50.0;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    External(#[from] ExternalError),
    #[error("internal synthesis error: {0}")]
    Internal(String),
}

impl SynthesisError {
    /// Stable machine-readable category.
    pub fn category(&self) -> &'static str {
        match self {
            Self::InvalidRequest(_) => "invalid-request",
            Self::External(e) => e.category(),
            Self::Internal(_) => "internal",
        }
    }
}

impl From<AcousticError> for SynthesisError {
    fn from(e: AcousticError) -> Self {
        Self::Internal(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisRequest {
    pub text: String,
    pub latent: LatentVector,
}

impl SynthesisRequest {
    pub fn new(text: impl Into<String>, latent: LatentVector) -> Self {
        Self {
            text: text.into(),
            latent,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub audio: AudioBuffer,
    /// Absent for external backends.
    pub mel: Option<MelSpectrogram>,
    pub prosody: Option<ProsodyParams>,
    pub backend: &'static str,
}

pub trait SynthesisBackend: Send + Sync {
    fn synthesize(&self, req: &SynthesisRequest) -> Result<SynthesisResult, SynthesisError>;

    /// Short name that also keys the audio cache.
    fn tag(&self) -> &'static str;
}

/// Renders `text` with explicit prosody controls: segmentation, planning,
/// spectrogram rendering and Griffin-Lim inversion. Also returns the rendered
/// magnitude spectrogram.
pub fn render_text(
    text: &str,
    prosody: &ProsodyParams,
    cfg: &FrameConfig,
) -> Result<(AudioBuffer, MagnitudeSpectrogram), SynthesisError> {
    cfg.validate()?;
    if !prosody.is_finite() {
        return Err(SynthesisError::InvalidRequest("prosody parameters are not finite".into()));
    }
    let units = text_to_units(text)?;
    let plan = plan_prosody(&units, prosody, cfg);
    let spec = render_spectrogram(&plan, prosody);
    let audio = griffin_lim(&spec, GRIFFIN_LIM_ITERATIONS)?;
    Ok((audio, spec))
}

/// Runs the builtin pipeline. Pure: identical inputs give identical samples.
pub fn synthesize(req: &SynthesisRequest, scaler: &Scaler, cfg: &FrameConfig) -> Result<SynthesisResult, SynthesisError> {
    validate_text(&req.text)?;
    let prosody = decode_latent(&req.latent, scaler)?;
    let (audio, spec) = render_text(&req.text, &prosody, cfg)?;
    let mel = mel_project(&spec, MEL_BANDS, MEL_FMIN, cfg.nyquist())?;
    Ok(SynthesisResult {
        audio,
        mel: Some(mel),
        prosody: Some(prosody),
        backend: BuiltinBackend::TAG,
    })
}

#[derive(Debug, Clone)]
pub struct BuiltinBackend {
    scaler: Scaler,
    config: FrameConfig,
}

impl BuiltinBackend {
    pub const TAG: &'static str = "builtin";

    pub fn new(scaler: Scaler, config: FrameConfig) -> Self {
        Self { scaler, config }
    }

    pub fn scaler(&self) -> &Scaler {
        &self.scaler
    }
}

impl SynthesisBackend for BuiltinBackend {
    fn synthesize(&self, req: &SynthesisRequest) -> Result<SynthesisResult, SynthesisError> {
        synthesize(req, &self.scaler, &self.config)
    }

    fn tag(&self) -> &'static str {
        Self::TAG
    }
}
