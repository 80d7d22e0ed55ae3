//! Deterministic DSP primitives: WAV I/O, STFT framing, mel projection,
//! Griffin-Lim inversion, F0 and energy tracking.

mod energy;
mod griffin_lim;
mod mel;
mod pitch;
mod stft;
mod wav;

pub use energy::{energy_envelope, EnergyTrack};
pub use griffin_lim::{griffin_lim, griffin_lim_raw, spectral_convergence, GRIFFIN_LIM_PEAK};
pub use mel::{hz_to_mel, mel_filterbank, mel_project, mel_to_hz, MelSpectrogram};
pub use pitch::{estimate_f0, F0Params, F0Track, F0_WINDOW};
pub use stft::{hann_window, istft, stft, MagnitudeSpectrogram, PhaseMatrix};
pub use wav::{decode_wav, encode_wav, read_wav, write_wav};

use thiserror::Error;

/// Default analysis rate for the whole pipeline.
pub const DEFAULT_SAMPLE_RATE: u32 = 22050;

#[derive(Debug, Error)]
pub enum AcousticError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed wav: {0}")]
    MalformedWav(String),
    #[error("unsupported wav encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("invalid frame config: {0}")]
    InvalidConfig(String),
    #[error("invalid audio: {0}")]
    InvalidAudio(String),
    #[error("mel filter {index} is empty; n_mels={n_mels} is too large for fft_size={fft_size}")]
    EmptyMelFilter {
        index: usize,
        n_mels: usize,
        fft_size: usize,
    },
    #[error("invalid mel range: fmin={fmin} fmax={fmax} (nyquist {nyquist})")]
    InvalidMelRange { fmin: f64, fmax: f64, nyquist: f64 },
}

/// Mono audio with samples nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AcousticError> {
        if sample_rate == 0 {
            return Err(AcousticError::InvalidAudio("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AcousticError::InvalidAudio(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()))
    }

    /// Returns a copy with every sample multiplied by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// STFT framing parameters. The analysis window is always a periodic Hann
/// window of length `fft_size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FrameConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            fft_size: 1024,
            hop: 256,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }
}

impl FrameConfig {
    pub fn new(fft_size: usize, hop: usize, sample_rate: u32) -> Result<Self, AcousticError> {
        let cfg = Self {
            fft_size,
            hop,
            sample_rate,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AcousticError> {
        if !self.fft_size.is_power_of_two() || self.fft_size < 4 {
            return Err(AcousticError::InvalidConfig(format!(
                "fft_size {} is not a power of two >= 4",
                self.fft_size
            )));
        }
        if self.hop == 0 || self.hop > self.fft_size {
            return Err(AcousticError::InvalidConfig(format!(
                "hop {} must satisfy 0 < hop <= fft_size ({})",
                self.hop, self.fft_size
            )));
        }
        if self.sample_rate == 0 {
            return Err(AcousticError::InvalidConfig("sample rate must be positive".into()));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Number of STFT frames for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        (len + self.fft_size) / self.hop
    }

    /// Signal length whose STFT has exactly `frames` frames; the inverse of
    /// [`FrameConfig::frame_count`] on its image.
    pub fn signal_len(&self, frames: usize) -> usize {
        (frames * self.hop).saturating_sub(self.fft_size)
    }

    pub fn bin_hz(&self) -> f64 {
        self.sample_rate as f64 / self.fft_size as f64
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate as f64 / 2.0
    }

    /// Frame duration on the hop grid, in seconds.
    pub fn hop_secs(&self) -> f64 {
        self.hop as f64 / self.sample_rate as f64
    }
}
