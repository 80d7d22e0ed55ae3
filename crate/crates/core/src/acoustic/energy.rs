use super::stft::{check_rate, Spectral};
use super::{AcousticError, AudioBuffer, FrameConfig};

/// Per-frame RMS energy on the STFT frame grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrack {
    pub rms: Vec<f64>,
    pub hop: usize,
}

/// Hann-weighted RMS: `sqrt(Σ (w x)² / Σ w²)`, so a constant signal `c`
/// yields `|c|` in every fully covered frame.
pub fn energy_envelope(audio: &AudioBuffer, cfg: &FrameConfig) -> Result<EnergyTrack, AcousticError> {
    check_rate(audio, cfg)?;
    let engine = Spectral::new(*cfg)?;
    let window = engine.window();
    let weight: f64 = window.iter().map(|w| w * w).sum();
    let mut raw = vec![0.0; cfg.fft_size];
    let rms = (0..cfg.frame_count(audio.len()))
        .map(|t| {
            engine.raw_frame(audio.samples(), t, &mut raw);
            let e: f64 = raw.iter().zip(window).map(|(x, w)| (x * w).powi(2)).sum();
            (e / weight).sqrt()
        })
        .collect();
    Ok(EnergyTrack { rms, hop: cfg.hop })
}
