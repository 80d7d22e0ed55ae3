use rustfft::num_complex::Complex64;

use super::stft::Spectral;
use super::{AcousticError, AudioBuffer, MagnitudeSpectrogram};

/// Peak level of every Griffin-Lim output.
pub const GRIFFIN_LIM_PEAK: f64 = 0.9;

/// `‖|STFT(y)| − target‖_F / ‖target‖_F`. Zero when both are zero.
pub fn spectral_convergence(estimate: &MagnitudeSpectrogram, target: &MagnitudeSpectrogram) -> f64 {
    assert_eq!(estimate.frames(), target.frames(), "frame count mismatch");
    assert_eq!(estimate.bins(), target.bins(), "bin count mismatch");
    let diff: f64 = estimate
        .data()
        .iter()
        .zip(target.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = target.frobenius_norm();
    if norm == 0.0 {
        diff
    } else {
        diff / norm
    }
}

/// Momentum of the accelerated update; zero gives the classic algorithm.
pub const GRIFFIN_LIM_MOMENTUM: f64 = 0.99;

/// Griffin-Lim phase reconstruction without the final peak normalization.
///
/// Phases start at zero. Each iteration resynthesizes, re-analyses and keeps
/// only the phase of the new estimate, extrapolated along the previous step
/// (the "fast" Griffin-Lim update). The result has
/// `cfg.signal_len(target.frames())` samples, so its STFT has the same shape
/// as `target`.
pub fn griffin_lim_raw(target: &MagnitudeSpectrogram, iterations: usize) -> Result<Vec<f64>, AcousticError> {
    let cfg = *target.config();
    let engine = Spectral::new(cfg)?;
    let frames = target.frames();
    let len = cfg.signal_len(frames);
    let mut spec: Vec<Complex64> = target.data().iter().map(|&m| Complex64::new(m, 0.0)).collect();
    let mut previous = vec![Complex64::new(0.0, 0.0); spec.len()];
    let carry = GRIFFIN_LIM_MOMENTUM / (1.0 + GRIFFIN_LIM_MOMENTUM);
    let mut signal = engine.synthesize(&spec, frames, len);
    for _ in 0..iterations {
        let (rebuilt, _) = engine.analyze(&signal);
        for (((s, r), p), &m) in spec.iter_mut().zip(&rebuilt).zip(&previous).zip(target.data()) {
            let dir = r - p * carry;
            let norm = dir.norm();
            *s = if norm > 0.0 {
                dir * (m / norm)
            } else {
                Complex64::new(m, 0.0)
            };
        }
        previous = rebuilt;
        signal = engine.synthesize(&spec, frames, len);
    }
    Ok(signal)
}

/// Griffin-Lim reconstruction peak-normalized to [`GRIFFIN_LIM_PEAK`].
pub fn griffin_lim(target: &MagnitudeSpectrogram, iterations: usize) -> Result<AudioBuffer, AcousticError> {
    let mut signal = griffin_lim_raw(target, iterations)?;
    let peak = signal.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > 0.0 {
        let gain = GRIFFIN_LIM_PEAK / peak;
        signal.iter_mut().for_each(|s| *s *= gain);
    }
    AudioBuffer::new(signal, target.config().sample_rate)
}
