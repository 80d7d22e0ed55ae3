use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::decode::ProsodyParams;
use super::plan::{FrameKind, ProsodyPlan};
use super::text::Vowel;
use crate::acoustic::{FrameConfig, MagnitudeSpectrogram};

const FORMANT_BANDWIDTHS: [f64; 3] = [80.0, 120.0, 200.0];
const ENVELOPE_FLOOR: f64 = 0.01;
const NOISE_SEED: u64 = 0x6c76_655f_6e6f_6973;

/// Hann main lobe at `delta` bins from a sinusoid, 1 at the centre.
fn main_lobe(delta: f64) -> f64 {
    let d = delta.abs();
    if d >= 2.0 {
        return 0.0;
    }
    if d < 1e-12 {
        return 1.0;
    }
    if (d - 1.0).abs() < 1e-9 {
        return 0.5;
    }
    (PI * d).sin() / (PI * d) / (1.0 - d * d)
}

/// Formant envelope: three Gaussian resonances over a constant floor.
pub fn formant_envelope(vowel: Vowel, hz: f64) -> f64 {
    let bumps: f64 = vowel
        .formants()
        .iter()
        .zip(FORMANT_BANDWIDTHS)
        .map(|(f, bw)| (-0.5 * ((hz - f) / bw).powi(2)).exp())
        .sum();
    ENVELOPE_FLOOR + bumps
}

fn add_voiced(frame: &mut [f64], f0: f64, amplitude: f64, vowel: Vowel, tilt: f64, cfg: &FrameConfig) {
    if f0 <= 0.0 || amplitude <= 0.0 {
        return;
    }
    let bin_hz = cfg.bin_hz();
    // A sine of amplitude a peaks at a * N / 4 under a periodic Hann window.
    let scale = amplitude * cfg.fft_size as f64 / 4.0;
    let last = frame.len() as f64 - 1.0;
    let mut h = 1.0;
    while h * f0 / bin_hz < last - 2.0 {
        let hz = h * f0;
        let gain = scale * formant_envelope(vowel, hz) * 10f64.powf(tilt * h.log2() / 20.0);
        let centre = hz / bin_hz;
        let lo = (centre - 2.0).ceil().max(0.0) as usize;
        let hi = (centre + 2.0).floor() as usize;
        for (k, bin) in frame.iter_mut().enumerate().take(hi + 1).skip(lo) {
            *bin += gain * main_lobe(k as f64 - centre);
        }
        h += 1.0;
    }
}

fn add_noise(frame: &mut [f64], amplitude: f64, p: &ProsodyParams, cfg: &FrameConfig, rng: &mut ChaCha8Rng) {
    if amplitude <= 0.0 {
        return;
    }
    let bin_hz = cfg.bin_hz();
    let width = (0.6 * p.centroid).max(400.0);
    let shape: Vec<f64> = (0..frame.len())
        .map(|k| (-0.5 * ((k as f64 * bin_hz - p.centroid) / width).powi(2)).exp())
        .collect();
    let rms = (shape.iter().map(|s| s * s).sum::<f64>() / shape.len() as f64).sqrt();
    // White noise of unit variance has expected |X|^2 = sum(w^2) = 3N/8.
    let scale = amplitude * (0.15 + 0.35 * (1.0 - p.voicing_bias)) * (3.0 * cfg.fft_size as f64 / 8.0).sqrt() / rms;
    for (x, s) in frame.iter_mut().zip(shape) {
        *x += scale * s * rng.random_range(0.5..1.5);
    }
}

/// Source-filter magnitude spectrogram for a prosody plan.
///
/// Voiced frames place a Hann main lobe at each harmonic of the frame F0,
/// weighted by the vowel's formant envelope and the `tilt` slope. Noise
/// frames get a jittered band centred on `centroid`. Silent frames are zero.
pub fn render_spectrogram(plan: &ProsodyPlan, p: &ProsodyParams) -> MagnitudeSpectrogram {
    let cfg = plan.config;
    let mut spec = MagnitudeSpectrogram::zeros(plan.frames.len(), cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(NOISE_SEED);
    for (t, f) in plan.frames.iter().enumerate() {
        let frame = spec.frame_mut(t);
        match f.kind {
            FrameKind::Silence => {}
            FrameKind::Voiced => add_voiced(frame, f.f0, f.amplitude, f.vowel, p.tilt, &cfg),
            FrameKind::Noise => add_noise(frame, f.amplitude, p, &cfg, &mut rng),
        }
    }
    spec
}
