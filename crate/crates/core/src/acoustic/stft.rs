use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{AcousticError, AudioBuffer, FrameConfig};

/// Periodic Hann window (COLA at hop = len/4).
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Row-major frames x bins matrix of non-negative magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeSpectrogram {
    data: Vec<f64>,
    frames: usize,
    config: FrameConfig,
}

impl MagnitudeSpectrogram {
    pub fn new(data: Vec<f64>, frames: usize, config: FrameConfig) -> Result<Self, AcousticError> {
        config.validate()?;
        if data.len() != frames * config.n_bins() {
            return Err(AcousticError::InvalidConfig(format!(
                "spectrogram data has {} values, expected {} frames x {} bins",
                data.len(),
                frames,
                config.n_bins()
            )));
        }
        if let Some(i) = data.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(AcousticError::InvalidAudio(format!(
                "magnitude entry {i} is negative or not finite"
            )));
        }
        Ok(Self {
            data,
            frames,
            config,
        })
    }

    pub fn zeros(frames: usize, config: FrameConfig) -> Self {
        Self {
            data: vec![0.0; frames * config.n_bins()],
            frames,
            config,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.config.n_bins()
    }

    pub fn config(&self) -> &FrameConfig {
        &self.config
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let b = self.bins();
        &self.data[t * b..(t + 1) * b]
    }

    pub(crate) fn frame_mut(&mut self, t: usize) -> &mut [f64] {
        let b = self.bins();
        &mut self.data[t * b..(t + 1) * b]
    }

    pub fn iter_frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.bins())
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Per-bin phases in radians, same layout as [`MagnitudeSpectrogram`].
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMatrix {
    pub(crate) data: Vec<f64>,
    pub(crate) frames: usize,
    pub(crate) bins: usize,
}

impl PhaseMatrix {
    pub fn zeros(frames: usize, bins: usize) -> Self {
        Self {
            data: vec![0.0; frames * bins],
            frames,
            bins,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }
}

/// Mirror index into `[0, len)` without repeating the edge sample.
fn reflect(j: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = j.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Shared FFT plans and window for repeated analysis/synthesis at one config.
pub(crate) struct Spectral {
    cfg: FrameConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Spectral {
    pub(crate) fn new(cfg: FrameConfig) -> Result<Self, AcousticError> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            cfg,
            window: hann_window(cfg.fft_size),
            forward: planner.plan_fft_forward(cfg.fft_size),
            inverse: planner.plan_fft_inverse(cfg.fft_size),
        })
    }

    pub(crate) fn window(&self) -> &[f64] {
        &self.window
    }

    /// Reflect-padded frame `t` of `signal`, before windowing. Samples beyond
    /// the reflected region are zero.
    pub(crate) fn raw_frame(&self, signal: &[f64], t: usize, out: &mut [f64]) {
        let n = self.cfg.fft_size;
        let half = (n / 2) as isize;
        let len = signal.len() as isize;
        let start = (t * self.cfg.hop) as isize - half;
        for (k, slot) in out.iter_mut().enumerate() {
            let j = start + k as isize;
            *slot = if len == 0 || j >= len + half {
                0.0
            } else if (0..len).contains(&j) {
                signal[j as usize]
            } else {
                signal[reflect(j, signal.len())]
            };
        }
    }

    /// Complex STFT, one-sided, frames x bins.
    pub(crate) fn analyze(&self, signal: &[f64]) -> (Vec<Complex64>, usize) {
        let n = self.cfg.fft_size;
        let bins = self.cfg.n_bins();
        let frames = self.cfg.frame_count(signal.len());
        let mut out = Vec::with_capacity(frames * bins);
        let mut raw = vec![0.0; n];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for t in 0..frames {
            self.raw_frame(signal, t, &mut raw);
            for ((b, &x), &w) in buf.iter_mut().zip(&raw).zip(&self.window) {
                *b = Complex64::new(x * w, 0.0);
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            out.extend_from_slice(&buf[..bins]);
        }
        (out, frames)
    }

    /// Weighted overlap-add inverse of [`Spectral::analyze`], producing `len`
    /// samples.
    pub(crate) fn synthesize(&self, spec: &[Complex64], frames: usize, len: usize) -> Vec<f64> {
        let n = self.cfg.fft_size;
        let hop = self.cfg.hop;
        let bins = self.cfg.n_bins();
        let half = n / 2;
        // output index i corresponds to padded position i + half
        let total = (frames.saturating_sub(1)) * hop + n;
        let mut acc = vec![0.0; total.max(len + half)];
        let mut norm = vec![0.0; acc.len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        let scale = 1.0 / n as f64;
        for t in 0..frames {
            let frame = &spec[t * bins..(t + 1) * bins];
            buf[..bins].copy_from_slice(frame);
            // Hermitian mirror; DC and Nyquist imaginary parts are dropped.
            buf[0].im = 0.0;
            buf[half].im = 0.0;
            for k in 1..half {
                buf[n - k] = frame[k].conj();
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let start = t * hop;
            for k in 0..n {
                let w = self.window[k];
                acc[start + k] += buf[k].re * scale * w;
                norm[start + k] += w * w;
            }
        }
        (0..len)
            .map(|i| {
                let p = i + half;
                if norm[p] > 1e-10 {
                    acc[p] / norm[p]
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Short-time Fourier transform with reflect padding of `fft_size / 2` on
/// both ends. Frame `t` is centred on sample `t * hop`; the frame count is
/// `(len + fft_size) / hop`.
pub fn stft(
    audio: &AudioBuffer,
    cfg: &FrameConfig,
) -> Result<(MagnitudeSpectrogram, PhaseMatrix), AcousticError> {
    check_rate(audio, cfg)?;
    let engine = Spectral::new(*cfg)?;
    let (spec, frames) = engine.analyze(audio.samples());
    let mags = spec.iter().map(|c| c.norm()).collect();
    let phases = spec.iter().map(|c| c.arg()).collect();
    Ok((
        MagnitudeSpectrogram {
            data: mags,
            frames,
            config: *cfg,
        },
        PhaseMatrix {
            data: phases,
            frames,
            bins: cfg.n_bins(),
        },
    ))
}

/// Inverse STFT from magnitude and phase, producing `len` samples.
pub fn istft(
    mag: &MagnitudeSpectrogram,
    phase: &PhaseMatrix,
    len: usize,
) -> Result<AudioBuffer, AcousticError> {
    if phase.frames != mag.frames() || phase.bins != mag.bins() {
        return Err(AcousticError::InvalidConfig(format!(
            "phase shape {}x{} does not match magnitude {}x{}",
            phase.frames,
            phase.bins,
            mag.frames(),
            mag.bins()
        )));
    }
    let engine = Spectral::new(*mag.config())?;
    let spec: Vec<Complex64> = mag
        .data()
        .iter()
        .zip(&phase.data)
        .map(|(&m, &p)| Complex64::from_polar(m, p))
        .collect();
    let samples = engine.synthesize(&spec, mag.frames(), len);
    AudioBuffer::new(samples, mag.config().sample_rate)
}

pub(crate) fn check_rate(audio: &AudioBuffer, cfg: &FrameConfig) -> Result<(), AcousticError> {
    if audio.sample_rate() != cfg.sample_rate {
        return Err(AcousticError::InvalidAudio(format!(
            "sample rate {} does not match configured {}",
            audio.sample_rate(),
            cfg.sample_rate
        )));
    }
    Ok(())
}
