use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::stft::check_rate;
use super::{AcousticError, AudioBuffer, FrameConfig};

/// Autocorrelation analysis window, independent of `fft_size`.
pub const F0_WINDOW: usize = 2048;

/// A candidate lag must reach this fraction of the best correlation to be
/// preferred over a longer lag; keeps period multiples from winning.
const PEAK_RATIO: f64 = 0.9;

const MIN_RMS: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F0Params {
    pub f0_floor: f64,
    pub f0_ceil: f64,
    pub voicing_threshold: f64,
}

impl Default for F0Params {
    fn default() -> Self {
        Self {
            f0_floor: 60.0,
            f0_ceil: 400.0,
            voicing_threshold: 0.3,
        }
    }
}

impl F0Params {
    /// Geometric centre of the search band.
    pub fn band_centre(&self) -> f64 {
        (self.f0_floor * self.f0_ceil).sqrt()
    }
}

/// Per-frame F0 on the STFT hop grid; `None` marks an unvoiced frame.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Track {
    pub frames: Vec<Option<f64>>,
    pub hop: usize,
}

impl F0Track {
    pub fn voiced(&self) -> impl Iterator<Item = f64> + '_ {
        self.frames.iter().filter_map(|f| *f)
    }

    pub fn voiced_count(&self) -> usize {
        self.voiced().count()
    }

    pub fn voiced_fraction(&self) -> f64 {
        if self.frames.is_empty() {
            0.0
        } else {
            self.voiced_count() as f64 / self.frames.len() as f64
        }
    }

    pub fn mean_voiced(&self) -> Option<f64> {
        let n = self.voiced_count();
        (n > 0).then(|| self.voiced().sum::<f64>() / n as f64)
    }
}

/// Normalized-autocorrelation F0 tracker.
///
/// Each frame takes a [`F0_WINDOW`]-sample window centred on `t * hop`
/// (zero outside the signal) and evaluates
/// `r(τ) = Σ x[n]x[n+τ] / sqrt(Σ x[n]² Σ x[n+τ]²)` over the lags of the
/// search band. The shortest local maximum within [`PEAK_RATIO`] of the best
/// one is refined by parabolic interpolation and gives `f0 = sr / lag`.
pub fn estimate_f0(audio: &AudioBuffer, cfg: &FrameConfig, params: &F0Params) -> Result<F0Track, AcousticError> {
    cfg.validate()?;
    check_rate(audio, cfg)?;
    let sr = cfg.sample_rate as f64;
    let min_lag = ((sr / params.f0_ceil).floor() as usize).max(2);
    let max_lag = ((sr / params.f0_floor).ceil() as usize).min(F0_WINDOW - 2);
    if min_lag + 2 > max_lag {
        return Err(AcousticError::InvalidConfig(format!(
            "f0 band [{}, {}] has no usable lags",
            params.f0_floor, params.f0_ceil
        )));
    }

    let fft_len = (2 * F0_WINDOW).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(fft_len);
    let inv = planner.plan_fft_inverse(fft_len);
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
    let mut window = vec![0.0; F0_WINDOW];
    let mut prefix = vec![0.0; F0_WINDOW + 1];
    let mut r = vec![0.0; max_lag + 2];

    let x = audio.samples();
    let frames = cfg.frame_count(x.len());
    let mut out = Vec::with_capacity(frames);
    for t in 0..frames {
        let start = (t * cfg.hop) as isize - (F0_WINDOW / 2) as isize;
        for (k, w) in window.iter_mut().enumerate() {
            let j = start + k as isize;
            *w = if j >= 0 && (j as usize) < x.len() { x[j as usize] } else { 0.0 };
        }
        for (k, &v) in window.iter().enumerate() {
            prefix[k + 1] = prefix[k] + v * v;
        }
        let energy = prefix[F0_WINDOW];
        if (energy / F0_WINDOW as f64).sqrt() <= MIN_RMS {
            out.push(None);
            continue;
        }

        for (b, &v) in buf.iter_mut().zip(window.iter().chain(std::iter::repeat(&0.0))) {
            *b = Complex64::new(v, 0.0);
        }
        fwd.process(&mut buf);
        buf.iter_mut().for_each(|c| *c = Complex64::new(c.norm_sqr(), 0.0));
        inv.process(&mut buf);

        for (lag, slot) in r.iter_mut().enumerate().skip(min_lag - 1) {
            let head = prefix[F0_WINDOW - lag];
            let tail = energy - prefix[lag];
            let denom = (head * tail).sqrt();
            *slot = if denom > 0.0 {
                buf[lag].re / fft_len as f64 / denom
            } else {
                0.0
            };
        }

        out.push(pick_lag(&r, min_lag, max_lag, params.voicing_threshold).and_then(|lag| {
            let f0 = sr / lag;
            (params.f0_floor..=params.f0_ceil).contains(&f0).then_some(f0)
        }));
    }
    Ok(F0Track {
        frames: out,
        hop: cfg.hop,
    })
}

fn pick_lag(r: &[f64], min_lag: usize, max_lag: usize, threshold: f64) -> Option<f64> {
    let is_peak = |l: usize| r[l] >= r[l - 1] && r[l] > r[l + 1];
    let best = (min_lag..=max_lag)
        .filter(|&l| is_peak(l))
        .map(|l| r[l])
        .fold(f64::NEG_INFINITY, f64::max);
    if best.is_nan() || best <= threshold {
        return None;
    }
    let lag = (min_lag..=max_lag).find(|&l| is_peak(l) && r[l] >= PEAK_RATIO * best)?;
    let (a, b, c) = (r[lag - 1], r[lag], r[lag + 1]);
    let curvature = a - 2.0 * b + c;
    let shift = if curvature < 0.0 { 0.5 * (a - c) / curvature } else { 0.0 };
    Some(lag as f64 + shift.clamp(-0.5, 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(freq: f64, secs: f64) -> AudioBuffer {
        let sr = 22050;
        let n = (secs * sr as f64) as usize;
        AudioBuffer::new(
            (0..n).map(|i| 0.5 * (2.0 * PI * freq * i as f64 / sr as f64).sin()).collect(),
            sr,
        )
        .unwrap()
    }

    fn interior(track: &F0Track) -> &[Option<f64>] {
        let margin = F0_WINDOW / 2 / track.hop + 1;
        &track.frames[margin..track.frames.len() - margin - 4]
    }

    #[test]
    fn sine_110_is_voiced_and_accurate() {
        let cfg = FrameConfig::default();
        let track = estimate_f0(&sine(110.0, 1.0), &cfg, &F0Params::default()).unwrap();
        let inner = interior(&track);
        assert!(inner.iter().all(|f| f.is_some()));
        let mean = inner.iter().flatten().sum::<f64>() / inner.len() as f64;
        assert!((mean - 110.0).abs() < 2.0, "{mean}");
    }

    #[test]
    fn sine_220_has_no_octave_error() {
        let cfg = FrameConfig::default();
        let track = estimate_f0(&sine(220.0, 1.0), &cfg, &F0Params::default()).unwrap();
        let mean = track.mean_voiced().unwrap();
        assert!((mean - 220.0).abs() < 3.0, "{mean}");
        assert!(track.voiced().all(|f| f > 110.0 * 1.1));
    }

    #[test]
    fn silence_is_unvoiced() {
        let cfg = FrameConfig::default();
        let track = estimate_f0(&AudioBuffer::silence(22050, 22050), &cfg, &F0Params::default()).unwrap();
        assert_eq!(track.voiced_count(), 0);
        assert_eq!(track.frames.len(), cfg.frame_count(22050));
    }

    #[test]
    fn gain_does_not_change_estimates() {
        let cfg = FrameConfig::default();
        let a = sine(165.0, 0.5);
        let t1 = estimate_f0(&a, &cfg, &F0Params::default()).unwrap();
        let t2 = estimate_f0(&a.scaled(0.25), &cfg, &F0Params::default()).unwrap();
        for (x, y) in t1.frames.iter().zip(&t2.frames) {
            match (x, y) {
                (Some(x), Some(y)) => assert!((x - y).abs() < 1e-9),
                (None, None) => {}
                _ => panic!("voicing changed under gain"),
            }
        }
    }
}
