use super::{AcousticError, MagnitudeSpectrogram};

/// HTK mel scale: `2595 * log10(1 + f / 700)`.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    data: Vec<f64>,
    frames: usize,
    n_mels: usize,
    fmin: f64,
    fmax: f64,
}

impl MelSpectrogram {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn fmin(&self) -> f64 {
        self.fmin
    }

    pub fn fmax(&self) -> f64 {
        self.fmax
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_mels..(t + 1) * self.n_mels]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Triangular filterbank, `n_mels` rows of `fft_size / 2 + 1` weights, with
/// peaks of height 1 at mel-equispaced centres between `fmin` and `fmax`.
pub fn mel_filterbank(
    n_mels: usize,
    fmin: f64,
    fmax: f64,
    fft_size: usize,
    sample_rate: u32,
) -> Result<Vec<Vec<f64>>, AcousticError> {
    let nyquist = sample_rate as f64 / 2.0;
    if n_mels == 0 || !(0.0..fmax).contains(&fmin) || fmax > nyquist {
        return Err(AcousticError::InvalidMelRange { fmin, fmax, nyquist });
    }
    let (mlo, mhi) = (hz_to_mel(fmin), hz_to_mel(fmax));
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mlo + (mhi - mlo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bins = fft_size / 2 + 1;
    let bin_hz = sample_rate as f64 / fft_size as f64;

    let mut bank = Vec::with_capacity(n_mels);
    for m in 0..n_mels {
        let (lo, centre, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let row: Vec<f64> = (0..bins)
            .map(|k| {
                let f = k as f64 * bin_hz;
                if f <= lo || f >= hi {
                    0.0
                } else if f <= centre {
                    (f - lo) / (centre - lo)
                } else {
                    (hi - f) / (hi - centre)
                }
            })
            .collect();
        if row.iter().all(|&w| w == 0.0) {
            return Err(AcousticError::EmptyMelFilter {
                index: m,
                n_mels,
                fft_size,
            });
        }
        bank.push(row);
    }
    Ok(bank)
}

pub fn mel_project(
    mag: &MagnitudeSpectrogram,
    n_mels: usize,
    fmin: f64,
    fmax: f64,
) -> Result<MelSpectrogram, AcousticError> {
    let cfg = mag.config();
    let bank = mel_filterbank(n_mels, fmin, fmax, cfg.fft_size, cfg.sample_rate)?;
    let mut data = Vec::with_capacity(mag.frames() * n_mels);
    for frame in mag.iter_frames() {
        data.extend(
            bank.iter()
                .map(|row| row.iter().zip(frame).map(|(w, x)| w * x).sum::<f64>()),
        );
    }
    Ok(MelSpectrogram {
        data,
        frames: mag.frames(),
        n_mels,
        fmin,
        fmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustic::FrameConfig;

    #[test]
    fn htk_reference_value() {
        let expected = 2595.0 * (1.0f64 + 1000.0 / 700.0).log10();
        assert!((hz_to_mel(1000.0) - expected).abs() < 1e-12);
        assert!((hz_to_mel(1000.0) - 1000.0).abs() < 0.1);
        assert!((mel_to_hz(hz_to_mel(4321.0)) - 4321.0).abs() < 1e-9);
    }

    #[test]
    fn zero_magnitude_projects_to_zero() {
        let cfg = FrameConfig::default();
        let mel = mel_project(&MagnitudeSpectrogram::zeros(7, cfg), 80, 50.0, 11025.0).unwrap();
        assert_eq!(mel.frames(), 7);
        assert!(mel.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_bin_hits_at_most_two_adjacent_filters() {
        let cfg = FrameConfig::default();
        for k in 1..cfg.n_bins() {
            let mut data = vec![0.0; cfg.n_bins()];
            data[k] = 1.0;
            let mag = MagnitudeSpectrogram::new(data, 1, cfg).unwrap();
            let mel = mel_project(&mag, 80, 50.0, 11025.0).unwrap();
            let hits: Vec<usize> = (0..80).filter(|&m| mel.frame(0)[m] > 0.0).collect();
            assert!(hits.len() <= 2, "bin {k}: {hits:?}");
            if hits.len() == 2 {
                assert_eq!(hits[1], hits[0] + 1);
            }
        }
    }

    #[test]
    fn flat_frame_is_strictly_positive() {
        let cfg = FrameConfig::default();
        let mag = MagnitudeSpectrogram::new(vec![1.0; cfg.n_bins()], 1, cfg).unwrap();
        let mel = mel_project(&mag, 80, 50.0, 11025.0).unwrap();
        assert!(mel.frame(0).iter().all(|&v| v > 0.0));
        let bank = mel_filterbank(80, 50.0, 11025.0, 1024, 22050).unwrap();
        assert!(bank.iter().all(|row| row.iter().all(|&w| w >= 0.0) && row.iter().sum::<f64>() > 0.0));
    }

    #[test]
    fn too_many_mels_is_an_error() {
        let err = mel_filterbank(400, 50.0, 11025.0, 256, 22050).unwrap_err();
        assert!(matches!(err, AcousticError::EmptyMelFilter { .. }));
    }

    #[test]
    fn invalid_range_rejected() {
        assert!(mel_filterbank(10, 500.0, 400.0, 1024, 22050).is_err());
        assert!(mel_filterbank(10, 50.0, 12000.0, 1024, 22050).is_err());
    }
}
