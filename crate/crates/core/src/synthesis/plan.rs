use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::decode::ProsodyParams;
use super::text::{Segment, UnitSequence, Vowel};
use crate::acoustic::FrameConfig;

/// Share of a unit taken by its onset noise.
pub const ONSET_FRACTION: f64 = 0.25;
/// Declination depth at either end of the utterance, times `f0_range`.
const DECLINATION: f64 = 0.25;
/// Per-unit sinusoidal excursion depth, times `f0_range`.
const EXCURSION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameKind {
    Silence,
    Voiced,
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannedFrame {
    pub kind: FrameKind,
    /// Hz; zero unless voiced.
    pub f0: f64,
    /// Linear amplitude.
    pub amplitude: f64,
    pub vowel: Vowel,
}

impl PlannedFrame {
    const SILENT: Self = Self {
        kind: FrameKind::Silence,
        f0: 0.0,
        amplitude: 0.0,
        vowel: Vowel::A,
    };
}

/// Frame-level realization of a unit sequence on the STFT hop grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProsodyPlan {
    pub frames: Vec<PlannedFrame>,
    /// Target length of the rendered signal.
    pub samples: usize,
    pub config: FrameConfig,
}

impl ProsodyPlan {
    pub fn voiced_frames(&self) -> impl Iterator<Item = &PlannedFrame> {
        self.frames.iter().filter(|f| f.kind == FrameKind::Voiced)
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples as f64 / self.config.sample_rate as f64
    }
}

struct Span {
    start: f64,
    end: f64,
    /// Start of the voiced part.
    voice_start: f64,
    /// Voiced time accumulated before this unit.
    voice_offset: f64,
    index: usize,
    vowel: Vowel,
    voiced: bool,
}

/// Lays units out in time and assigns every frame a kind, F0 and amplitude.
///
/// Each unit lasts `1 / rate` seconds. Its amplitude follows a half-sine
/// envelope scaled by `energy_db` and alternately raised and lowered by
/// `energy_var`. F0 declines linearly along the voiced time of the utterance
/// and carries a one-period cosine excursion over the voiced part of each
/// unit, so the contour averages to `f0_mean`. Frame `t` samples the plan at
/// time `t * hop / sample_rate`.
pub fn plan_prosody(units: &UnitSequence, p: &ProsodyParams, cfg: &FrameConfig) -> ProsodyPlan {
    let unit_secs = 1.0 / p.rate;
    let mut spans = Vec::new();
    let mut t = 0.0;
    let mut voiced_total = 0.0;
    for seg in &units.segments {
        match seg {
            Segment::Pause { secs } => t += secs,
            Segment::Unit(u) => {
                let voice_start = if u.has_onset_noise {
                    t + ONSET_FRACTION * unit_secs
                } else {
                    t
                };
                spans.push(Span {
                    start: t,
                    end: t + unit_secs,
                    voice_start,
                    voice_offset: voiced_total,
                    index: spans.len(),
                    vowel: u.vowel_class,
                    voiced: u.voiced,
                });
                if u.voiced {
                    voiced_total += t + unit_secs - voice_start;
                }
                t += unit_secs;
            }
        }
    }
    let total = t;
    let sr = cfg.sample_rate as f64;
    let samples = (total * sr).round() as usize;
    let n_frames = cfg.frame_count(samples);
    let base_amp = 10f64.powf(p.energy_db / 20.0);

    let mut frames = vec![PlannedFrame::SILENT; n_frames];
    let mut cursor = 0;
    for (i, frame) in frames.iter_mut().enumerate() {
        let time = (i * cfg.hop) as f64 / sr;
        if time >= total {
            break;
        }
        while cursor < spans.len() && spans[cursor].end <= time {
            cursor += 1;
        }
        let Some(span) = spans.get(cursor).filter(|s| s.start <= time) else {
            continue;
        };
        let u = (time - span.start) / (span.end - span.start);
        let sign = if span.index % 2 == 0 { 1.0 } else { -1.0 };
        let amplitude = base_amp * (1.0 + sign * p.energy_var) * (PI * u).sin();
        if !span.voiced || time < span.voice_start {
            *frame = PlannedFrame {
                kind: FrameKind::Noise,
                f0: 0.0,
                amplitude,
                vowel: span.vowel,
            };
            continue;
        }
        let into_voice = time - span.voice_start;
        let s = (span.voice_offset + into_voice) / voiced_total;
        let declined = p.f0_mean * (1.0 + DECLINATION * p.f0_range * (1.0 - 2.0 * s));
        let phase = into_voice / (span.end - span.voice_start);
        let f0 = declined * (1.0 + EXCURSION * p.f0_range * (2.0 * PI * phase).cos());
        *frame = PlannedFrame {
            kind: FrameKind::Voiced,
            f0,
            amplitude,
            vowel: span.vowel,
        };
    }
    ProsodyPlan {
        frames,
        samples,
        config: *cfg,
    }
}
