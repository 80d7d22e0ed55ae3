use serde::{Deserialize, Serialize};

use super::SynthesisError;

pub const MAX_TEXT_CHARS: usize = 500;
pub const PAUSE_SECS: f64 = 0.1;
/// Rate at which `base_duration` is expressed.
pub const NOMINAL_RATE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Vowel {
    A,
    E,
    I,
    O,
    U,
}

impl Vowel {
    fn from_letter(c: char) -> Option<Self> {
        Some(match c {
            'a' => Self::A,
            'e' => Self::E,
            'i' | 'y' => Self::I,
            'o' => Self::O,
            'u' => Self::U,
            _ => return None,
        })
    }

    /// Formant centre frequencies in Hz.
    pub fn formants(self) -> [f64; 3] {
        match self {
            Self::A => [800.0, 1200.0, 2500.0],
            Self::E => [500.0, 1900.0, 2500.0],
            Self::I => [300.0, 2300.0, 3000.0],
            Self::O => [500.0, 900.0, 2400.0],
            Self::U => [350.0, 800.0, 2250.0],
        }
    }
}

/// One syllable-like unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub vowel_class: Vowel,
    pub has_onset_noise: bool,
    /// False for the noise-only unit of a vowelless word.
    pub voiced: bool,
    /// Duration at [`NOMINAL_RATE`], seconds.
    pub base_duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Segment {
    Unit(Unit),
    Pause { secs: f64 },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UnitSequence {
    pub segments: Vec<Segment>,
}

impl UnitSequence {
    pub fn units(&self) -> impl Iterator<Item = &Unit> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Unit(u) => Some(u),
            Segment::Pause { .. } => None,
        })
    }

    pub fn unit_count(&self) -> usize {
        self.units().count()
    }

    pub fn pause_count(&self) -> usize {
        self.segments.len() - self.unit_count()
    }
}

/// Checks the request text bounds: non-blank and at most 500 characters.
pub fn validate_text(text: &str) -> Result<(), SynthesisError> {
    if text.trim().is_empty() {
        return Err(SynthesisError::InvalidRequest("text is empty".into()));
    }
    let n = text.chars().count();
    if n > MAX_TEXT_CHARS {
        return Err(SynthesisError::InvalidRequest(format!(
            "text has {n} characters, limit is {MAX_TEXT_CHARS}"
        )));
    }
    Ok(())
}

fn word_units(word: &str) -> Vec<Unit> {
    let unit = |vowel_class, has_onset_noise, voiced| Unit {
        vowel_class,
        has_onset_noise,
        voiced,
        base_duration: 1.0 / NOMINAL_RATE,
    };
    let mut units = Vec::new();
    let mut consonant_run = false;
    let mut in_vowels = false;
    for c in word.chars().filter(|c| c.is_alphabetic()) {
        match Vowel::from_letter(c) {
            Some(v) => {
                if !in_vowels {
                    units.push(unit(v, consonant_run, true));
                }
                in_vowels = true;
                consonant_run = false;
            }
            None => {
                in_vowels = false;
                consonant_run = true;
            }
        }
    }
    if units.is_empty() && consonant_run {
        units.push(unit(Vowel::A, true, false));
    }
    units
}

/// Letter-based segmentation: lowercase, split on whitespace, one unit per
/// maximal vowel group (its first vowel names the class, `y` counts as I),
/// onset noise when consonants precede the group, a 0.1 s pause between
/// words. Words with letters but no vowels give a single noise-only unit.
pub fn text_to_units(text: &str) -> Result<UnitSequence, SynthesisError> {
    validate_text(text)?;
    let lower = text.to_lowercase();
    let mut segments = Vec::new();
    for word in lower.split_whitespace() {
        let units = word_units(word);
        if units.is_empty() {
            continue;
        }
        if !segments.is_empty() {
            segments.push(Segment::Pause { secs: PAUSE_SECS });
        }
        segments.extend(units.into_iter().map(Segment::Unit));
    }
    if segments.is_empty() {
        return Err(SynthesisError::InvalidRequest("text contains no letters".into()));
    }
    Ok(UnitSequence { segments })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classes(seq: &UnitSequence) -> Vec<(Vowel, bool, bool)> {
        seq.units().map(|u| (u.vowel_class, u.has_onset_noise, u.voiced)).collect()
    }

    #[test]
    fn single_vowel() {
        let s = text_to_units("a").unwrap();
        assert_eq!(classes(&s), vec![(Vowel::A, false, true)]);
        assert_eq!(s.pause_count(), 0);
    }

    #[test]
    fn hello() {
        let s = text_to_units("hello").unwrap();
        assert_eq!(classes(&s), vec![(Vowel::E, true, true), (Vowel::O, true, true)]);
    }

    #[test]
    fn vowelless_word() {
        let s = text_to_units("tsk").unwrap();
        assert_eq!(classes(&s), vec![(Vowel::A, true, false)]);
    }

    #[test]
    fn words_pauses_and_case() {
        let s = text_to_units("  La LA   la ").unwrap();
        assert_eq!(s.unit_count(), 3);
        assert_eq!(s.pause_count(), 2);
        assert!(matches!(s.segments[1], Segment::Pause { secs } if secs == PAUSE_SECS));
        let y = text_to_units("rhythm you").unwrap();
        assert_eq!(classes(&y), vec![(Vowel::I, true, true), (Vowel::I, false, true)]);
    }

    #[test]
    fn vowel_group_uses_first_vowel() {
        let s = text_to_units("beautiful").unwrap();
        assert_eq!(
            classes(&s),
            vec![(Vowel::E, true, true), (Vowel::I, true, true), (Vowel::U, true, true)]
        );
    }

    #[test]
    fn bounds() {
        assert!(text_to_units("").is_err());
        assert!(text_to_units("   \t").is_err());
        assert!(text_to_units("123 !!").is_err());
        assert!(text_to_units(&"a".repeat(500)).is_ok());
        assert!(text_to_units(&"a".repeat(501)).is_err());
    }
}
