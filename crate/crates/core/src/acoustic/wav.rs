use std::io::{Cursor, Read, Seek};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{AcousticError, AudioBuffer};

const PCM_SCALE: f64 = 32768.0;

fn spec(sample_rate: u32) -> WavSpec {
    WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    }
}

fn quantize(x: f64) -> i16 {
    (x * PCM_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

fn map_hound(err: hound::Error) -> AcousticError {
    match err {
        hound::Error::IoError(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            AcousticError::MalformedWav(format!("truncated file: {e}"))
        }
        hound::Error::IoError(e) => AcousticError::Io(e),
        hound::Error::FormatError(m) => AcousticError::MalformedWav(m.to_string()),
        hound::Error::Unsupported => AcousticError::UnsupportedEncoding("unsupported wav feature".into()),
        other => AcousticError::MalformedWav(other.to_string()),
    }
}

fn decode<R: Read + Seek>(reader: R) -> Result<AudioBuffer, AcousticError> {
    let reader = WavReader::new(reader).map_err(map_hound)?;
    let spec = reader.spec();
    if spec.sample_format != SampleFormat::Int {
        return Err(AcousticError::UnsupportedEncoding("floating-point samples".into()));
    }
    if spec.bits_per_sample != 16 {
        return Err(AcousticError::UnsupportedEncoding(format!(
            "{}-bit samples (only 16-bit PCM is accepted)",
            spec.bits_per_sample
        )));
    }
    if spec.channels != 1 {
        return Err(AcousticError::UnsupportedEncoding(format!(
            "{} channels (only mono is accepted)",
            spec.channels
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / PCM_SCALE))
        .collect::<Result<Vec<_>, _>>()
        .map_err(map_hound)?;
    AudioBuffer::new(samples, spec.sample_rate)
}

/// Reads a 16-bit PCM mono WAV file.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, AcousticError> {
    let bytes = std::fs::read(path)?;
    decode_wav(&bytes)
}

pub fn decode_wav(bytes: &[u8]) -> Result<AudioBuffer, AcousticError> {
    decode(Cursor::new(bytes))
}

/// Encodes the buffer as RIFF/WAVE, PCM 16-bit little-endian mono. Samples
/// outside [-1, 1) saturate.
pub fn encode_wav(buffer: &AudioBuffer) -> Result<Vec<u8>, AcousticError> {
    let mut cursor = Cursor::new(Vec::with_capacity(44 + 2 * buffer.len()));
    {
        let mut writer = WavWriter::new(&mut cursor, spec(buffer.sample_rate())).map_err(map_hound)?;
        let mut samples = writer.get_i16_writer(buffer.len() as u32);
        for &s in buffer.samples() {
            samples.write_sample(quantize(s));
        }
        samples.flush().map_err(map_hound)?;
        writer.finalize().map_err(map_hound)?;
    }
    Ok(cursor.into_inner())
}

pub fn write_wav(buffer: &AudioBuffer, path: impl AsRef<Path>) -> Result<(), AcousticError> {
    let bytes = encode_wav(buffer)?;
    std::fs::write(path, bytes)?;
    Ok(())
}
