use std::io::ErrorKind;
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use super::{validate_text, SynthesisBackend, SynthesisError, SynthesisRequest, SynthesisResult};
use crate::acoustic::{decode_wav, AcousticError};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
const MAX_RESPONSE_BYTES: u64 = 256 * 1024 * 1024;
const AUDIO_TYPES: [&str; 3] = ["audio/wav", "audio/x-wav", "audio/wave"];

#[derive(Debug, Error)]
pub enum ExternalError {
    #[error("cannot reach synthesis backend: {0}")]
    Connection(String),
    #[error("synthesis backend timed out after {0:?}")]
    Timeout(Duration),
    #[error("synthesis backend answered with status {0}")]
    Status(u16),
    #[error("synthesis backend returned non-audio content: {0}")]
    NotAudio(String),
    #[error("synthesis backend returned {found}, expected {expected}")]
    WrongFormat { expected: String, found: String },
}

impl ExternalError {
    pub fn category(&self) -> &'static str {
        match self {
            Self::Connection(_) => "connection",
            Self::Timeout(_) => "timeout",
            Self::Status(_) => "backend-error",
            Self::NotAudio(_) => "not-audio",
            Self::WrongFormat { .. } => "wrong-format",
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    text: &'a str,
    latent: &'a [f64],
}

/// Delegates synthesis to a remote model speaking the JSON-in, WAV-out
/// protocol. Each call blocks on network I/O and shares no locks.
#[derive(Debug, Clone)]
pub struct ExternalBackend {
    url: String,
    timeout: Duration,
    sample_rate: u32,
    agent: ureq::Agent,
}

impl ExternalBackend {
    pub const TAG: &'static str = "external";

    pub fn new(url: impl Into<String>, sample_rate: u32) -> Self {
        Self::with_timeout(url, sample_rate, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(url: impl Into<String>, sample_rate: u32, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            url: url.into(),
            timeout,
            sample_rate,
            agent,
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn transport_error(&self, e: ureq::Error) -> ExternalError {
        match e {
            ureq::Error::Timeout(_) => ExternalError::Timeout(self.timeout),
            ureq::Error::Io(io) if matches!(io.kind(), ErrorKind::TimedOut | ErrorKind::WouldBlock) => {
                ExternalError::Timeout(self.timeout)
            }
            ureq::Error::StatusCode(code) => ExternalError::Status(code),
            ureq::Error::BodyExceedsLimit(n) => ExternalError::NotAudio(format!("response larger than {n} bytes")),
            other => ExternalError::Connection(other.to_string()),
        }
    }

    fn call(&self, req: &SynthesisRequest) -> Result<SynthesisResult, ExternalError> {
        let body = serde_json::to_vec(&WireRequest {
            text: &req.text,
            latent: req.latent.as_slice(),
        })
        .expect("request serializes");
        let mut resp = self
            .agent
            .post(&self.url)
            .header("content-type", "application/json")
            .send(&body[..])
            .map_err(|e| self.transport_error(e))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(ExternalError::Status(status));
        }
        let content_type = resp
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .unwrap_or("")
            .to_owned();
        let mime = content_type.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
        if !AUDIO_TYPES.contains(&mime.as_str()) {
            return Err(ExternalError::NotAudio(format!("content-type {content_type:?}")));
        }
        let bytes = resp
            .body_mut()
            .with_config()
            .limit(MAX_RESPONSE_BYTES)
            .read_to_vec()
            .map_err(|e| self.transport_error(e))?;
        let audio = decode_wav(&bytes).map_err(|e| match e {
            AcousticError::UnsupportedEncoding(msg) => ExternalError::WrongFormat {
                expected: "16-bit mono PCM".into(),
                found: msg,
            },
            other => ExternalError::NotAudio(other.to_string()),
        })?;
        if audio.sample_rate() != self.sample_rate {
            return Err(ExternalError::WrongFormat {
                expected: format!("{} Hz", self.sample_rate),
                found: format!("{} Hz", audio.sample_rate()),
            });
        }
        Ok(SynthesisResult {
            audio,
            mel: None,
            prosody: None,
            backend: Self::TAG,
        })
    }
}

impl SynthesisBackend for ExternalBackend {
    fn synthesize(&self, req: &SynthesisRequest) -> Result<SynthesisResult, SynthesisError> {
        validate_text(&req.text)?;
        if !req.latent.is_finite() {
            return Err(SynthesisError::InvalidRequest("latent is not finite".into()));
        }
        Ok(self.call(req)?)
    }

    fn tag(&self) -> &'static str {
        Self::TAG
    }
}
