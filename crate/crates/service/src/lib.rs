//! Web service and CLI for exploring a corpus's prosody latent space.
//!
//! The `lve` binary runs the offline stages (ingest, reduce), serves the
//! HTTP API and renders one-off syntheses and plots.

pub mod cache;
pub mod cli;
pub mod plot;
pub mod server;

pub use cache::{audio_digest, AudioCache};
pub use server::{router, serve, ServiceState, SynthesizeRequestWire, SynthesizeResponseWire};
