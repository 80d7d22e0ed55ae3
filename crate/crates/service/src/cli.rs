//! Command-line interface of the `lve` binary.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use lve_core::acoustic::{write_wav, FrameConfig};
use lve_core::picker::PointIndex;
use lve_core::reduction::{pca_fit, tsne_fit, Embedding2D, TsneConfig};
use lve_core::style::ingest_corpus;
use lve_core::synthesis::{BuiltinBackend, ExternalBackend, SynthesisBackend, SynthesisRequest};
use lve_core::table::LatentTable;

use crate::server::{router, serve, ServiceState};

pub const PORT_ENV: &str = "LVE_PORT";

#[derive(Debug, Parser)]
#[command(name = "lve", version, about = "Latent voice explorer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Pca,
    Tsne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Builtin,
    External,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract style latents from a directory of WAV files.
    Ingest {
        corpus_dir: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Project a latent table to 2-D.
    Reduce {
        table: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        /// Defaults to min(10, (N - 1) / 3).
        #[arg(long)]
        perplexity: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        embedding: PathBuf,
        /// Overridden by the LVE_PORT environment variable.
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, value_enum, default_value_t = BackendKind::Builtin)]
        backend: BackendKind,
        #[arg(long)]
        backend_url: Option<String>,
        #[arg(long, default_value = "lve-audio")]
        out_dir: PathBuf,
        /// Directory served at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Synthesize one utterance at a data-space position.
    Synth {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        embedding: PathBuf,
        #[arg(long)]
        text: String,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, allow_negative_numbers = true)]
        y: f64,
        #[arg(short, long, default_value = "out.wav")]
        output: PathBuf,
    },
    /// Write an SVG scatter of an embedding.
    ExportPlot {
        #[arg(long)]
        embedding: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 800)]
        width: u32,
        #[arg(long, default_value_t = 600)]
        height: u32,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad invocation: missing inputs or inconsistent flags. Exit code 2.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Failed(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Failed(_) => 1,
        }
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} {} does not exist", path.display())))
    }
}

fn load_pair(table: &Path, embedding: &Path) -> Result<(LatentTable, Embedding2D), CliError> {
    require_file(table, "table")?;
    require_file(embedding, "embedding")?;
    let table = LatentTable::load(table).with_context(|| format!("loading {}", table.display()))?;
    let emb = Embedding2D::load(embedding, Some(&table)).with_context(|| format!("loading {}", embedding.display()))?;
    Ok((table, emb))
}

/// `LVE_PORT` wins over `--port` when set.
pub fn resolve_port(flag: u16, env: Option<&str>) -> Result<u16, CliError> {
    match env {
        None => Ok(flag),
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{PORT_ENV}={v:?} is not a valid port"))),
    }
}

pub fn default_perplexity(n: usize) -> f64 {
    TsneConfig::max_perplexity(n).min(10.0)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { corpus_dir, output } => {
            if !corpus_dir.is_dir() {
                return Err(CliError::Usage(format!("corpus directory {} does not exist", corpus_dir.display())));
            }
            let table = ingest_corpus(&corpus_dir, &FrameConfig::default()).context("ingest failed")?;
            table.save(&output).with_context(|| format!("writing {}", output.display()))?;
            println!("{} utterances -> {}", table.len(), output.display());
        }
        Command::Reduce {
            table,
            method,
            perplexity,
            iters,
            seed,
            output,
        } => {
            require_file(&table, "table")?;
            let t = LatentTable::load(&table).with_context(|| format!("loading {}", table.display()))?;
            let emb = match method {
                Method::Pca => pca_fit(&t).context("PCA failed")?,
                Method::Tsne => {
                    let cfg = TsneConfig {
                        perplexity: perplexity.unwrap_or_else(|| default_perplexity(t.len())),
                        iterations: iters,
                        seed,
                        ..TsneConfig::default()
                    };
                    tsne_fit(&t, &cfg).context("t-SNE failed")?
                }
            };
            emb.save(&output).with_context(|| format!("writing {}", output.display()))?;
            println!("{} {} points -> {}", emb.method(), emb.len(), output.display());
        }
        Command::Serve {
            table,
            embedding,
            port,
            host,
            backend,
            backend_url,
            out_dir,
            static_dir,
        } => {
            let port = resolve_port(port, std::env::var(PORT_ENV).ok().as_deref())?;
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|_| CliError::Usage(format!("invalid listen address {host}:{port}")))?;
            if let Some(dir) = &static_dir {
                if !dir.is_dir() {
                    return Err(CliError::Usage(format!("static directory {} does not exist", dir.display())));
                }
            }
            let (t, emb) = load_pair(&table, &embedding)?;
            let backend: Arc<dyn SynthesisBackend> = match (backend, backend_url) {
                (BackendKind::Builtin, _) => Arc::new(BuiltinBackend::new(t.scaler().clone(), FrameConfig::default())),
                (BackendKind::External, Some(url)) => Arc::new(ExternalBackend::new(url, FrameConfig::default().sample_rate)),
                (BackendKind::External, None) => {
                    return Err(CliError::Usage("--backend external requires --backend-url".into()))
                }
            };
            let state = Arc::new(ServiceState::new(t, emb, backend, out_dir).context("invalid service state")?);
            let app = router(state, static_dir);
            let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr)
                    .await
                    .with_context(|| format!("binding {addr}"))?;
                let shutdown = async {
                    let _ = tokio::signal::ctrl_c().await;
                };
                serve(listener, app, shutdown).await.context("server error")
            })?;
        }
        Command::Synth {
            table,
            embedding,
            text,
            x,
            y,
            output,
        } => {
            let (t, emb) = load_pair(&table, &embedding)?;
            let nearest = PointIndex::new(&emb)
                .context("indexing embedding")?
                .nearest(x, y, 1)
                .context("nearest point")?
                .remove(0);
            let latent = t.get_latent(&nearest.id).context("looking up latent")?.clone();
            let backend = BuiltinBackend::new(t.scaler().clone(), FrameConfig::default());
            let result = backend
                .synthesize(&SynthesisRequest::new(text, latent))
                .context("synthesis failed")?;
            write_wav(&result.audio, &output).with_context(|| format!("writing {}", output.display()))?;
            println!("{} -> {}", nearest.id, output.display());
        }
        Command::ExportPlot {
            embedding,
            output,
            width,
            height,
        } => {
            require_file(&embedding, "embedding")?;
            let emb = Embedding2D::load(&embedding, None).with_context(|| format!("loading {}", embedding.display()))?;
            let svg = crate::plot::render_svg(&emb, width, height).context("rendering plot")?;
            std::fs::write(&output, svg).with_context(|| format!("writing {}", output.display()))?;
        }
    }
    Ok(())
}
