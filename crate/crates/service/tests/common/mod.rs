#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;
use std::thread::JoinHandle;

use lve_core::reduction::{pca_fit, Embedding2D};
use lve_core::style::{LatentVector, Scaler};
use lve_core::synthesis::SynthesisBackend;
use lve_core::table::{LatentTable, UtteranceRecord};
use lve_service::{router, serve, ServiceState};
use lve_testkit::XorShift;
use tokio::sync::oneshot;

pub fn scaler() -> Scaler {
    Scaler {
        mean: vec![160f64.ln(), 0.03, 0.9, 4.0, -2.5, 1.5, 2100.0, -3.8],
        std: vec![0.3, 0.01, 0.05, 1.2, 0.4, 0.3, 300.0, 0.3],
    }
}

pub fn fixture_table(n: usize, seed: u64) -> LatentTable {
    let mut rng = XorShift::new(seed);
    let records = (0..n)
        .map(|i| UtteranceRecord {
            id: format!("u{i}"),
            latent: LatentVector((0..8).map(|_| 0.5 * rng.normal()).collect()),
            source_path: None,
            transcript: None,
        })
        .collect();
    LatentTable::new(records, scaler()).unwrap()
}

pub fn fixture(n: usize) -> (LatentTable, Embedding2D) {
    let table = fixture_table(n, 17);
    let emb = pca_fit(&table).unwrap();
    (table, emb)
}

pub struct TestServer {
    pub base: String,
    pub state: Arc<ServiceState>,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl TestServer {
    pub fn start(state: ServiceState, static_dir: Option<&Path>) -> Self {
        let state = Arc::new(state);
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        listener.set_nonblocking(true).unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let app = router(state.clone(), static_dir.map(Path::to_path_buf));
        let (stop, stopped) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(4).enable_all().build().unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).unwrap();
                serve(listener, app, async {
                    let _ = stopped.await;
                })
                .await
                .unwrap();
            });
        });
        Self {
            base,
            state,
            stop: Some(stop),
            thread: Some(thread),
        }
    }

    pub fn builtin(table: LatentTable, emb: Embedding2D, out_dir: &Path) -> Self {
        let backend = lve_core::synthesis::BuiltinBackend::new(table.scaler().clone(), Default::default());
        Self::with_backend(table, emb, Arc::new(backend), out_dir)
    }

    pub fn with_backend(table: LatentTable, emb: Embedding2D, backend: Arc<dyn SynthesisBackend>, out_dir: &Path) -> Self {
        Self::start(ServiceState::new(table, emb, backend, out_dir).unwrap(), None)
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

pub struct Reply {
    pub status: u16,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("bad json ({e}): {}", String::from_utf8_lossy(&self.body)))
    }
}

fn reply(mut r: ureq::http::Response<ureq::Body>) -> Reply {
    Reply {
        status: r.status().as_u16(),
        content_type: r
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string),
        body: r.body_mut().read_to_vec().unwrap(),
    }
}

pub fn get(url: &str) -> Reply {
    reply(agent().get(url).call().unwrap())
}

pub fn post(url: &str, body: &str) -> Reply {
    reply(
        agent()
            .post(url)
            .header("content-type", "application/json")
            .send(body)
            .unwrap(),
    )
}

pub fn synth_body(text: &str, x: f64, y: f64) -> String {
    serde_json::json!({ "text": text, "x": x, "y": y }).to_string()
}

/// Renders one builtin utterance per `(name, text, prosody)` into `dir`.
pub fn write_corpus(dir: &Path, items: &[(String, String, lve_core::synthesis::ProsodyParams)]) {
    let cfg = lve_core::acoustic::FrameConfig::default();
    for (name, text, prosody) in items {
        let (audio, _) = lve_core::synthesis::render_text(text, prosody, &cfg).unwrap();
        lve_core::acoustic::write_wav(&audio, dir.join(format!("{name}.wav"))).unwrap();
    }
}
