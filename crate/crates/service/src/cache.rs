//! Content-addressed WAV store shared by concurrent requests.

use std::collections::HashMap;
use std::future::Future;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use sha2::{Digest, Sha256};
use tokio::sync::OnceCell;

/// Hex SHA-256 of the request identity. Fields are length-prefixed so no
/// two distinct triples share an encoding.
pub fn audio_digest(text: &str, point_id: &str, backend: &str) -> String {
    let mut hasher = Sha256::new();
    for field in [text, point_id, backend] {
        hasher.update((field.len() as u64).to_le_bytes());
        hasher.update(field.as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// True for strings shaped like [`audio_digest`] output.
pub fn is_digest(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

/// Maps digests to published files in `dir`. Each digest is produced at
/// most once: concurrent callers wait on the same cell, and files appear
/// atomically via write-then-rename.
#[derive(Debug)]
pub struct AudioCache {
    dir: PathBuf,
    entries: Mutex<HashMap<String, Arc<OnceCell<PathBuf>>>>,
    tmp_counter: AtomicU64,
}

impl AudioCache {
    pub fn new(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            entries: Mutex::new(HashMap::new()),
            tmp_counter: AtomicU64::new(0),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, digest: &str) -> PathBuf {
        self.dir.join(format!("{digest}.wav"))
    }

    fn cell(&self, digest: &str) -> Arc<OnceCell<PathBuf>> {
        let mut entries = self.entries.lock().expect("cache map poisoned");
        entries.entry(digest.to_string()).or_default().clone()
    }

    /// Returns the file for `digest`, running `produce` to create its bytes
    /// only if neither memory nor disk has it. A failed `produce` leaves the
    /// entry empty so a later call can retry.
    pub async fn get_or_create<F, Fut, E>(&self, digest: &str, produce: F) -> Result<(PathBuf, bool), E>
    where
        F: FnOnce() -> Fut,
        Fut: Future<Output = Result<Vec<u8>, E>>,
        E: From<std::io::Error>,
    {
        let cell = self.cell(digest);
        let mut created = false;
        let path = cell
            .get_or_try_init(|| async {
                let path = self.path_for(digest);
                if tokio::fs::try_exists(&path).await.map_err(E::from)? {
                    return Ok::<_, E>(path);
                }
                let bytes = produce().await?;
                self.publish(&path, &bytes).await.map_err(E::from)?;
                created = true;
                Ok(path)
            })
            .await?;
        Ok((path.clone(), created))
    }

    async fn publish(&self, path: &Path, bytes: &[u8]) -> std::io::Result<()> {
        let n = self.tmp_counter.fetch_add(1, Ordering::Relaxed);
        let tmp = self.dir.join(format!(".{}.{}.{n}.tmp", path.file_name().unwrap_or_default().to_string_lossy(), std::process::id()));
        let bytes = bytes.to_vec();
        let target = path.to_path_buf();
        tokio::task::spawn_blocking(move || {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
            std::fs::rename(&tmp, &target).inspect_err(|_| {
                let _ = std::fs::remove_file(&tmp);
            })
        })
        .await
        .map_err(std::io::Error::other)?
    }

    /// Number of digests with a published file in this process.
    pub fn len(&self) -> usize {
        let entries = self.entries.lock().expect("cache map poisoned");
        entries.values().filter(|c| c.initialized()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
