//! Run manifests: what was run, on which inputs, with which seeds, and what it produced.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Environment variable that overrides the configured root seed.
pub const SEED_ENV: &str = "SEMVEC_SEED";

/// Run state recorded in the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// Written before the work starts.
    Running,
    /// Finished successfully.
    Ok,
    /// Finished with an error.
    Failed,
}

/// Manifest of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Full command line.
    pub command: Vec<String>,
    /// Resolved configuration.
    pub config: serde_json::Value,
    /// SHA-256 of every input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    /// Root seed and any derived seeds.
    pub seeds: BTreeMap<String, u64>,
    /// Tool version.
    pub version: String,
    /// Unix start time in seconds.
    pub started_unix: u64,
    /// Wall-clock duration in seconds, set when finalized.
    pub wall_clock_secs: Option<f64>,
    /// Output paths.
    pub outputs: Vec<String>,
    /// Run state.
    pub status: RunStatus,
    /// Error message for failed runs.
    pub error: Option<String>,
}

/// A manifest bound to its file, written on creation and rewritten on finalize.
pub struct ManifestWriter {
    path: PathBuf,
    manifest: RunManifest,
    clock: Instant,
}

impl ManifestWriter {
    /// Builds the manifest, hashes inputs and writes it with status `running`.
    /// Unreadable inputs are recorded as `unreadable`; the command itself reports the error.
    pub fn start(path: &Path, command: Vec<String>, config: serde_json::Value, inputs: &[PathBuf]) -> Result<Self> {
        let mut hashes = BTreeMap::new();
        for p in inputs {
            hashes.insert(p.display().to_string(), hash_path(p).unwrap_or_else(|_| "unreadable".to_string()));
        }
        let manifest = RunManifest {
            command,
            config,
            inputs: hashes,
            seeds: BTreeMap::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            wall_clock_secs: None,
            outputs: Vec::new(),
            status: RunStatus::Running,
            error: None,
        };
        let w = ManifestWriter { path: path.to_path_buf(), manifest, clock: Instant::now() };
        w.write()?;
        Ok(w)
    }

    /// Records a seed.
    pub fn seed(&mut self, name: &str, value: u64) {
        self.manifest.seeds.insert(name.to_string(), value);
    }

    /// Records an output path.
    pub fn output(&mut self, path: &Path) {
        self.manifest.outputs.push(path.display().to_string());
    }

    /// Records an input hash computed elsewhere.
    pub fn add_input(&mut self, path: String, sha256: String) {
        self.manifest.inputs.insert(path, sha256);
    }

    /// Current manifest contents.
    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    fn write(&self) -> Result<()> {
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let json = serde_json::to_string_pretty(&self.manifest).map_err(|e| Error::invalid(e.to_string()))?;
        write_atomic(&self.path, json.as_bytes())
    }

    /// Sets the final status and duration and rewrites the file.
    pub fn finish(mut self, outcome: &Result<()>) -> Result<()> {
        self.manifest.wall_clock_secs = Some(self.clock.elapsed().as_secs_f64());
        match outcome {
            Ok(()) => self.manifest.status = RunStatus::Ok,
            Err(e) => {
                self.manifest.status = RunStatus::Failed;
                self.manifest.error = Some(e.to_string());
            }
        }
        self.write()
    }
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}tmp",
        path.extension().map(|e| format!("{}.", e.to_string_lossy())).unwrap_or_default()
    ));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// SHA-256 of a file, or of a directory's files (sorted relative paths and contents).
pub fn hash_path(path: &Path) -> Result<String> {
    let mut h = Sha256::new();
    if path.is_dir() {
        let mut files = Vec::new();
        collect_files(path, path, &mut files)?;
        files.sort();
        for rel in files {
            h.update(rel.as_bytes());
            h.update([0u8]);
            hash_file_into(&path.join(&rel), &mut h)?;
        }
    } else {
        hash_file_into(path, &mut h)?;
    }
    Ok(hex::encode(h.finalize()))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else {
            let rel = p.strip_prefix(root).expect("child of root");
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

fn hash_file_into(path: &Path, h: &mut Sha256) -> Result<()> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(f);
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = r.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            return Ok(());
        }
        h.update(&buf[..n]);
    }
}

/// SHA-256 of a string.
pub fn hash_str(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

/// Child seed derived from a root seed and a label; stable across runs and platforms.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Root seed: `SEMVEC_SEED` if set, else `configured`. Unparsable values are a config error.
pub fn resolve_seed(configured: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::Config {
            path: SEED_ENV.to_string(),
            msg: format!("expected an unsigned integer, found {v:?}"),
        }),
        Err(_) => Ok(configured),
    }
}
