//! On-disk cache of ground-state profiles and interaction kernels.
//!
//! Each entry is a one-line header naming the kind, format version and the exact
//! inputs, followed by the JSON payload. An entry is used only when its header
//! matches the expected one byte for byte. File names are SHA-256 digests of the
//! header; writes go to a temporary file that is renamed into place.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::ground_state::{solve_profile, RadialProfile, ShootingOptions};
use crate::kernel::{InteractionKernel, KernelOptions};
use crate::params::ModelParams;

/// Environment variable overriding the cache directory.
pub const CACHE_ENV: &str = "SOLITON_RIGIDITY_CACHE";
const FORMAT: &str = "soliton-rigidity-cache/1";

/// `$SOLITON_RIGIDITY_CACHE`, else `$HOME/.cache/soliton-rigidity`, else a
/// directory under the system temp dir.
pub fn default_cache_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(dir);
    }
    match std::env::var_os("HOME").filter(|v| !v.is_empty()) {
        Some(home) => PathBuf::from(home).join(".cache").join("soliton-rigidity"),
        None => std::env::temp_dir().join("soliton-rigidity-cache"),
    }
}

#[derive(Debug, Clone)]
pub struct Cache {
    dir: Option<PathBuf>,
}

/// Where a cached value came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CacheKey {
    pub kind: String,
    pub digest: String,
    pub hit: bool,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: Some(dir.into()) }
    }

    /// A cache that always rebuilds and never writes.
    pub fn disabled() -> Self {
        Cache { dir: None }
    }

    pub fn from_env() -> Self {
        Cache::new(default_cache_dir())
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn profile(&self, params: ModelParams, opts: ShootingOptions) -> anyhow::Result<(Arc<RadialProfile>, CacheKey)> {
        // α does not enter the ground state.
        let params = ModelParams { alpha: 1.0, ..params };
        let inputs = serde_json::to_string(&(params, opts))?;
        let (p, key) = self.get_or_build("profile", &inputs, || Ok(solve_profile(params, opts)?))?;
        Ok((Arc::new(p), key))
    }

    pub fn kernel(&self, profile: Arc<RadialProfile>, alpha: f64, opts: KernelOptions) -> anyhow::Result<(Arc<InteractionKernel>, CacheKey)> {
        let inputs = serde_json::to_string(&(profile.params, profile.opts, alpha, opts))?;
        let (mut k, key) = self.get_or_build("kernel", &inputs, || Ok(InteractionKernel::build(profile.clone(), alpha, opts)?))?;
        k.profile = Some(profile);
        Ok((Arc::new(k), key))
    }

    fn get_or_build<T: Serialize + DeserializeOwned>(
        &self,
        kind: &str,
        inputs: &str,
        build: impl FnOnce() -> anyhow::Result<T>,
    ) -> anyhow::Result<(T, CacheKey)> {
        let header = format!("{FORMAT} {kind} v{} {inputs}", env!("CARGO_PKG_VERSION"));
        let digest = hex(&Sha256::digest(header.as_bytes()));
        let mut key = CacheKey { kind: kind.to_string(), digest: digest.clone(), hit: false };
        let Some(dir) = &self.dir else {
            return Ok((build()?, key));
        };
        let path = dir.join(format!("{kind}-{digest}.json"));
        if let Some(v) = read_entry(&path, &header) {
            key.hit = true;
            return Ok((v, key));
        }
        let v = build()?;
        write_entry(dir, &path, &header, &v)?;
        Ok((v, key))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn read_entry<T: DeserializeOwned>(path: &Path, header: &str) -> Option<T> {
    let mut reader = BufReader::new(fs::File::open(path).ok()?);
    let mut first = String::new();
    reader.read_line(&mut first).ok()?;
    if first.strip_suffix('\n')? != header {
        return None;
    }
    let mut body = String::new();
    reader.read_to_string(&mut body).ok()?;
    serde_json::from_str(&body).ok()
}

fn write_entry<T: Serialize>(dir: &Path, path: &Path, header: &str, value: &T) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    writeln!(tmp, "{header}")?;
    serde_json::to_writer(&mut tmp, value)?;
    tmp.flush()?;
    tmp.persist(path)?;
    Ok(())
}
