use super::HarnessError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Path relative to the directory the manifest describes.
    pub path: String,
    pub sha256: String,
}

/// Record of one command: what ran, with which settings, on which inputs,
/// and what it wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Subcommand and its arguments, without config and output paths.
    pub command: Vec<String>,
    pub seed: u64,
    /// Resolved configuration as TOML.
    pub config: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut file = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    use std::fmt::Write;
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl RunManifest {
    pub fn new(command: Vec<String>, seed: u64, config: String) -> Self {
        RunManifest {
            tool: "microid".into(),
            version: crate::VERSION.into(),
            command,
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: BTreeMap::new(),
        }
    }

    /// Digests of `files` named relative to `base`.
    pub fn digest_files(base: &Path, files: &[std::path::PathBuf]) -> Result<Vec<FileDigest>, HarnessError> {
        let mut out = Vec::with_capacity(files.len());
        for f in files {
            let path = f.strip_prefix(base).unwrap_or(f).to_string_lossy().replace('\\', "/");
            out.push(FileDigest {
                path,
                sha256: sha256_file(f)?,
            });
        }
        out.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<RunManifest, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Output entries whose digest differs from `other`, or that are missing
    /// from either side.
    pub fn output_mismatches(&self, other: &RunManifest) -> Vec<String> {
        let a: BTreeMap<&str, &str> = self.outputs.iter().map(|d| (d.path.as_str(), d.sha256.as_str())).collect();
        let b: BTreeMap<&str, &str> = other.outputs.iter().map(|d| (d.path.as_str(), d.sha256.as_str())).collect();
        let mut bad: Vec<String> = a
            .iter()
            .filter(|(k, v)| b.get(*k) != Some(*v))
            .map(|(k, _)| k.to_string())
            .collect();
        bad.extend(b.keys().filter(|k| !a.contains_key(*k)).map(|k| k.to_string()));
        bad
    }
}
