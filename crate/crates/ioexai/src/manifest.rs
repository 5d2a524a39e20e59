//! Run manifests: what was run, with which settings, on which inputs, and
//! the SHA-256 of everything written.
//!
//! A manifest is a `key = value` file. The `created` line is the only one
//! that changes between identical reruns; it honours `SOURCE_DATE_EPOCH`.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::config::KeyValues;
use crate::error::{CliError, CliResult};

/// Key whose presence marks a file as a manifest.
pub const MANIFEST_FORMAT_KEY: &str = "manifest_format";
pub const MANIFEST_FORMAT: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.txt";

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_bytes(&bytes))
}

fn created_now() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: Vec<(String, String)>,
    /// `(role, path, sha256)`.
    pub inputs: Vec<(String, PathBuf, String)>,
    /// `(file name, sha256)`, sorted by name.
    pub outputs: Vec<(String, String)>,
    pub counters: Vec<(String, String)>,
    pub created: u64,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            argv: std::env::args().collect(),
            config: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            counters: Vec::new(),
            created: created_now(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) -> CliResult<()> {
        let digest = sha256_file(path)?;
        self.inputs.push((role.to_string(), path.to_path_buf(), digest));
        Ok(())
    }

    /// Records the digest of `path` under its file name.
    pub fn output(&mut self, path: &Path) -> CliResult<()> {
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        let digest = sha256_file(path)?;
        self.outputs.retain(|o| o.0 != name);
        self.outputs.push((name, digest));
        self.outputs.sort();
        Ok(())
    }

    pub fn counter(&mut self, key: &str, value: impl ToString) {
        self.counters.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut s = format!("# run manifest\n{MANIFEST_FORMAT_KEY} = {MANIFEST_FORMAT}\n");
        s += &format!("tool_version = {}\n", env!("CARGO_PKG_VERSION"));
        s += &format!("command = {}\n", self.command);
        s += &format!("argv = {}\n", self.argv.join(" "));
        s += &format!("created = {}\n", self.created);
        for (k, v) in &self.config {
            s += &format!("config.{k} = {v}\n");
        }
        for (role, path, digest) in &self.inputs {
            s += &format!("input.{role} = {}\n", path.display());
            s += &format!("input.{role}.sha256 = {digest}\n");
        }
        for (name, digest) in &self.outputs {
            s += &format!("output.{name}.sha256 = {digest}\n");
        }
        for (k, v) in &self.counters {
            s += &format!("counter.{k} = {v}\n");
        }
        s
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.render()).map_err(|e| CliError::io(path, e))
    }
}

/// Output digests recorded in a manifest file, sorted by file name.
pub fn output_digests(manifest: &Path) -> CliResult<Vec<(String, String)>> {
    let kv = KeyValues::load(manifest)?;
    let mut out: Vec<(String, String)> = kv
        .entries
        .iter()
        .filter_map(|e| {
            let name = e.key.strip_prefix("output.")?.strip_suffix(".sha256")?;
            Some((name.to_string(), e.value.clone()))
        })
        .collect();
    out.sort();
    Ok(out)
}

/// Recorded input `(path, sha256)` for `role`.
pub fn recorded_input(kv: &KeyValues, role: &str) -> Option<(PathBuf, String)> {
    let path = kv.get(&format!("input.{role}"))?;
    let digest = kv.get(&format!("input.{role}.sha256"))?;
    Some((PathBuf::from(path), digest.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_bytes() {
        assert_eq!(sha256_bytes(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn render_parses_back() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("a.txt");
        std::fs::write(&out, "x").unwrap();
        let mut m = Manifest::new("run");
        m.config.push(("model".into(), "linear".into()));
        m.input("dataset", &out).unwrap();
        m.output(&out).unwrap();
        m.counter("rows", 3);
        let p = dir.path().join(MANIFEST_FILE);
        m.write(&p).unwrap();
        let kv = KeyValues::load(&p).unwrap();
        assert!(kv.is_manifest());
        assert_eq!(kv.config_view().get("model"), Some("linear"));
        assert_eq!(output_digests(&p).unwrap(), vec![("a.txt".to_string(), sha256_bytes(b"x"))]);
        assert_eq!(recorded_input(&kv, "dataset").unwrap().1, sha256_bytes(b"x"));
    }
}
