//! Run provenance: a canonical config serialization, a stable hash of it,
//! and artifact writers that stamp both into every output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::CliError;

/// FNV-1a 64, stable across platforms and releases.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// The resolved configuration of one command invocation.
pub struct RunConfig {
    pub seed: u64,
    fields: Map<String, Value>,
    out_dir: PathBuf,
}

impl RunConfig {
    pub fn new(command: &'static str, seed: u64, out_dir: &Path) -> Self {
        let mut fields = Map::new();
        fields.insert("command".into(), json!(command));
        fields.insert("seed".into(), json!(seed));
        fields.insert("out".into(), json!(out_dir.display().to_string()));
        Self {
            seed,
            fields,
            out_dir: out_dir.to_path_buf(),
        }
    }

    pub fn arg(&mut self, key: &str, value: impl Into<Value>) {
        self.fields.insert(key.to_string(), value.into());
    }

    pub fn arg_path(&mut self, key: &str, value: &Option<PathBuf>) {
        self.arg(
            key,
            value
                .as_ref()
                .map(|p| json!(p.display().to_string()))
                .unwrap_or(Value::Null),
        );
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    /// Hash of the canonical (sorted-key) JSON form of the config.
    pub fn hash(&self) -> String {
        let canonical =
            serde_json::to_string(&Value::Object(self.fields.clone())).unwrap_or_default();
        format!("{:016x}", fnv1a64(canonical.as_bytes()))
    }

    pub fn to_json(&self) -> Value {
        Value::Object(self.fields.clone())
    }
}

/// Collects written artifacts and finishes with a run manifest.
pub struct ArtifactWriter<'a> {
    config: &'a RunConfig,
    written: Vec<String>,
}

impl<'a> ArtifactWriter<'a> {
    pub fn new(config: &'a RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(config.out_dir())
            .map_err(|e| CliError::internal(format!("cannot create output dir: {e}")))?;
        Ok(Self {
            config,
            written: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.config.out_dir().join(name)
    }

    /// Write a JSON artifact with seed and config hash merged into the
    /// top-level object.
    pub fn json(&mut self, name: &str, body: Value) -> Result<(), CliError> {
        let mut object = Map::new();
        object.insert("seed".into(), json!(self.config.seed));
        object.insert("config_hash".into(), json!(self.config.hash()));
        if let Value::Object(map) = body {
            object.extend(map);
        } else {
            object.insert("value".into(), body);
        }
        let text = serde_json::to_string_pretty(&Value::Object(object))
            .map_err(|e| CliError::internal(format!("serialize {name}: {e}")))?;
        fs::write(self.path(name), text + "\n")
            .map_err(|e| CliError::internal(format!("write {name}: {e}")))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Write a CSV artifact behind a provenance comment line.
    pub fn csv<F>(&mut self, name: &str, fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> regionflow::Result<()>,
    {
        let mut buf = Vec::new();
        writeln!(
            buf,
            "# seed={} config_hash={}",
            self.config.seed,
            self.config.hash()
        )
        .map_err(|e| CliError::internal(format!("write {name}: {e}")))?;
        fill(&mut buf).map_err(|e| CliError::internal(format!("render {name}: {e}")))?;
        fs::write(self.path(name), buf)
            .map_err(|e| CliError::internal(format!("write {name}: {e}")))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Write a plain text artifact (log files).
    pub fn text(&mut self, name: &str, body: String) -> Result<(), CliError> {
        fs::write(self.path(name), body)
            .map_err(|e| CliError::internal(format!("write {name}: {e}")))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Write the run manifest and consume the writer.
    pub fn finish(mut self) -> Result<(), CliError> {
        let manifest = json!({
            "seed": self.config.seed,
            "config_hash": self.config.hash(),
            "config": self.config.to_json(),
            "artifacts": self.written,
        });
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::internal(format!("serialize manifest: {e}")))?;
        fs::write(self.path("run.json"), text + "\n")
            .map_err(|e| CliError::internal(format!("write run.json: {e}")))?;
        self.written.push("run.json".into());
        Ok(())
    }
}
