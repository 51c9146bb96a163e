//! Run directories: config snapshot, run record, replicate shards and final
//! artifacts. One writer per directory; every file is replaced atomically.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use gfperc_core::events::Record;
use gfperc_core::io::write_atomic;
use serde::{Deserialize, Serialize};

use crate::config::{parse_text, ExperimentConfig};
use crate::error::{CliError, Context};

/// Replicates per shard.
pub const CHUNK: u64 = 250;

pub const CONFIG_FILE: &str = "config.json";
pub const RECORD_FILE: &str = "run.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardEntry {
    pub file: String,
    /// First replicate index in the shard.
    pub first: u64,
    pub count: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub version: String,
    pub started_unix: u64,
    #[serde(default)]
    pub finished_unix: Option<u64>,
    /// Wall time summed over invocations.
    #[serde(default)]
    pub elapsed_ms: u64,
    pub chunk: u64,
    #[serde(default)]
    pub shards: Vec<ShardEntry>,
    #[serde(default)]
    pub artifacts: Vec<String>,
    /// Outcome of the acceptance gate, for commands that have one.
    #[serde(default)]
    pub gate: Option<bool>,
    #[serde(default)]
    pub complete: bool,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug)]
pub struct RunDir {
    pub path: PathBuf,
    pub record: RunRecord,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::io(path.display().to_string(), e)
}

/// Reads `config.json` and `run.json` of an existing run and checks that the
/// config still hashes to the recorded value.
pub fn load(path: &Path) -> Result<(ExperimentConfig, RunRecord), CliError> {
    let rec_path = path.join(RECORD_FILE);
    let text = fs::read_to_string(&rec_path).map_err(|e| io_err(&rec_path, e))?;
    let record: RunRecord = serde_json::from_str(&text)
        .map_err(|e| CliError::config(rec_path.display().to_string(), e.to_string()))?;
    let cfg_path = path.join(CONFIG_FILE);
    let text = fs::read_to_string(&cfg_path).map_err(|e| io_err(&cfg_path, e))?;
    let cfg = parse_text(&text)?;
    let hash = cfg.hash();
    if hash != record.config_hash {
        return Err(CliError::config(
            "config_hash",
            format!(
                "{} hashes to {hash}, run was started with {}",
                cfg_path.display(),
                record.config_hash
            ),
        ));
    }
    Ok((cfg, record))
}

impl RunDir {
    /// Opens `path` for `cfg`, creating it if needed. An existing run must
    /// carry the same config hash.
    pub fn open(path: &Path, cfg: &ExperimentConfig) -> Result<Self, CliError> {
        if path.join(RECORD_FILE).exists() {
            let (old, record) = load(path)?;
            if old.hash() != cfg.hash() {
                return Err(CliError::config(
                    "out",
                    format!(
                        "{} holds a run with a different config; pick another --out",
                        path.display()
                    ),
                ));
            }
            return Ok(Self {
                path: path.to_path_buf(),
                record,
            });
        }
        fs::create_dir_all(path.join("shards")).map_err(|e| io_err(path, e))?;
        let mut snapshot = cfg.clone();
        snapshot.workers = None;
        snapshot.out = None;
        let text = serde_json::to_string_pretty(&snapshot).expect("config serializes");
        write_atomic(&path.join(CONFIG_FILE), text.as_bytes()).at("out")?;
        let dir = Self {
            path: path.to_path_buf(),
            record: RunRecord {
                config_hash: cfg.hash(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                started_unix: unix_now(),
                finished_unix: None,
                elapsed_ms: 0,
                chunk: CHUNK,
                shards: Vec::new(),
                artifacts: Vec::new(),
                gate: None,
                complete: false,
            },
        };
        dir.save()?;
        Ok(dir)
    }

    pub fn save(&self) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(&self.record).expect("record serializes");
        write_atomic(&self.path.join(RECORD_FILE), text.as_bytes()).at("out")
    }

    pub fn shard_name(k: u64) -> String {
        format!("shards/shard-{k:06}.jsonl")
    }

    pub fn has_shard(&self, first: u64) -> bool {
        self.record.shards.iter().any(|s| s.first == first)
    }

    /// Writes one shard and records it.
    pub fn add_shard(&mut self, first: u64, records: &[Record]) -> Result<(), CliError> {
        let mut bytes = Vec::new();
        for r in records {
            serde_json::to_writer(&mut bytes, r).expect("record serializes");
            bytes.push(b'\n');
        }
        let file = Self::shard_name(first / self.record.chunk);
        write_atomic(&self.path.join(&file), &bytes).at("out")?;
        self.record.shards.push(ShardEntry {
            file,
            first,
            count: records.len() as u64,
            bytes: bytes.len() as u64,
        });
        self.record.shards.sort_by_key(|s| s.first);
        self.save()
    }

    /// All replicate values `0..n` in order, read back from the shards.
    pub fn merged_values(&self, n: u64) -> Result<Vec<f64>, CliError> {
        let mut values = Vec::with_capacity(n as usize);
        for s in &self.record.shards {
            let path = self.path.join(&s.file);
            let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
            let corrupt = |m: String| CliError::io(path.display().to_string(), m);
            if bytes.len() as u64 != s.bytes {
                return Err(corrupt(format!(
                    "expected {} bytes, found {}",
                    s.bytes,
                    bytes.len()
                )));
            }
            if s.first != values.len() as u64 {
                return Err(corrupt(format!(
                    "shard starts at {}, expected {}",
                    s.first,
                    values.len()
                )));
            }
            for (k, line) in bytes
                .split(|&b| b == b'\n')
                .filter(|l| !l.is_empty())
                .enumerate()
            {
                let r: Record = serde_json::from_slice(line).map_err(|e| corrupt(e.to_string()))?;
                if r.replicate != s.first + k as u64 {
                    return Err(corrupt(format!("replicate {} out of order", r.replicate)));
                }
                values.push(r.value);
            }
        }
        if values.len() as u64 != n {
            return Err(CliError::io(
                self.path.display().to_string(),
                format!("shards hold {} of {n} replicates", values.len()),
            ));
        }
        Ok(values)
    }

    pub fn write_artifact(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(&self.path.join(name), bytes).at("out")?;
        self.register(name);
        Ok(())
    }

    /// Lists a file written by other means as an artifact.
    pub fn register(&mut self, name: &str) {
        if !self.record.artifacts.iter().any(|a| a == name) {
            self.record.artifacts.push(name.to_string());
        }
    }

    pub fn finish(&mut self) -> Result<(), CliError> {
        self.record.complete = true;
        self.record.finished_unix = Some(unix_now());
        self.save()
    }

    /// Checks that a completed run still has every artifact and shard.
    pub fn verify_complete(&self) -> Result<(), CliError> {
        for name in self
            .record
            .artifacts
            .iter()
            .chain(self.record.shards.iter().map(|s| &s.file))
        {
            let p = self.path.join(name);
            if !p.exists() {
                return Err(io_err(&p, "missing from a completed run"));
            }
        }
        for s in &self.record.shards {
            let p = self.path.join(&s.file);
            let len = fs::metadata(&p).map_err(|e| io_err(&p, e))?.len();
            if len != s.bytes {
                return Err(io_err(
                    &p,
                    format!("expected {} bytes, found {len}", s.bytes),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse;
    use serde_json::json;

    #[test]
    fn shards_round_trip_and_hash_guard() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse(json!({"command": "estimate", "n": 3})).unwrap();
        let mut run = RunDir::open(dir.path(), &cfg).unwrap();
        let recs: Vec<Record> = (0..3)
            .map(|i| Record {
                replicate: i,
                seed: i,
                value: i as f64,
            })
            .collect();
        run.add_shard(0, &recs).unwrap();
        assert_eq!(run.merged_values(3).unwrap(), vec![0.0, 1.0, 2.0]);
        assert!(run.merged_values(4).is_err());

        let reopened = RunDir::open(dir.path(), &cfg).unwrap();
        assert!(reopened.has_shard(0));
        let other = parse(json!({"command": "estimate", "n": 4})).unwrap();
        assert_eq!(RunDir::open(dir.path(), &other).unwrap_err().code, 2);

        fs::write(
            dir.path().join(CONFIG_FILE),
            r#"{"command": "estimate", "n": 5}"#,
        )
        .unwrap();
        assert_eq!(load(dir.path()).unwrap_err().path, "config_hash");
    }
}
