use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::spec::{ExperimentSpec, SpecEcho};
use crate::{Error, Result};

/// One persisted experiment outcome. `payload_hash` covers the spec echo,
/// the size, the concrete configuration, and the payload (everything except
/// wall time and timestamp), so re-runs of the same spec compare equal by
/// hash even though their timing metadata differs.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub line: usize,
    pub n: usize,
    pub config: String,
    pub spec: SpecEcho,
    pub payload: Value,
    pub payload_hash: String,
    pub wall_time_s: f64,
    pub tool_version: String,
    pub timestamp_epoch_s: u64,
}

impl ResultRecord {
    pub fn new(
        spec: &ExperimentSpec,
        n: usize,
        config: String,
        payload: Value,
        wall_time_s: f64,
    ) -> Self {
        let echo = spec.echo();
        let payload_hash = hash_payload(spec.line, n, &config, &echo, &payload);
        ResultRecord {
            line: spec.line,
            n,
            config,
            spec: echo,
            payload,
            payload_hash,
            wall_time_s,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_epoch_s: now_epoch_s(),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// SHA-256 over the deterministic slice of a record. serde_json keeps map
/// keys sorted (BTreeMap-backed Value) and struct fields in declaration
/// order, so the serialization is canonical byte for byte.
fn hash_payload(line: usize, n: usize, config: &str, spec: &SpecEcho, payload: &Value) -> String {
    #[derive(Serialize)]
    struct Hashable<'a> {
        line: usize,
        n: usize,
        config: &'a str,
        spec: &'a SpecEcho,
        payload: &'a Value,
        tool_version: &'a str,
    }
    let bytes = serde_json::to_vec(&Hashable {
        line,
        n,
        config,
        spec,
        payload,
        tool_version: env!("CARGO_PKG_VERSION"),
    })
    .expect("hash input serializes");
    let digest = Sha256::digest(&bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

fn now_epoch_s() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Sidecar run provenance, written next to each record file.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub seeds: Vec<u64>,
    pub tool_version: String,
    pub host: String,
    pub created_epoch_s: u64,
    pub spec_source: String,
}

impl RunManifest {
    pub fn new(seeds: Vec<u64>, spec_source: &str) -> Self {
        RunManifest {
            seeds,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            host: host_name(),
            created_epoch_s: now_epoch_s(),
            spec_source: spec_source.to_string(),
        }
    }
}

fn host_name() -> String {
    if let Ok(h) = std::env::var("HOSTNAME") {
        if !h.trim().is_empty() {
            return h.trim().to_string();
        }
    }
    fs::read_to_string("/proc/sys/kernel/hostname")
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|_| "unknown".to_string())
}

pub fn manifest_path(records: &Path) -> PathBuf {
    let mut name = records
        .file_name()
        .map(|s| s.to_os_string())
        .unwrap_or_default();
    name.push(".manifest.json");
    records.with_file_name(name)
}

/// Appends records in the caller's order (sorted by spec line, then n) and
/// refreshes the sidecar manifest.
pub fn append_records(path: &Path, records: &[ResultRecord], manifest: &RunManifest) -> Result<()> {
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(format!("open {}", path.display()), e))?;
    for record in records {
        writeln!(file, "{}", record.to_json_line())
            .map_err(|e| Error::io(format!("write {}", path.display()), e))?;
    }
    let side = manifest_path(path);
    let body = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&side, body).map_err(|e| Error::io(format!("write {}", side.display()), e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::parse_spec_line;
    use serde_json::json;

    fn demo_spec() -> ExperimentSpec {
        parse_spec_line("generator=equilateral n=9 r=0.5 engine=bounds seed=1", 2)
            .unwrap()
            .unwrap()
    }

    #[test]
    fn hash_ignores_timing_but_sees_payload() {
        let spec = demo_spec();
        let a = ResultRecord::new(&spec, 9, "N=9;tokens=1,4,7".into(), json!({"v": 1.5}), 0.1);
        let b = ResultRecord::new(&spec, 9, "N=9;tokens=1,4,7".into(), json!({"v": 1.5}), 9.9);
        assert_eq!(a.payload_hash, b.payload_hash);
        assert_eq!(a.payload_hash.len(), 64);
        let c = ResultRecord::new(&spec, 9, "N=9;tokens=1,4,7".into(), json!({"v": 1.6}), 0.1);
        assert_ne!(a.payload_hash, c.payload_hash);
    }

    #[test]
    fn hash_ignores_output_path() {
        let mut spec = demo_spec();
        let a = ResultRecord::new(&spec, 9, "c".into(), json!({}), 0.0);
        spec.output_path = Some("elsewhere.jsonl".into());
        let b = ResultRecord::new(&spec, 9, "c".into(), json!({}), 0.0);
        assert_eq!(a.payload_hash, b.payload_hash);
    }

    #[test]
    fn append_writes_lines_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.jsonl");
        let spec = demo_spec();
        let records = vec![
            ResultRecord::new(&spec, 9, "a".into(), json!({"x": 1}), 0.0),
            ResultRecord::new(&spec, 11, "b".into(), json!({"x": 2}), 0.0),
        ];
        let manifest = RunManifest::new(vec![1], "inline");
        append_records(&path, &records, &manifest).unwrap();
        append_records(&path, &records[..1], &manifest).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3, "append-only");
        let side = fs::read_to_string(manifest_path(&path)).unwrap();
        let v: Value = serde_json::from_str(&side).unwrap();
        assert_eq!(v["seeds"], json!([1]));
        assert_eq!(v["spec_source"], "inline");
    }
}
