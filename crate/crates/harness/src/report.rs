//! Plot-ready tables, run summaries and the digest manifest.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ratcon::logscale::{format_f64, format_ln};

use crate::HarnessError;

/// Schema tag written into every manifest.
pub const MANIFEST_SCHEMA: &str = "ratcon-manifest/1";

/// A comma-separated table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// UTF-8, LF line endings, one header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Cell for a finite or infinite float.
pub fn cell(v: f64) -> String {
    format_f64(v)
}

/// Cell for a positive quantity stored as its natural log.
pub fn ln_cell(ln_v: f64) -> String {
    format_ln(1.0, ln_v)
}

/// Cell for an optional value; missing values are empty.
pub fn opt_cell(v: Option<String>) -> String {
    v.unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` when set.
    pub created_unix: u64,
    pub config: serde_json::Value,
    pub files: Vec<FileEntry>,
}

/// Files and summary produced by one subcommand, not yet written.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub files: Vec<(String, String)>,
    pub summary: serde_json::Value,
}

impl ReportBundle {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        ReportBundle { command: command.into(), seed, config, files: Vec::new(), summary: serde_json::Value::Null }
    }

    pub fn add_table(&mut self, name: String, table: &Table) {
        self.files.push((name, table.to_csv()));
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    /// Writes the tables, `summary.json` and `manifest.json` into `dir`,
    /// then re-reads everything against the manifest.
    pub fn write(&self, dir: &Path) -> Result<Manifest, HarnessError> {
        std::fs::create_dir_all(dir)?;
        let mut entries = Vec::new();
        let summary = serde_json::to_string_pretty(&self.summary).expect("summary serializes") + "\n";
        let all = self.files.iter().map(|(n, c)| (n.as_str(), c.as_str())).chain([("summary.json", summary.as_str())]);
        for (name, content) in all {
            std::fs::write(dir.join(name), content)?;
            entries.push(FileEntry {
                path: name.to_string(),
                sha256: digest(content.as_bytes()),
                bytes: content.len() as u64,
            });
        }
        let manifest = Manifest {
            schema: MANIFEST_SCHEMA.into(),
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.clone(),
            seed: self.seed,
            created_unix: created_unix(),
            config: self.config.clone(),
            files: entries,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        std::fs::write(dir.join("manifest.json"), text)?;
        verify_manifest(dir)?;
        Ok(manifest)
    }
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn created_unix() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()).unwrap_or_else(|| {
        std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
    })
}

/// Checks that every file listed in `dir/manifest.json` exists with the
/// recorded digest.
pub fn verify_manifest(dir: &Path) -> Result<Manifest, HarnessError> {
    let text = std::fs::read_to_string(dir.join("manifest.json"))
        .map_err(|e| HarnessError::Manifest(format!("cannot read manifest: {e}")))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| HarnessError::Manifest(format!("malformed manifest: {e}")))?;
    let mut problems = String::new();
    for f in &manifest.files {
        match std::fs::read(dir.join(&f.path)) {
            Ok(bytes) if digest(&bytes) == f.sha256 => {}
            Ok(_) => {
                let _ = write!(problems, "{}: digest mismatch; ", f.path);
            }
            Err(_) => {
                let _ = write!(problems, "{}: missing; ", f.path);
            }
        }
    }
    if problems.is_empty() {
        Ok(manifest)
    } else {
        Err(HarnessError::Manifest(problems.trim_end_matches("; ").to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![cell(0.5), opt_cell(None)]);
        assert_eq!(t.to_csv(), "a,b\n5.0000000000000000e-1,\n");
    }

    #[test]
    fn manifest_detects_tampering() {
        let dir = std::env::temp_dir().join(format!("ratcon-report-{}", std::process::id()));
        let mut b = ReportBundle::new("test", 1, serde_json::json!({}));
        let mut t = Table::new(&["x"]);
        t.push(vec!["1".into()]);
        b.add_table("t.csv".into(), &t);
        let m = b.write(&dir).unwrap();
        assert_eq!(m.files.len(), 2);
        std::fs::write(dir.join("t.csv"), "x\n2\n").unwrap();
        assert!(matches!(verify_manifest(&dir), Err(HarnessError::Manifest(_))));
        std::fs::remove_file(dir.join("t.csv")).unwrap();
        let err = verify_manifest(&dir).unwrap_err().to_string();
        assert!(err.contains("missing"), "{err}");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
