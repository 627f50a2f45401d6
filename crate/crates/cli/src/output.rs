//! Metadata headers and file writing.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

/// Provenance of a run, written at the top of every output file.
#[derive(Debug)]
pub struct RunInfo {
    pub command: String,
    pub source: String,
    pub params: Option<String>,
    pub overrides: Vec<String>,
    pub seed: u64,
    /// Effective scenario after parameter files and overrides.
    pub config: String,
}

impl RunInfo {
    pub fn scenario_hash(&self) -> String {
        hex::encode(Sha256::digest(self.config.as_bytes()))
    }

    /// `(key, value)` metadata pairs, `extra` after the run description and
    /// before the effective config.
    pub fn metadata(&self, extra: &[(&str, String)]) -> Vec<(String, String)> {
        let mut m = vec![
            ("tool".to_string(), format!("ppcs {}", env!("CARGO_PKG_VERSION"))),
            ("command".to_string(), self.command.clone()),
            ("scenario".to_string(), self.source.clone()),
            ("scenario_sha256".to_string(), self.scenario_hash()),
            ("seed".to_string(), self.seed.to_string()),
        ];
        if let Some(p) = &self.params {
            m.push(("params".into(), p.clone()));
        }
        for o in &self.overrides {
            m.push(("override".into(), o.clone()));
        }
        m.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
        m.extend(
            self.config
                .lines()
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| ("config".to_string(), l.to_string())),
        );
        m
    }

    /// `# key: value` lines.
    pub fn comment_block(&self, extra: &[(&str, String)]) -> String {
        self.metadata(extra).iter().map(|(k, v)| format!("# {k}: {v}\n")).collect()
    }

    pub fn comment_lines(&self, extra: &[(&str, String)]) -> Vec<String> {
        self.metadata(extra).iter().map(|(k, v)| format!("{k}: {v}")).collect()
    }
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

/// Float formatting shared by the CSV writers.
pub fn sci(x: f64) -> String {
    format!("{x:.6e}")
}
