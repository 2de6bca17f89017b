//! Per-fixture sidecar files: `<name>.json` next to `<name>.mj` pins the
//! counterexample and run bounds, plus an optional bench schedule.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use locfaults_core::bmc::Counterexample;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
pub struct Sidecar {
    #[serde(default)]
    pub ce: Option<serde_json::Value>,
    pub b: u32,
    #[serde(default = "default_b_mcd")]
    pub b_mcd: u32,
    #[serde(default = "default_b_mcs")]
    pub b_mcs: u32,
    #[serde(default)]
    pub bench: Vec<BenchEntry>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct BenchEntry {
    pub b: u32,
    pub ce: serde_json::Value,
}

fn default_b_mcd() -> u32 {
    3
}

fn default_b_mcs() -> u32 {
    4
}

impl Sidecar {
    pub fn load(path: &Path) -> Result<Sidecar> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading sidecar {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// The sidecar for a `.mj` source file.
    pub fn for_source(source: &Path) -> Result<Sidecar> {
        Self::load(&source.with_extension("json"))
    }

    pub fn counterexample(&self) -> Result<Option<Counterexample>> {
        match &self.ce {
            None => Ok(None),
            Some(v) => Ok(Some(Counterexample::from_json(&v.to_string())?)),
        }
    }
}

/// All `.mj` fixtures in a directory, sorted by name.
pub fn fixtures_in(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().map(|e| e == "mj").unwrap_or(false) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}
