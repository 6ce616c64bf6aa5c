use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::run::{Effects, Run};

pub const MANIFEST: &str = "manifest.json";

/// Everything needed to re-run a command, plus checksums to confirm that the
/// re-run matched.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub run: Run,
    pub seeds: BTreeMap<String, u64>,
    /// SHA-256 of every input file, keyed by path.
    pub inputs: BTreeMap<PathBuf, String>,
    /// SHA-256 of every output file, keyed by name inside the output directory.
    pub outputs: BTreeMap<String, String>,
    /// Worker threads used; does not affect outputs.
    pub jobs: usize,
    pub wall_clock_seconds: f64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

impl RunManifest {
    pub fn new(run: Run, effects: &Effects, jobs: usize, wall_clock_seconds: f64) -> Result<Self> {
        let inputs = effects
            .inputs
            .iter()
            .map(|p| Ok((p.clone(), sha256_file(p)?)))
            .collect::<Result<_>>()?;
        let outputs = effects
            .outputs
            .iter()
            .map(|name| Ok((name.clone(), sha256_file(&run.out().join(name))?)))
            .collect::<Result<_>>()?;
        Ok(RunManifest {
            tool: "fairrec".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            run,
            seeds: effects.seeds.clone(),
            inputs,
            outputs,
            jobs,
            wall_clock_seconds,
        })
    }

    pub fn write(&self) -> Result<()> {
        let path = self.run.out().join(MANIFEST);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("{} is not a run manifest", path.display()))
    }

    /// Inputs whose contents changed since the manifest was written.
    pub fn changed_inputs(&self) -> Result<Vec<PathBuf>> {
        let mut changed = Vec::new();
        for (path, digest) in &self.inputs {
            if !path.is_file() || sha256_file(path)? != *digest {
                changed.push(path.clone());
            }
        }
        Ok(changed)
    }

    /// Output names whose checksums differ from `other`'s.
    pub fn differing_outputs(&self, other: &RunManifest) -> Vec<String> {
        let names: std::collections::BTreeSet<&String> =
            self.outputs.keys().chain(other.outputs.keys()).collect();
        names
            .into_iter()
            .filter(|n| self.outputs.get(*n) != other.outputs.get(*n))
            .cloned()
            .collect()
    }
}
