use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

/// Sidecar record of a run: enough to replay it. Only `timings` varies
/// between identical runs.
#[derive(Serialize)]
pub struct RunManifest {
    format_version: String,
    command: String,
    tool_version: String,
    argv: Vec<String>,
    parameters: serde_json::Value,
    seeds: BTreeMap<String, u64>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    threads: usize,
    /// Wall-clock seconds per phase.
    timings: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, parameters: &impl Serialize) -> Result<Self> {
        Ok(Self {
            format_version: kbann::format::current(),
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            argv: std::env::args().skip(1).collect(),
            parameters: serde_json::to_value(parameters)?,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            threads: rayon::current_num_threads(),
            timings: BTreeMap::new(),
        })
    }

    pub fn seed(&mut self, label: &str, seed: u64) -> &mut Self {
        self.seeds.insert(label.to_string(), seed);
        self
    }

    pub fn input(&mut self, path: &Path) -> &mut Self {
        self.inputs.push(path.display().to_string());
        self
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.display().to_string());
        self
    }

    /// Runs `f`, recording its wall time under `phase`.
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *self.timings.entry(phase.to_string()).or_default() += start.elapsed().as_secs_f64();
        out
    }

    /// Writes `<primary>.manifest.json` next to the primary output.
    pub fn write_beside(&self, primary: &Path) -> Result<PathBuf> {
        let path = manifest_path(primary);
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut name = primary.file_name().map(|n| n.to_os_string()).unwrap_or_else(|| "run".into());
    name.push(".manifest.json");
    primary.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_sits_beside_output() {
        assert_eq!(manifest_path(Path::new("out/a.csv")), PathBuf::from("out/a.csv.manifest.json"));
        assert_eq!(manifest_path(Path::new("bundle")), PathBuf::from("bundle.manifest.json"));
    }
}
