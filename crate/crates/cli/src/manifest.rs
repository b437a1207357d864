use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{ensure, Context, Result};
use osc_engine::config::RunConfig;
use osc_engine::coupling::cache::CacheStatus;
use osc_engine::dynamics::ConvergenceReport;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct CacheRecord {
    pub key: String,
    pub status: CacheStatus,
    pub dir: Option<PathBuf>,
}

/// Everything needed to reproduce or audit one run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub version: &'static str,
    pub config: RunConfig,
    pub warnings: Vec<String>,
    pub cache: CacheRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_measure: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_p00: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceReport>,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &'static str, config: RunConfig, warnings: Vec<String>, cache: CacheRecord) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config,
            warnings,
            cache,
            tau_measure: None,
            min_p00: None,
            convergence: None,
            outputs: Vec::new(),
            timings: BTreeMap::new(),
        }
    }

    /// Writes `manifest.json` after confirming every listed output exists
    /// and is non-empty.
    pub fn finish(mut self, out: &Path) -> Result<()> {
        for name in &self.outputs {
            let len = std::fs::metadata(out.join(name))
                .with_context(|| format!("listed output {name} is missing"))?
                .len();
            ensure!(len > 0, "listed output {name} is empty");
        }
        self.outputs.push("manifest.json".into());
        let file =
            std::fs::File::create(out.join("manifest.json")).context("stage `manifest`: creating manifest.json")?;
        serde_json::to_writer_pretty(file, &self).context("stage `manifest`: writing manifest.json")?;
        Ok(())
    }
}

/// Runs `f` and records its duration under `stage`; errors carry the stage name.
pub fn timed<T>(timings: &mut BTreeMap<String, f64>, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let started = Instant::now();
    let value = f().with_context(|| format!("stage `{stage}` failed"))?;
    timings.insert(stage.to_string(), started.elapsed().as_secs_f64());
    log::info!("{stage}: {:.2}s", timings[stage]);
    Ok(value)
}
