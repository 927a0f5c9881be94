use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::runner::{BufferStats, RunRecord};
use crate::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

/// Run metadata kept beside the curve files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub seed: u64,
    pub file: String,
    pub wall_clock_secs: f64,
    pub diverged_at: Option<u64>,
    pub steps_run: u64,
    pub buffer: BufferStats,
    pub overshoot_violations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub config: ExperimentConfig,
    pub runs: Vec<ManifestRun>,
}

/// Binds config hashes to configs and their per-seed curve files.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiments: BTreeMap<String, ManifestEntry>,
}

impl Manifest {
    /// Reads `dir/manifest.json`, or an empty manifest if absent.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Ok(Self::default());
        }
        serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| Error::Parse(format!("manifest: {e}")))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

pub fn csv_name(hash: &str, seed: u64) -> String {
    format!("{hash}_{seed}.csv")
}

/// `step,value` with shortest round-trip float formatting.
pub fn series_to_csv(series: &[(u64, f64)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "value"]).map_err(csv_err)?;
    for &(step, v) in series {
        w.write_record([step.to_string(), v.to_string()])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("ascii output"))
}

pub fn series_from_csv(text: &str) -> Result<Vec<(u64, f64)>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(csv_err)?;
    if headers.len() < 2 || &headers[0] != "step" {
        return Err(Error::Parse("expected header `step,value`".into()));
    }
    let mut out = Vec::new();
    for row in r.records() {
        let row = row.map_err(csv_err)?;
        let step = row[0]
            .trim()
            .parse::<u64>()
            .map_err(|e| Error::Parse(format!("step {:?}: {e}", &row[0])))?;
        let value = row[1]
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("value {:?}: {e}", &row[1])))?;
        out.push((step, value));
    }
    Ok(out)
}

pub fn read_series(path: impl AsRef<Path>) -> Result<Vec<(u64, f64)>> {
    series_from_csv(&fs::read_to_string(path)?)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Writes one CSV per record and merges the experiment into `dir/manifest.json`.
pub fn write_records(
    dir: &Path,
    config: &ExperimentConfig,
    records: &[RunRecord],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let hash = config.hash();
    let mut paths = Vec::with_capacity(records.len());
    let mut runs = Vec::with_capacity(records.len());
    for rec in records {
        let file = csv_name(&hash, rec.seed);
        let path = dir.join(&file);
        fs::write(&path, series_to_csv(&rec.series)?)?;
        paths.push(path);
        runs.push(ManifestRun {
            seed: rec.seed,
            file,
            wall_clock_secs: rec.wall_clock_secs,
            diverged_at: rec.diverged_at,
            steps_run: rec.steps_run,
            buffer: rec.buffer,
            overshoot_violations: rec.overshoot_violations,
        });
    }
    let mut manifest = Manifest::load(dir)?;
    manifest.experiments.insert(
        hash,
        ManifestEntry {
            config: config.clone(),
            runs,
        },
    );
    manifest.save(dir)?;
    Ok(paths)
}
