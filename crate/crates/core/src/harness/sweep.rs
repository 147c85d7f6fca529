use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::PolicyKind;
use crate::episode::StateVariant;
use crate::error::{invalid, Error, Result};

use super::cell::{run_cell, CellResult};
use super::config::{CellSpec, ExperimentConfig};
use super::output::{summarize, write_episodes_csv, write_steps_csv, write_summary_csv};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCell {
    pub cell_id: String,
    pub bs_density: f64,
    pub build_density: f64,
    pub policy: PolicyKind,
    pub variant: Option<StateVariant>,
    pub replicate: usize,
    pub topology_seed: u64,
    pub seed: u64,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ManifestCell {
    pub fn spec(&self) -> CellSpec {
        CellSpec {
            bs_density_km2: self.bs_density,
            build_density_km2: self.build_density,
            policy: self.policy,
            variant: self.variant,
            replicate: self.replicate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    /// Crate version that wrote the files.
    pub code_version: String,
    pub master_seed: u64,
    pub config: ExperimentConfig,
    pub cells: Vec<ManifestCell>,
}

impl Manifest {
    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        if m.version != MANIFEST_VERSION {
            return Err(invalid(format!("unsupported manifest version {}", m.version)));
        }
        Ok(m)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(dir.join("manifest.json"))?)
    }
}

#[derive(Debug)]
pub struct SweepReport {
    /// Successful cells in sweep order.
    pub results: Vec<CellResult>,
    pub manifest: Manifest,
    pub failures: Vec<Error>,
}

/// Run `cells` on a pool of `jobs` threads. Output order follows `cells`
/// regardless of scheduling; a failing cell does not stop the others.
pub fn sweep(config: &ExperimentConfig, cells: &[CellSpec], jobs: usize) -> Result<SweepReport> {
    config.validate()?;
    if cells.is_empty() {
        return Err(Error::NothingToRun);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<CellResult>> = pool.install(|| cells.par_iter().map(|c| run_cell(config, c)).collect());

    let mut results = Vec::new();
    let mut failures = Vec::new();
    let mut entries = Vec::with_capacity(cells.len());
    for (spec, outcome) in cells.iter().zip(outcomes) {
        let master = config.master_seed;
        let (status, error) = match outcome {
            Ok(r) => {
                results.push(r);
                (CellStatus::Ok, None)
            }
            Err(e) => {
                let msg = e.to_string();
                failures.push(e);
                (CellStatus::Failed, Some(msg))
            }
        };
        entries.push(ManifestCell {
            cell_id: spec.cell_id(),
            bs_density: spec.bs_density_km2,
            build_density: spec.build_density_km2,
            policy: spec.policy,
            variant: spec.variant,
            replicate: spec.replicate,
            topology_seed: spec.topology_seed(master),
            seed: spec.cell_seed(master),
            status,
            error,
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: config.master_seed,
        config: config.clone(),
        cells: entries,
    };
    Ok(SweepReport { results, manifest, failures })
}

/// Sweep and write `manifest.json`, `episodes.csv`, `steps.csv` and
/// `summary.csv` into `out_dir`.
pub fn run_and_write(config: &ExperimentConfig, cells: &[CellSpec], jobs: usize, out_dir: &Path) -> Result<SweepReport> {
    let report = sweep(config, cells, jobs)?;
    fs::create_dir_all(out_dir)?;
    write_episodes_csv(&report.results, BufWriter::new(File::create(out_dir.join("episodes.csv"))?))?;
    write_steps_csv(&report.results, BufWriter::new(File::create(out_dir.join("steps.csv"))?))?;
    let rows = summarize(&report.results, config.summary_window);
    write_summary_csv(&rows, BufWriter::new(File::create(out_dir.join("summary.csv"))?))?;
    let manifest = serde_json::to_string_pretty(&report.manifest)?;
    fs::write(out_dir.join("manifest.json"), manifest + "\n")?;
    Ok(report)
}
