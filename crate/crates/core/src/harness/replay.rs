use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use crate::error::{Error, Result};
use crate::radio::{self, nearest_bs, spectral_efficiency};
use crate::topology::{CityTopology, Point3};

use super::output::{read_episodes_csv, StepRow};
use super::sweep::{CellStatus, Manifest};

/// Absolute tolerance on recomputed spectral efficiency and episode sums.
pub const REPLAY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub rows_checked: usize,
    pub episodes_checked: usize,
    pub max_abs_error: f64,
}

struct EpisodeSum {
    first_row: usize,
    logged: f64,
    sum: f64,
}

/// Recompute every row of `steps.csv` in `dir` from the manifest's seeds and
/// configuration. The first disagreement is reported with its data row number.
pub fn replay_check(dir: &Path) -> Result<ReplayReport> {
    let manifest = Manifest::read(dir)?;
    let cfg = &manifest.config;
    let cells: HashMap<&str, _> = manifest
        .cells
        .iter()
        .filter(|c| c.status == CellStatus::Ok)
        .map(|c| (c.cell_id.as_str(), c))
        .collect();

    let mut topologies: HashMap<(u64, u64, u64), CityTopology> = HashMap::new();
    let mut sums: Vec<((String, usize), EpisodeSum)> = Vec::new();
    let mut max_err = 0.0_f64;
    let mut rows = 0;

    let mut rdr = csv::Reader::from_reader(BufReader::new(File::open(dir.join("steps.csv"))?));
    for (i, rec) in rdr.deserialize::<StepRow>().enumerate() {
        let row = i + 1;
        let r = rec.map_err(|e| Error::LogMismatch(format!("steps.csv row {row}: {e}")))?;
        let cell = cells
            .get(r.cell_id.as_str())
            .ok_or_else(|| Error::LogMismatch(format!("steps.csv row {row}: unknown cell {}", r.cell_id)))?;
        if cell.bs_density != r.bs_density || cell.build_density != r.build_density {
            return Err(Error::LogMismatch(format!("steps.csv row {row}: densities disagree with manifest")));
        }
        let spec = cell.spec();
        let key = (cell.topology_seed, cell.bs_density.to_bits(), cell.build_density.to_bits());
        let topo = match topologies.entry(key) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(CityTopology::generate(&cfg.topology_params(&spec), cell.topology_seed)?)
            }
        };
        let serving = nearest_bs(topo, r.x_m, 0.0).ok_or(Error::NoBaseStations)?;
        let s = radio::sinr(topo, Point3::new(r.x_m, 0.0, r.h_m), serving, &cfg.radio)?;
        let se = spectral_efficiency(s);
        let err = (se - r.se_bits_hz).abs();
        if err.is_nan() || err > REPLAY_TOL {
            return Err(Error::LogMismatch(format!(
                "steps.csv row {row} (cell {}, episode {}, step {}): logged {} recomputed {}",
                r.cell_id, r.episode, r.step, r.se_bits_hz, se
            )));
        }
        max_err = max_err.max(err);
        let key = (r.cell_id.clone(), r.episode);
        match sums.last_mut() {
            Some((k, acc)) if *k == key => acc.sum += r.se_bits_hz,
            _ => sums.push((key, EpisodeSum { first_row: row, logged: r.throughput_bits_hz, sum: r.se_bits_hz })),
        }
        rows += 1;
    }

    let episode_rows = match File::open(dir.join("episodes.csv")) {
        Ok(f) => Some(read_episodes_csv(BufReader::new(f))?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e.into()),
    };
    let listed: Option<HashMap<(&str, usize), f64>> = episode_rows
        .as_ref()
        .map(|rows| rows.iter().map(|e| ((e.cell_id.as_str(), e.episode), e.throughput_bits_hz)).collect());

    for ((cell_id, episode), acc) in &sums {
        let err = (acc.sum - acc.logged).abs();
        if err.is_nan() || err > REPLAY_TOL * acc.sum.abs().max(1.0) {
            return Err(Error::LogMismatch(format!(
                "steps.csv row {} (cell {cell_id}, episode {episode}): step sum {} but logged throughput {}",
                acc.first_row, acc.sum, acc.logged
            )));
        }
        if let Some(listed) = &listed {
            match listed.get(&(cell_id.as_str(), *episode)) {
                Some(t) if *t == acc.logged => {}
                _ => {
                    return Err(Error::LogMismatch(format!(
                        "steps.csv row {} (cell {cell_id}, episode {episode}): throughput not in episodes.csv",
                        acc.first_row
                    )))
                }
            }
        }
    }

    Ok(ReplayReport { rows_checked: rows, episodes_checked: sums.len(), max_abs_error: max_err })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::PolicyKind;
    use crate::harness::{run_and_write, ExperimentConfig};

    fn write_small(dir: &Path) {
        let cfg = ExperimentConfig {
            // two density points share one city seed
            bs_densities_km2: vec![1.0, 5.0],
            build_densities_km2: vec![],
            episodes: 2,
            summary_window: (1, 2),
            policies: vec![PolicyKind::Random, PolicyKind::Genie],
            replicates: 1,
            ..Default::default()
        };
        run_and_write(&cfg, &cfg.cells(), 1, dir).unwrap();
    }

    #[test]
    fn clean_logs_replay() {
        let dir = tempfile::tempdir().unwrap();
        write_small(dir.path());
        let rep = replay_check(dir.path()).unwrap();
        assert_eq!(rep.rows_checked, 2 * 2 * 2 * 100);
        assert_eq!(rep.episodes_checked, 8);
        assert_eq!(rep.max_abs_error, 0.0);
    }

    #[test]
    fn tampered_row_is_named() {
        let dir = tempfile::tempdir().unwrap();
        write_small(dir.path());
        let path = dir.path().join("steps.csv");
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        // data row 7 is line index 7 after the header
        let mut fields: Vec<String> = lines[7].split(',').map(str::to_string).collect();
        let se: f64 = fields[13].parse().unwrap();
        fields[13] = (se + 0.5).to_string();
        lines[7] = fields.join(",");
        std::fs::write(&path, lines.join("\n") + "\n").unwrap();
        let err = replay_check(dir.path()).unwrap_err();
        assert!(matches!(err, Error::LogMismatch(_)));
        assert!(err.to_string().contains("row 7 "), "{err}");
    }
}
