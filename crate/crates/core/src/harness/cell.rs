use crate::agent::{run_episode, Policy, StepRecord};
use crate::episode::{Environment, StateVariant};
use crate::error::{Error, Result};
use crate::topology::CityTopology;

use super::config::{CellSpec, ExperimentConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    /// 1-based.
    pub episode: usize,
    pub throughput_bits_hz: f64,
    pub mean_height_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub spec: CellSpec,
    pub cell_id: String,
    pub seed: u64,
    pub topology_seed: u64,
    pub episodes: Vec<EpisodeSummary>,
    /// Per-step records of the logged episodes, in episode order.
    pub step_logs: Vec<(usize, Vec<StepRecord>)>,
}

impl CellResult {
    /// Mean throughput over the inclusive 1-based episode range.
    pub fn mean_throughput(&self, from: usize, to: usize) -> f64 {
        let xs: Vec<f64> = self
            .episodes
            .iter()
            .filter(|e| (from..=to).contains(&e.episode))
            .map(|e| e.throughput_bits_hz)
            .collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Generate the cell's city and run every episode of its policy on it.
pub fn run_cell(config: &ExperimentConfig, spec: &CellSpec) -> Result<CellResult> {
    let cell_id = spec.cell_id();
    let wrap = |e: Error| Error::Cell { cell_id: cell_id.clone(), source: Box::new(e) };
    let master = config.master_seed;
    let topology_seed = spec.topology_seed(master);
    let seed = spec.cell_seed(master);
    let topology = CityTopology::generate(&config.topology_params(spec), topology_seed).map_err(wrap)?;
    let mut env = Environment::new(&topology, &config.radio, &config.episode).map_err(wrap)?;
    let variant = spec.variant.unwrap_or(StateVariant::Basic);
    let obs_len = variant.obs_len(config.episode.k_nearest);
    let mut policy = Policy::new(spec.policy, variant, obs_len, config.agent, seed).map_err(wrap)?;

    let logged = config.logged_episodes();
    let mut episodes = Vec::with_capacity(config.episodes);
    let mut step_logs = Vec::new();
    for episode in 1..=config.episodes {
        let run = run_episode(&mut policy, &mut env).map_err(wrap)?;
        episodes.push(EpisodeSummary {
            episode,
            throughput_bits_hz: run.throughput_bits_hz,
            mean_height_m: run.mean_height_m,
        });
        if logged.contains(&episode) {
            step_logs.push((episode, run.steps));
        }
    }
    Ok(CellResult { spec: *spec, cell_id, seed, topology_seed, episodes, step_logs })
}
