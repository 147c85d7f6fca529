use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, PolicyKind};
use crate::episode::{EpisodeConfig, StateVariant};
use crate::error::{invalid, Error, Result};
use crate::radio::RadioParams;
use crate::seed::derive_seed;
use crate::topology::TopologyParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub bs_densities_km2: Vec<f64>,
    pub build_densities_km2: Vec<f64>,
    /// BS density held fixed while building density varies.
    pub bs_median_km2: f64,
    /// Building density held fixed while BS density varies.
    pub build_median_km2: f64,
    pub episodes: usize,
    pub policies: Vec<PolicyKind>,
    pub variants: Vec<StateVariant>,
    pub master_seed: u64,
    pub replicates: usize,
    /// Inclusive 1-based episode window for summaries.
    pub summary_window: (usize, usize),
    /// Episodes whose per-step records are logged; `None` means first and last.
    pub log_step_episodes: Option<Vec<usize>>,
    /// Area and building shape; the densities here are ignored.
    pub topology: TopologyParams,
    pub radio: RadioParams,
    pub episode: EpisodeConfig,
    pub agent: AgentConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            bs_densities_km2: vec![1.0, 5.0, 10.0],
            build_densities_km2: vec![100.0, 500.0, 1000.0],
            bs_median_km2: 5.0,
            build_median_km2: 500.0,
            episodes: 300,
            policies: PolicyKind::ALL.to_vec(),
            variants: StateVariant::ALL.to_vec(),
            master_seed: 1,
            replicates: 5,
            summary_window: (250, 300),
            log_step_episodes: None,
            topology: TopologyParams::default(),
            radio: RadioParams::default(),
            episode: EpisodeConfig::default(),
            agent: AgentConfig::default(),
        }
    }
}

/// One unit of work: a density point, a policy, and a replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSpec {
    pub bs_density_km2: f64,
    pub build_density_km2: f64,
    pub policy: PolicyKind,
    /// Set for DQN only.
    pub variant: Option<StateVariant>,
    pub replicate: usize,
}

impl CellSpec {
    pub fn variant_name(&self) -> &'static str {
        self.variant.map_or("none", StateVariant::name)
    }

    pub fn cell_id(&self) -> String {
        format!(
            "bs{}_bl{}_{}_{}_r{}",
            self.bs_density_km2,
            self.build_density_km2,
            self.policy,
            self.variant_name(),
            self.replicate
        )
    }

    /// Seed of the city. It depends on the replicate only, so every policy and
    /// every density point of a replicate draw from the same streams and
    /// density comparisons are paired.
    pub fn topology_seed(&self, master: u64) -> u64 {
        derive_seed(master, &format!("topology|rep={}", self.replicate))
    }

    /// Seed of the policy's own streams.
    pub fn cell_seed(&self, master: u64) -> u64 {
        derive_seed(
            master,
            &format!(
                "cell|bs={}|build={}|policy={}|variant={}|rep={}",
                self.bs_density_km2,
                self.build_density_km2,
                self.policy,
                self.variant_name(),
                self.replicate
            ),
        )
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() || self.replicates == 0 {
            return Err(Error::NothingToRun);
        }
        if self.policies.contains(&PolicyKind::Dqn) && self.variants.is_empty() {
            return Err(invalid("DQN requested with no state variants"));
        }
        if self.bs_densities_km2.is_empty() && self.build_densities_km2.is_empty() {
            return Err(Error::NothingToRun);
        }
        let densities = self
            .bs_densities_km2
            .iter()
            .chain(&self.build_densities_km2)
            .chain([&self.bs_median_km2, &self.build_median_km2]);
        for d in densities {
            if !(d.is_finite() && *d > 0.0) {
                return Err(invalid(format!("densities must be positive, got {d}")));
            }
        }
        if self.episodes == 0 {
            return Err(invalid("episodes must be positive"));
        }
        let (lo, hi) = self.summary_window;
        if !(1 <= lo && lo <= hi && hi <= self.episodes) {
            return Err(invalid(format!(
                "summary window {lo}-{hi} must lie within 1-{}",
                self.episodes
            )));
        }
        if let Some(eps) = &self.log_step_episodes {
            if eps.iter().any(|e| *e == 0 || *e > self.episodes) {
                return Err(invalid("logged episodes must lie within 1..=episodes"));
            }
        }
        self.radio.validate()?;
        self.episode.validate()?;
        self.agent.validate()?;
        Ok(())
    }

    /// Episodes with per-step logs.
    pub fn logged_episodes(&self) -> Vec<usize> {
        let mut eps = self.log_step_episodes.clone().unwrap_or_else(|| vec![1, self.episodes]);
        eps.sort_unstable();
        eps.dedup();
        eps
    }

    /// Density points of both sweep legs, BS leg first, without duplicates.
    pub fn density_points(&self) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = Vec::new();
        let leg_bs = self.bs_densities_km2.iter().map(|b| (*b, self.build_median_km2));
        let leg_build = self.build_densities_km2.iter().map(|b| (self.bs_median_km2, *b));
        for p in leg_bs.chain(leg_build) {
            if !pts.contains(&p) {
                pts.push(p);
            }
        }
        pts
    }

    /// Every cell of the sweep in a fixed order: replicate, density point,
    /// policy, variant.
    pub fn cells(&self) -> Vec<CellSpec> {
        let mut out = Vec::new();
        for replicate in 0..self.replicates {
            for (bs, build) in self.density_points() {
                for &policy in &self.policies {
                    let variants: Vec<Option<StateVariant>> = if policy == PolicyKind::Dqn {
                        self.variants.iter().copied().map(Some).collect()
                    } else {
                        vec![None]
                    };
                    for variant in variants {
                        out.push(CellSpec {
                            bs_density_km2: bs,
                            build_density_km2: build,
                            policy,
                            variant,
                            replicate,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn topology_params(&self, cell: &CellSpec) -> TopologyParams {
        TopologyParams {
            bs_density_km2: cell.bs_density_km2,
            build_density_km2: cell.build_density_km2,
            ..self.topology
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_35_cells_per_replicate() {
        let cfg = ExperimentConfig { replicates: 1, ..Default::default() };
        assert_eq!(cfg.density_points().len(), 5);
        assert_eq!(cfg.cells().len(), 35);
        assert_eq!(ExperimentConfig::default().cells().len(), 175);
        // one density varies per leg
        for (bs, build) in cfg.density_points() {
            assert!(bs == 5.0 || build == 500.0);
        }
    }

    #[test]
    fn empty_policy_list_is_nothing_to_run() {
        let cfg = ExperimentConfig { policies: vec![], ..Default::default() };
        let err = cfg.validate().unwrap_err();
        assert!(matches!(err, Error::NothingToRun));
        assert_eq!(err.to_string(), "nothing to run");
    }

    #[test]
    fn window_must_fit() {
        let cfg = ExperimentConfig { summary_window: (250, 301), ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig { summary_window: (0, 10), ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_defaults_and_unknown_fields() {
        let cfg = ExperimentConfig::from_json(r#"{"episodes": 20, "summary_window": [11, 20]}"#).unwrap();
        assert_eq!(cfg.episodes, 20);
        assert_eq!(cfg.radio, RadioParams::default());
        assert!(ExperimentConfig::from_json(r#"{"episodez": 20}"#).is_err());
        assert!(ExperimentConfig::from_json("{").is_err());
        let back = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn topology_seed_is_shared_across_policies() {
        let cfg = ExperimentConfig { replicates: 1, ..Default::default() };
        let cells = cfg.cells();
        let at = |p: PolicyKind| cells.iter().find(|c| c.policy == p && c.bs_density_km2 == 1.0).unwrap();
        let (a, b) = (at(PolicyKind::Constant), at(PolicyKind::Dqn));
        assert_eq!(a.topology_seed(7), b.topology_seed(7));
        assert_ne!(a.cell_seed(7), b.cell_seed(7));
        assert_eq!(a.cell_id(), "bs1_bl500_constant_none_r0");
        assert_eq!(b.cell_id(), "bs1_bl500_dqn_basic_r0");
    }
}
