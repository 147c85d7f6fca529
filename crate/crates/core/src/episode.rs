//! The flight environment: the UAV moves along the x axis at constant speed,
//! picks one height action per timestep and is always served by the
//! horizontally nearest base station.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::radio::{self, RadioParams};
use crate::topology::{CityTopology, Point3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Up = 0,
    Down = 1,
    Stay = 2,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Up, Action::Down, Action::Stay];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

/// Which environment features the agent observes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateVariant {
    Basic,
    Bs,
    Build,
    Complete,
}

impl StateVariant {
    pub const ALL: [StateVariant; 4] = [Self::Basic, Self::Bs, Self::Build, Self::Complete];

    pub fn name(self) -> &'static str {
        match self {
            Self::Basic => "basic",
            Self::Bs => "bs",
            Self::Build => "build",
            Self::Complete => "complete",
        }
    }

    pub fn has_bs_density(self) -> bool {
        matches!(self, Self::Bs | Self::Complete)
    }

    pub fn has_build_density(self) -> bool {
        matches!(self, Self::Build | Self::Complete)
    }

    /// Observation length for `k_nearest` distance slots.
    pub fn obs_len(self, k_nearest: usize) -> usize {
        2 + k_nearest + self.has_bs_density() as usize + self.has_build_density() as usize
    }
}

impl fmt::Display for StateVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StateVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase())
            .ok_or_else(|| invalid(format!("unknown state variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub steps_per_episode: usize,
    pub speed_mps: f64,
    pub dt_s: f64,
    pub travel_m: f64,
    pub h_init_m: f64,
    pub h_min_m: f64,
    pub h_max_m: f64,
    /// Height change of one up/down action.
    pub dh_m: f64,
    pub k_nearest: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            steps_per_episode: 100,
            speed_mps: 10.0,
            dt_s: 1.0,
            travel_m: 1000.0,
            h_init_m: 100.0,
            h_min_m: 20.0,
            h_max_m: 200.0,
            dh_m: 7.0,
            k_nearest: 3,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_episode == 0 {
            return Err(invalid("an episode needs at least one step"));
        }
        let covered = self.speed_mps * self.dt_s * self.steps_per_episode as f64;
        if (covered - self.travel_m).abs() > 1e-9 * self.travel_m.abs().max(1.0) {
            return Err(invalid(format!(
                "speed · dt · steps = {covered} m does not match travel {} m",
                self.travel_m
            )));
        }
        if !(self.h_min_m > 0.0 && self.h_min_m <= self.h_init_m && self.h_init_m <= self.h_max_m) {
            return Err(invalid("heights must satisfy 0 < h_min ≤ h_init ≤ h_max"));
        }
        if self.dh_m.is_nan() || self.dh_m <= 0.0 {
            return Err(invalid("height step must be positive"));
        }
        Ok(())
    }

    /// The path is centered on the area origin.
    pub fn x_start(&self) -> f64 {
        -self.travel_m / 2.0
    }

    pub fn x_at(&self, step_idx: usize) -> f64 {
        self.x_start() + step_idx as f64 * self.speed_mps * self.dt_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    pub step_idx: usize,
    pub x_m: f64,
    pub h_m: f64,
    pub serving_idx: usize,
    pub sinr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub variant: StateVariant,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: EnvState,
    pub sinr_linear: f64,
    /// Spectral efficiency at the new pose, bits/s/Hz.
    pub reward: f64,
    pub done: bool,
}

pub const SINR_DB_RANGE: (f64, f64) = (-20.0, 60.0);
pub const DISTANCE_SCALE_M: f64 = 2000.0;
pub const BS_DENSITY_SCALE_KM2: f64 = 10.0;
pub const BUILD_DENSITY_SCALE_KM2: f64 = 1000.0;

/// Argmax of `sinr_at` over a 1 m grid from `h_min` to `h_max`, with
/// `h_current` as an extra candidate. Ties prefer `h_current`, then the
/// lowest height.
pub fn best_height_on_grid(h_current: f64, h_min: f64, h_max: f64, mut sinr_at: impl FnMut(f64) -> f64) -> f64 {
    let mut best_h = h_current;
    let mut best = sinr_at(h_current);
    let n = (h_max - h_min).floor() as usize;
    for k in 0..=n {
        let h = h_min + k as f64;
        let s = sinr_at(h);
        if s > best {
            best = s;
            best_h = h;
        }
    }
    best_h
}

/// One city with one set of radio and flight parameters.
///
/// SINR is a pure function of the pose, so evaluations are memoized per
/// `(x, h)`; poses repeat heavily across episodes on the same city.
pub struct Environment<'a> {
    topology: &'a CityTopology,
    radio: &'a RadioParams,
    config: &'a EpisodeConfig,
    cache: HashMap<(u64, u64), (usize, f64)>,
}

impl<'a> Environment<'a> {
    pub fn new(topology: &'a CityTopology, radio: &'a RadioParams, config: &'a EpisodeConfig) -> Result<Self> {
        config.validate()?;
        radio.validate()?;
        if topology.bss.is_empty() {
            return Err(Error::NoBaseStations);
        }
        topology
            .area
            .check_path(config.x_start(), config.x_at(config.steps_per_episode))?;
        Ok(Self {
            topology,
            radio,
            config,
            cache: HashMap::new(),
        })
    }

    pub fn topology(&self) -> &CityTopology {
        self.topology
    }

    pub fn config(&self) -> &EpisodeConfig {
        self.config
    }

    pub fn radio(&self) -> &RadioParams {
        self.radio
    }

    /// Serving index and linear SINR at `(x, 0, h)`.
    pub fn link_at(&mut self, x: f64, h: f64) -> (usize, f64) {
        let key = (x.to_bits(), h.to_bits());
        if let Some(v) = self.cache.get(&key) {
            return *v;
        }
        let serving = radio::nearest_bs(self.topology, x, 0.0).expect("topology has base stations");
        let s = radio::sinr(self.topology, Point3::new(x, 0.0, h), serving, self.radio)
            .expect("serving index from nearest_bs");
        self.cache.insert(key, (serving, s));
        (serving, s)
    }

    pub fn reset(&mut self) -> EnvState {
        let x = self.config.x_start();
        let h = self.config.h_init_m;
        let (serving_idx, s) = self.link_at(x, h);
        EnvState {
            step_idx: 0,
            x_m: x,
            h_m: h,
            serving_idx,
            sinr_db: radio::to_db(s),
        }
    }

    fn next_height(&self, h: f64, action: Action) -> f64 {
        let c = self.config;
        match action {
            Action::Up => (h + c.dh_m).min(c.h_max_m),
            Action::Down => (h - c.dh_m).max(c.h_min_m),
            Action::Stay => h,
        }
    }

    pub fn step(&mut self, env: &EnvState, action: Action) -> Result<StepOutcome> {
        let steps = self.config.steps_per_episode;
        if env.step_idx >= steps {
            return Err(Error::EpisodeDone { steps });
        }
        let step_idx = env.step_idx + 1;
        let x = self.config.x_at(step_idx);
        let h = self.next_height(env.h_m, action);
        let (serving_idx, s) = self.link_at(x, h);
        Ok(StepOutcome {
            state: EnvState {
                step_idx,
                x_m: x,
                h_m: h,
                serving_idx,
                sinr_db: radio::to_db(s),
            },
            sinr_linear: s,
            reward: radio::spectral_efficiency(s),
            done: step_idx == steps,
        })
    }

    /// Normalized feature vector: SINR, height, the `k` nearest BS distances,
    /// then the densities the variant includes.
    pub fn observe(&self, env: &EnvState, variant: StateVariant) -> Observation {
        let c = self.config;
        let (lo, hi) = SINR_DB_RANGE;
        let sinr_db = if env.sinr_db.is_nan() { lo } else { env.sinr_db.clamp(lo, hi) };
        let mut values = Vec::with_capacity(variant.obs_len(c.k_nearest));
        values.push((sinr_db - lo) / (hi - lo));
        values.push(env.h_m / c.h_max_m);

        let mut dists: Vec<f64> = self
            .topology
            .bss
            .iter()
            .map(|b| (b.x_m - env.x_m).hypot(b.y_m))
            .collect();
        dists.sort_by(f64::total_cmp);
        values.extend(
            (0..c.k_nearest).map(|i| dists.get(i).map_or(1.0, |d| (d / DISTANCE_SCALE_M).min(1.0))),
        );
        if variant.has_bs_density() {
            values.push(self.topology.bs_density_km2 / BS_DENSITY_SCALE_KM2);
        }
        if variant.has_build_density() {
            values.push(self.topology.build_density_km2 / BUILD_DENSITY_SCALE_KM2);
        }
        Observation { variant, values }
    }

    /// Best height at the next position; see [`best_height_on_grid`].
    pub fn best_next_height(&mut self, env: &EnvState) -> f64 {
        let c = *self.config;
        let x = self.config.x_at(env.step_idx + 1);
        best_height_on_grid(env.h_m, c.h_min_m, c.h_max_m, |h| self.link_at(x, h).1)
    }

    /// Move toward next step's best height.
    pub fn genie_action(&mut self, env: &EnvState) -> Action {
        let target = self.best_next_height(env);
        if target > env.h_m {
            Action::Up
        } else if target < env.h_m {
            Action::Down
        } else {
            Action::Stay
        }
    }
}
