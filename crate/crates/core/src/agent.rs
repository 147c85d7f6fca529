//! Height-control policies: the DQN learner and the Constant, Random and
//! Genie-assisted baselines.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::episode::{Action, EnvState, Environment, Observation, StateVariant};
use crate::error::{invalid, Error, Result};
use crate::neural::{td_loss_and_grads, NetworkCheckpoint, QNetwork, TargetNetwork, Transition};
use crate::seed::{label, substream, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub hidden: [usize; 2],
    pub learning_rate: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Training starts once the buffer holds this many transitions.
    pub min_fill: usize,
    pub target_sync_every: u64,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            hidden: [64, 64],
            learning_rate: 1e-3,
            gamma: 0.95,
            batch_size: 32,
            buffer_capacity: 50_000,
            min_fill: 32,
            target_sync_every: 200,
            epsilon_start: 1.0,
            epsilon_decay: 0.99,
            epsilon_floor: 0.001,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.target_sync_every == 0 {
            return Err(invalid("batch size, buffer capacity and sync period must be positive"));
        }
        if self.min_fill < self.batch_size || self.min_fill > self.buffer_capacity {
            return Err(invalid("min_fill must lie in [batch_size, buffer_capacity]"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_floor)
            || !(self.epsilon_floor..=1.0).contains(&self.epsilon_start)
            || !(0.0..=1.0).contains(&self.epsilon_decay)
        {
            return Err(invalid("epsilon schedule out of range"));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || !(0.0..=1.0).contains(&self.gamma) {
            return Err(invalid("learning rate must be positive and gamma in [0, 1]"));
        }
        Ok(())
    }
}

/// Fixed-capacity ring of transitions; the oldest entry is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    head: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { items: Vec::with_capacity(capacity.min(1 << 16)), capacity, head: 0, inserted: 0 }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
        self.inserted += 1;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Entries from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer)
    }

    /// `n` distinct indices drawn uniformly.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        index::sample(rng, self.items.len(), n.min(self.items.len())).into_vec()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Transition> {
        self.sample_indices(n, rng).into_iter().map(|i| &self.items[i]).collect()
    }
}

/// Multiplicative decay with a floor, applied once per environment step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub value: f64,
    pub decay: f64,
    pub floor: f64,
}

impl EpsilonSchedule {
    pub fn new(start: f64, decay: f64, floor: f64) -> Self {
        Self { value: start.max(floor), decay, floor }
    }

    pub fn step(&mut self) {
        self.value = (self.value * self.decay).max(self.floor);
    }
}

/// The learning agent: online and target networks, replay buffer, exploration
/// schedule and its own random streams.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub variant: StateVariant,
    pub config: AgentConfig,
    pub net: QNetwork,
    pub target: TargetNetwork,
    pub buffer: ReplayBuffer,
    pub epsilon: EpsilonSchedule,
    train_steps: u64,
    explore_rng: SimRng,
    replay_rng: SimRng,
}

impl DqnAgent {
    pub fn new(variant: StateVariant, obs_len: usize, config: AgentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let dims = [obs_len, config.hidden[0], config.hidden[1], Action::ALL.len()];
        let net = QNetwork::new(&dims, &mut substream(seed, label::NET_INIT))?;
        let target = TargetNetwork::new(&net);
        Ok(Self {
            variant,
            config,
            target,
            net,
            buffer: ReplayBuffer::new(config.buffer_capacity),
            epsilon: EpsilonSchedule::new(config.epsilon_start, config.epsilon_decay, config.epsilon_floor),
            train_steps: 0,
            explore_rng: substream(seed, label::EXPLORATION),
            replay_rng: substream(seed, label::REPLAY),
        })
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    /// Epsilon-greedy: explore with probability ε, else argmax Q.
    pub fn select_action(&mut self, obs: &Observation) -> Result<Action> {
        let draw: f64 = self.explore_rng.random();
        if draw < self.epsilon.value {
            let i = self.explore_rng.random_range(0..Action::ALL.len());
            return Ok(Action::ALL[i]);
        }
        Ok(greedy_action(&self.net.forward(&obs.values)?))
    }

    /// Store `t`, train on one batch once the buffer is warm, sync the target
    /// on schedule and decay ε. Returns the batch loss when training ran.
    pub fn record_and_train(&mut self, t: Transition) -> Result<Option<f64>> {
        self.buffer.push(t);
        let mut loss = None;
        if self.buffer.len() >= self.config.min_fill {
            let batch = self.buffer.sample(self.config.batch_size, &mut self.replay_rng);
            let (l, grads) = td_loss_and_grads(&self.net, &self.target, &batch, self.config.gamma)?;
            self.net.optimizer_step(&grads, self.config.learning_rate)?;
            self.train_steps += 1;
            if self.train_steps.is_multiple_of(self.config.target_sync_every) {
                self.target.sync(&self.net);
            }
            loss = Some(l);
        }
        self.epsilon.step();
        Ok(loss)
    }

    pub fn checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint {
            variant: self.variant,
            epsilon: self.epsilon.value,
            train_steps: self.train_steps,
            buffer_len: self.buffer.len(),
            buffer_inserted: self.buffer.inserted(),
            network: self.net.to_checkpoint(),
        }
    }
}

/// Agent snapshot: the network checkpoint plus a small header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub variant: StateVariant,
    pub epsilon: f64,
    pub train_steps: u64,
    pub buffer_len: usize,
    pub buffer_inserted: u64,
    pub network: NetworkCheckpoint,
}

/// Index of the largest Q-value; ties go to the lowest action index.
pub fn greedy_action(q: &[f64]) -> Action {
    let mut best = 0;
    for (i, v) in q.iter().enumerate() {
        if *v > q[best] {
            best = i;
        }
    }
    Action::from_index(best).expect("three Q-values")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Constant,
    Random,
    Genie,
    Dqn,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [Self::Constant, Self::Random, Self::Genie, Self::Dqn];

    pub fn name(self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::Random => "random",
            Self::Genie => "genie",
            Self::Dqn => "dqn",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s.to_ascii_lowercase())
            .ok_or_else(|| invalid(format!("unknown policy {s:?}")))
    }
}

pub enum Policy {
    Constant,
    Random(Box<SimRng>),
    Genie,
    Dqn(Box<DqnAgent>),
}

impl Policy {
    /// Build a policy. `variant` and `obs_len` only matter for DQN.
    pub fn new(kind: PolicyKind, variant: StateVariant, obs_len: usize, config: AgentConfig, seed: u64) -> Result<Self> {
        Ok(match kind {
            PolicyKind::Constant => Self::Constant,
            PolicyKind::Random => Self::Random(Box::new(substream(seed, label::RANDOM_POLICY))),
            PolicyKind::Genie => Self::Genie,
            PolicyKind::Dqn => Self::Dqn(Box::new(DqnAgent::new(variant, obs_len, config, seed)?)),
        })
    }

    pub fn kind(&self) -> PolicyKind {
        match self {
            Self::Constant => PolicyKind::Constant,
            Self::Random(_) => PolicyKind::Random,
            Self::Genie => PolicyKind::Genie,
            Self::Dqn(_) => PolicyKind::Dqn,
        }
    }

    /// The variant observed by a DQN policy; baselines observe nothing.
    pub fn variant(&self) -> Option<StateVariant> {
        match self {
            Self::Dqn(a) => Some(a.variant),
            _ => None,
        }
    }

    pub fn select_action(&mut self, obs: Option<&Observation>, env: &mut Environment<'_>, state: &EnvState) -> Result<Action> {
        match self {
            Self::Constant => Ok(Action::Stay),
            Self::Random(rng) => Ok(Action::ALL[rng.random_range(0..Action::ALL.len())]),
            Self::Genie => Ok(env.genie_action(state)),
            Self::Dqn(agent) => {
                let obs = obs.ok_or_else(|| invalid("DQN policy needs an observation"))?;
                agent.select_action(obs)
            }
        }
    }
}

/// One logged timestep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub x_m: f64,
    pub h_m: f64,
    pub action: Action,
    pub sinr_db: f64,
    pub se_bits_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRun {
    pub throughput_bits_hz: f64,
    pub mean_height_m: f64,
    pub steps: Vec<StepRecord>,
}

/// Reset the environment and fly one episode, training a DQN policy online.
pub fn run_episode(policy: &mut Policy, env: &mut Environment<'_>) -> Result<EpisodeRun> {
    let mut state = env.reset();
    let variant = policy.variant();
    let mut obs = variant.map(|v| env.observe(&state, v));
    let n = env.config().steps_per_episode;
    let mut steps = Vec::with_capacity(n);
    loop {
        let action = policy.select_action(obs.as_ref(), env, &state)?;
        let out = env.step(&state, action)?;
        let next_obs = variant.map(|v| env.observe(&out.state, v));
        if let (Policy::Dqn(agent), Some(o), Some(no)) = (&mut *policy, obs.take(), next_obs.as_ref()) {
            agent.record_and_train(Transition {
                state: o.values,
                action,
                reward: out.reward,
                next_state: no.values.clone(),
                done: out.done,
            })?;
        }
        steps.push(StepRecord {
            step: out.state.step_idx,
            x_m: out.state.x_m,
            h_m: out.state.h_m,
            action,
            sinr_db: out.state.sinr_db,
            se_bits_hz: out.reward,
        });
        state = out.state;
        obs = next_obs;
        if out.done {
            break;
        }
    }
    let throughput_bits_hz = steps.iter().map(|s| s.se_bits_hz).sum();
    let mean_height_m = steps.iter().map(|s| s.h_m).sum::<f64>() / steps.len() as f64;
    Ok(EpisodeRun { throughput_bits_hz, mean_height_m, steps })
}
