//! Simulation and learning stack for height control of a cellular-connected
//! UAV flying a straight line over a synthetic city.
//!
//! * [`topology`]: Poisson base stations and a lattice of Rayleigh-height buildings.
//! * [`radio`]: blockage, antenna gains, SINR and spectral efficiency.
//! * [`episode`]: the per-timestep flight environment and its observations.
//! * [`neural`]: a small MLP with backpropagation and Adam.
//! * [`agent`]: DQN and the Constant, Random and Genie baselines.
//! * [`harness`]: experiment configuration, sweeps and CSV/JSON output.

pub mod agent;
pub mod episode;
pub mod error;
pub mod harness;
pub mod neural;
pub mod radio;
pub mod seed;
pub mod topology;

pub use error::{Error, Result};
