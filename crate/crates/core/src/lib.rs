//! Dual-band (sub-6 GHz / mmWave) MIMO-OFDM downlink simulator with
//! codebook beam management, training-overhead accounting, and learned
//! band assignment (flat DDPG and a two-level hierarchical learner).
//!
//! Module map:
//! - [`channel`]: Manhattan mobility, geometric wideband channels, trace files
//! - [`mmwave`], [`sub6`]: per-band beam management pipelines
//! - [`env`]: the sequential decision environment
//! - [`nn`], [`ddpg`], [`hrl`]: learners
//! - [`baselines`], [`experiment`]: oracle policies and the experiment driver

pub mod baselines;
pub mod channel;
pub mod checks;
pub mod config;
pub mod ddpg;
pub mod env;
pub mod error;
pub mod experiment;
pub mod hrl;
pub mod linalg;
pub mod mmwave;
pub mod nn;
pub mod par;
pub mod rng;
pub mod sub6;

pub use config::{Band, ScenarioConfig};
pub use error::{Error, Result};
