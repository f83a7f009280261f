//! Slotted simulator and multi-agent deep Q-learning harness for
//! secrecy-constrained task offloading in UAV-assisted edge networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`topology`]: random 3D deployment and device-to-UAV association.
//! - [`channel`]: air-to-ground propagation, Shannon and secrecy rates,
//!   secure transmission time and energy.
//! - [`compute`]: computation time/energy and the priority-weighted cost.
//! - [`knapsack`]: 0/1 knapsack selection of local-processing candidates.
//! - [`env`]: the multi-agent MDP (observations, masks, step, reward).
//! - [`nn`]: dense Q-network with manual backpropagation and Adam.
//! - [`agent`]: masked DDQN training, replay, baselines and greedy execution.
//! - [`oracle`]: exhaustive reference solvers used by the test suites.
//! - [`config`] and [`experiment`]: configuration files and CLI experiments.

pub mod agent;
pub mod channel;
pub mod compute;
pub mod config;
pub mod env;
pub mod error;
pub mod experiment;
pub mod knapsack;
pub mod nn;
pub mod oracle;
pub mod rng;
pub mod topology;

pub use error::{Error, Result};
