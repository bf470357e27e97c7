//! Average age-of-information (AoI) minimization for an energy-harvesting
//! transmitter that sends status updates over a HARQ link.
//!
//! The crate is split the same way the problem is:
//!
//! * [`model`] holds the environment: states, actions, energy causality and the
//!   stochastic dynamics, both as an exact enumerator and as a sampler.
//! * [`planner`] solves the average-cost MDP exactly (relative value iteration
//!   and policy iteration) and checks the threshold structure of the result.
//! * [`policies`] contains the policy families: tabular, greedy, single and
//!   double thresholds, softmax and sigmoid-smoothed thresholds.
//! * [`learners`] implements the three model-free learners (GR-learning,
//!   finite-difference policy gradient and DQN).
//! * [`harness`] runs seeded multi-run experiments, sweeps and the figure
//!   presets, and writes CSV output.

pub mod error;
pub mod harness;
pub mod learners;
pub mod model;
pub mod planner;
pub mod policies;

pub use error::{Error, Result};
pub use model::{Action, EhChain, EnvConfig, HarqModel, SystemState, TransitionOutcome};
