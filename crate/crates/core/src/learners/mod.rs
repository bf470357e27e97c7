//! Model-free learners. They see the environment only through
//! [`EnvConfig::step`](crate::EnvConfig::step) and the feasibility mask.

mod dqn;
mod fdpg;
mod gr;
mod hyper;
mod trace;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use dqn::{
    dqn_learn, dqn_td_error, encode_state, huber_loss, huber_grad, td_error_gradient, Adam,
    DqnHyper, DqnState, Mlp, ReplayBuffer, Transition,
};
pub use fdpg::{
    fdpg_gradient_estimate, fdpg_learn, fdpg_rollout_pair, FdpgHyper, FdpgState,
    RolloutPair,
};
pub use gr::{gr_learn, gr_q_update, GrHyper, GrState};
pub use hyper::LearnerConfig;
pub use trace::{RunTrace, TRACE_CSV_HEADER};

/// Step sizes of the form `y / (k + offset)^z`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, serde::Serialize)]
pub struct StepSchedule {
    pub y: f64,
    pub z: f64,
    #[serde(default)]
    pub offset: f64,
}

impl StepSchedule {
    pub const fn new(y: f64, z: f64, offset: f64) -> Self {
        Self { y, z, offset }
    }

    pub fn at(&self, k: u64) -> f64 {
        self.y / (k as f64 + self.offset).powf(self.z)
    }

    /// `sum a(k) = inf` and `sum a(k)^2 < inf` for a polynomial schedule.
    pub fn is_robbins_monro(&self) -> bool {
        self.y > 0.0 && self.z > 0.5 && self.z <= 1.0
    }

    /// Whether `self(k) / other(k) -> 0`.
    pub fn vanishes_against(&self, other: &StepSchedule) -> bool {
        self.z > other.z
    }
}

/// Independent generators for environment noise (stream 0) and for the
/// learner's own exploration (stream 1), both keyed by `seed`.
pub fn substreams(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut env = ChaCha8Rng::seed_from_u64(seed);
    env.set_stream(0);
    let mut explore = ChaCha8Rng::seed_from_u64(seed);
    explore.set_stream(1);
    (env, explore)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn schedule_values() {
        let s = StepSchedule::new(5.0, 0.6, 1.0);
        assert!((s.at(0) - 5.0).abs() < 1e-15);
        assert!((s.at(1) - 5.0 / 2f64.powf(0.6)).abs() < 1e-15);
        assert!(s.is_robbins_monro());
        assert!(!StepSchedule::new(1.0, 0.5, 0.0).is_robbins_monro());
        assert!(!StepSchedule::new(1.0, 1.2, 0.0).is_robbins_monro());
    }

    #[test]
    fn substreams_differ() {
        let (mut a, mut b) = substreams(7);
        let x: u64 = a.gen();
        let y: u64 = b.gen();
        assert_ne!(x, y);
        let (mut a2, _) = substreams(7);
        assert_eq!(x, a2.gen::<u64>());
    }
}
