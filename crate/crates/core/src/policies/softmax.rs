use rand::{Rng, RngCore};

use super::Policy;
use crate::model::{Action, ActionSet, EnvConfig, SystemState};
use crate::planner::{argmin_action, StateIndexer, StateSpace};

/// Boltzmann distribution over the feasible actions,
/// `p(a) ∝ exp(-Q(s, a) / tau)`, computed after subtracting the row minimum.
///
/// `tau = 0` is accepted as the zero-temperature limit: all mass on the
/// argmin, exact ties resolved in [`Action::TIE_ORDER`].
pub fn softmax_distribution(q_row: &[f64; 3], tau: f64, feasible: ActionSet) -> [f64; 3] {
    assert!(!feasible.is_empty(), "no feasible action");
    assert!(tau >= 0.0, "temperature must be non-negative");
    let mut p = [0.0; 3];
    if tau == 0.0 {
        p[argmin_action(q_row, feasible).index()] = 1.0;
        return p;
    }
    let min = feasible
        .iter()
        .map(|a| q_row[a.index()])
        .fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    for a in feasible.iter() {
        let w = (-(q_row[a.index()] - min) / tau).exp();
        p[a.index()] = w;
        total += w;
    }
    p.iter_mut().for_each(|x| *x /= total);
    p
}

/// Inverse-CDF draw from a distribution over [`Action::ALL`].
pub fn sample_from(dist: &[f64; 3], u: f64) -> Action {
    let mut acc = 0.0;
    let mut last = Action::Idle;
    for a in Action::ALL {
        let p = dist[a.index()];
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = a;
        if u < acc {
            return a;
        }
    }
    last
}

/// Softmax over a tabular action-value function.
#[derive(Debug, Clone)]
pub struct SoftmaxPolicy {
    indexer: StateIndexer,
    q: Vec<[f64; 3]>,
    tau: f64,
}

impl SoftmaxPolicy {
    pub fn new(space: &StateSpace, q: Vec<[f64; 3]>, tau: f64) -> Self {
        assert_eq!(space.len(), q.len(), "one Q row per state");
        Self {
            indexer: space.indexer(),
            q,
            tau,
        }
    }
}

impl Policy for SoftmaxPolicy {
    fn act(&self, s: &SystemState, cfg: &EnvConfig, rng: &mut dyn RngCore) -> Action {
        let u: f64 = rng.gen();
        let idx = self.indexer.index_of(s).expect("state inside the table");
        sample_from(&softmax_distribution(&self.q[idx], self.tau, cfg.feasible_actions(s)), u)
    }

    fn name(&self) -> &str {
        "softmax"
    }
}
