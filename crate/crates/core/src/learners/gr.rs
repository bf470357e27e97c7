use std::time::Instant;

use rand::Rng;

use super::{substreams, RunTrace, StepSchedule};
use crate::model::{Action, ActionSet, EnvConfig, SystemState};
use crate::planner::{argmin_action, StateIndexer, StateSpace, TabularPolicy};
use crate::policies::{sample_from, softmax_distribution};

/// GR-learning settings. Defaults: `tau_0 = 4` decayed by `0.99995` per step
/// down to 1, `alpha(m) = m^-0.51`, `beta(n) = 1` (the gain then tracks the
/// empirical average cost) and `J_0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, serde::Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrHyper {
    pub tau0: f64,
    pub tau_decay: f64,
    pub tau_min: f64,
    /// Indexed by the visit count of the updated pair, starting at 1.
    pub alpha: StepSchedule,
    /// Indexed by the global update count, starting at 1.
    pub beta: StepSchedule,
    pub gain0: f64,
}

impl Default for GrHyper {
    fn default() -> Self {
        Self {
            tau0: 4.0,
            tau_decay: 0.99995,
            tau_min: 1.0,
            alpha: StepSchedule::new(1.0, 0.51, 0.0),
            beta: StepSchedule::new(1.0, 0.0, 0.0),
            gain0: 0.0,
        }
    }
}

impl GrHyper {
    /// Effective step applied to `cost - gain` in the gain update, which
    /// scales `beta` by `1 / (n + 1)`.
    pub fn gain_step(&self) -> StepSchedule {
        StepSchedule::new(self.beta.y, self.beta.z + 1.0, self.beta.offset)
    }

    /// Convergence conditions on the Q step and the effective gain step.
    pub fn schedules_valid(&self) -> bool {
        let gain = self.gain_step();
        self.alpha.is_robbins_monro() && gain.is_robbins_monro() && gain.vanishes_against(&self.alpha)
    }
}

/// Tabular relative Q-values, visit counts, gain estimate and temperature.
#[derive(Debug, Clone)]
pub struct GrState {
    indexer: StateIndexer,
    q: Vec<[f64; 3]>,
    visits: Vec<[u32; 3]>,
    gain: f64,
    tau: f64,
    step: u64,
    hyper: GrHyper,
}

impl GrState {
    pub fn new(cfg: &EnvConfig, hyper: GrHyper) -> Self {
        let indexer = StateSpace::new(cfg).indexer();
        let n = indexer.len();
        Self {
            indexer,
            q: vec![[0.0; 3]; n],
            visits: vec![[0; 3]; n],
            gain: hyper.gain0,
            tau: hyper.tau0,
            step: 0,
            hyper,
        }
    }

    fn idx(&self, s: &SystemState) -> usize {
        self.indexer.index_of(s).expect("state inside the table")
    }

    pub fn q(&self, s: &SystemState) -> [f64; 3] {
        self.q[self.idx(s)]
    }

    pub fn visits(&self, s: &SystemState, a: Action) -> u32 {
        self.visits[self.idx(s)][a.index()]
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Softmax draw over the feasible actions using the uniform `u`.
    pub fn select(&self, s: &SystemState, feasible: ActionSet, u: f64) -> Action {
        let dist = softmax_distribution(&self.q(s), self.tau, feasible);
        sample_from(&dist, u)
    }

    /// Greedy policy with respect to the current table.
    pub fn greedy_policy(&self, cfg: &EnvConfig) -> TabularPolicy {
        let space = StateSpace::new(cfg);
        TabularPolicy::from_fn(&space, |s| argmin_action(&self.q(s), cfg.feasible_actions(s)))
    }
}

/// One GR-learning update after `a` was taken in `s` with `cost`, leading to
/// `next` where `next_feasible` is allowed:
///
/// `Q(s,a) += alpha(m) [cost - J + min_a' Q(next, a') - Q(s,a)]`, then
/// `J += beta(n) [(n J + cost) / (n + 1) - J]`, then the temperature decays.
pub fn gr_q_update(
    grs: &mut GrState,
    s: &SystemState,
    a: Action,
    next: &SystemState,
    next_feasible: ActionSet,
    cost: f64,
) {
    let i = grs.idx(s);
    let j = grs.idx(next);
    let m = &mut grs.visits[i][a.index()];
    *m += 1;
    let alpha = grs.hyper.alpha.at(u64::from(*m));
    let q_next = grs.q[j];
    let best_next = next_feasible
        .iter()
        .map(|b| q_next[b.index()])
        .fold(f64::INFINITY, f64::min);
    let q = &mut grs.q[i][a.index()];
    *q += alpha * (cost - grs.gain + best_next - *q);

    let n = grs.step + 1;
    let nf = n as f64;
    grs.gain += grs.hyper.beta.at(n) * ((nf * grs.gain + cost) / (nf + 1.0) - grs.gain);
    grs.step = n;
    grs.tau = (grs.tau * grs.hyper.tau_decay).max(grs.hyper.tau_min);
}

/// Runs GR-learning with softmax exploration along a single trajectory of
/// `steps` slots and returns the greedy policy of the final table.
pub fn gr_learn(cfg: &EnvConfig, steps: usize, seed: u64, hyper: GrHyper) -> (TabularPolicy, RunTrace) {
    let start = Instant::now();
    let (mut env_rng, mut explore) = substreams(seed);
    let mut grs = GrState::new(cfg, hyper);
    let mut trace = RunTrace::with_capacity("gr", seed, steps);
    let mut s = cfg.initial_state(&mut env_rng);
    let mut feasible = cfg.feasible_actions(&s);
    for _ in 0..steps {
        let a = grs.select(&s, feasible, explore.gen());
        let out = cfg.step(&s, a, &mut env_rng).expect("sampled action is feasible");
        let next_feasible = cfg.feasible_actions(&out.next);
        gr_q_update(&mut grs, &s, a, &out.next, next_feasible, out.cost as f64);
        trace.push(out.cost);
        s = out.next;
        feasible = next_feasible;
    }
    trace.elapsed = start.elapsed();
    (grs.greedy_policy(cfg), trace)
}
