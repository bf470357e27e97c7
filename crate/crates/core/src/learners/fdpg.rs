use std::time::Instant;

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;

use super::{substreams, RunTrace, StepSchedule};
use crate::model::{EnvConfig, SystemState};
use crate::policies::{Column, Policy, SigmoidThresholdParams, ThresholdLayout, ThresholdTable, Variant};

/// Finite-difference policy gradient settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, serde::Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct FdpgHyper {
    /// Perturbation size.
    pub sigma: f64,
    /// Bernoulli parameter of the perturbation directions.
    pub q: f64,
    /// Slots per rollout; one iteration spends twice this many.
    pub rollout: usize,
    pub tau0: f64,
    pub tau_decay: f64,
    /// `gamma(n)`, indexed from `n = 1`.
    pub step: StepSchedule,
    /// Starting value of every free threshold (clipped into range).
    pub theta0: f64,
}

impl Default for FdpgHyper {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            q: 0.5,
            rollout: 50,
            tau0: 0.3,
            tau_decay: 0.99,
            step: StepSchedule::new(500.0, 0.6, 1.0),
            theta0: 6.0,
        }
    }
}

impl FdpgHyper {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.sigma > 0.0
            && self.q > 0.0
            && self.q < 1.0
            && self.rollout >= 1
            && self.tau0 > 0.0
            && self.tau_decay > 0.0
            && self.tau_decay <= 1.0
            && self.step.is_robbins_monro();
        if ok {
            Ok(())
        } else {
            Err(crate::Error::InvalidConfig(format!("bad FDPG settings: {self:?}")))
        }
    }
}

/// `(D^T D)^-1 D (J+ - J-) / (2 sigma)` for a 0/1 direction vector `d`.
/// `None` when `d` has no ones, in which case the caller draws a new one.
pub fn fdpg_gradient_estimate(d: &[bool], j_plus: f64, j_minus: f64, sigma: f64) -> Option<Vec<f64>> {
    let ones = d.iter().filter(|&&x| x).count();
    if ones == 0 {
        return None;
    }
    let g = (j_plus - j_minus) / (2.0 * sigma * ones as f64);
    Some(d.iter().map(|&x| if x { g } else { 0.0 }).collect())
}

/// Average AoI of the `+` and `-` rollouts and the states they ended in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutPair {
    pub j_plus: f64,
    pub j_minus: f64,
    pub end_plus: SystemState,
    pub end_minus: SystemState,
}

fn perturbed(
    base: &SigmoidThresholdParams,
    coords: &[(usize, Column)],
    d: &[bool],
    delta: f64,
) -> SigmoidThresholdParams {
    let mut p = base.clone();
    for (&c, _) in coords.iter().zip(d).filter(|(_, &on)| on) {
        p.set(c, base.get(c) + delta);
    }
    p
}

fn rollout(
    cfg: &EnvConfig,
    policy: &SigmoidThresholdParams,
    start: SystemState,
    horizon: usize,
    mut env: ChaCha8Rng,
    mut explore: ChaCha8Rng,
    mut trace: Option<&mut RunTrace>,
) -> (f64, SystemState) {
    let mut s = start;
    let mut total = 0u64;
    for _ in 0..horizon {
        let a = policy.act(&s, cfg, &mut explore as &mut dyn RngCore);
        let out = cfg.step(&s, a, &mut env).expect("sigmoid policy is coerced to feasible");
        total += out.cost as u64;
        if let Some(t) = trace.as_deref_mut() {
            t.push(out.cost);
        }
        s = out.next;
    }
    (total as f64 / horizon as f64, s)
}

/// Rolls out `theta +- sigma D` from the same start state with the same
/// random numbers (common random numbers).
#[allow(clippy::too_many_arguments)]
pub fn fdpg_rollout_pair(
    cfg: &EnvConfig,
    params: &SigmoidThresholdParams,
    coords: &[(usize, Column)],
    d: &[bool],
    sigma: f64,
    start: SystemState,
    horizon: usize,
    rollout_seed: u64,
    mut trace: Option<&mut RunTrace>,
) -> RolloutPair {
    let plus = perturbed(params, coords, d, sigma);
    let minus = perturbed(params, coords, d, -sigma);
    let (env, explore) = substreams(rollout_seed);
    let (j_plus, end_plus) = rollout(cfg, &plus, start, horizon, env.clone(), explore.clone(), trace.as_deref_mut());
    let (j_minus, end_minus) = rollout(cfg, &minus, start, horizon, env, explore, trace);
    RolloutPair {
        j_plus,
        j_minus,
        end_plus,
        end_minus,
    }
}

/// Parameters and bookkeeping of one FDPG run.
#[derive(Debug, Clone)]
pub struct FdpgState {
    params: SigmoidThresholdParams,
    coords: Vec<(usize, Column)>,
    hyper: FdpgHyper,
    iteration: u64,
    state: SystemState,
    diverged: bool,
}

impl FdpgState {
    pub fn new(cfg: &EnvConfig, variant: Variant, hyper: FdpgHyper, start: SystemState) -> Self {
        let params = SigmoidThresholdParams::new(ThresholdLayout::new(cfg), variant, hyper.theta0, hyper.tau0);
        let coords = params.coordinates();
        Self {
            params,
            coords,
            hyper,
            iteration: 0,
            state: start,
            diverged: false,
        }
    }

    pub fn params(&self) -> &SigmoidThresholdParams {
        &self.params
    }

    /// Number of learnable thresholds.
    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn diverged(&self) -> bool {
        self.diverged
    }

    /// One perturb / roll out / update / anneal / project cycle. `rng`
    /// supplies the directions and the per-iteration rollout seed.
    pub fn iterate<R: Rng + ?Sized>(&mut self, cfg: &EnvConfig, rng: &mut R, trace: Option<&mut RunTrace>) -> RolloutPair {
        let h = self.hyper;
        let dim = self.coords.len();
        let d: Vec<bool> = if dim == 0 {
            Vec::new()
        } else {
            loop {
                let d: Vec<bool> = (0..dim).map(|_| rng.gen::<f64>() < h.q).collect();
                if d.iter().any(|&x| x) {
                    break d;
                }
            }
        };
        let rollout_seed: u64 = rng.gen();
        let pair = fdpg_rollout_pair(cfg, &self.params, &self.coords, &d, h.sigma, self.state, h.rollout, rollout_seed, trace);
        self.iteration += 1;
        if let Some(grad) = fdpg_gradient_estimate(&d, pair.j_plus, pair.j_minus, h.sigma) {
            let gamma = h.step.at(self.iteration);
            let limit = 10.0 * cfg.delta_max() as f64;
            for (&c, g) in self.coords.iter().zip(&grad) {
                let v = self.params.get(c) - gamma * g;
                if v.abs() > limit {
                    self.diverged = true;
                }
                self.params.set(c, v);
            }
        }
        self.params.set_tau(self.params.tau() * h.tau_decay);
        self.params.project();
        self.state = pair.end_plus;
        pair
    }
}

/// Runs `iterations` FDPG cycles and returns the rounded threshold table.
/// The trace holds every environment slot of both rollouts.
pub fn fdpg_learn(
    cfg: &EnvConfig,
    iterations: usize,
    seed: u64,
    hyper: FdpgHyper,
    variant: Variant,
) -> (ThresholdTable, RunTrace) {
    let start = Instant::now();
    let (mut env_rng, mut rng) = substreams(seed);
    let s0 = cfg.initial_state(&mut env_rng);
    let mut st = FdpgState::new(cfg, variant, hyper, s0);
    let name = match variant {
        Variant::Single => "fdpg-single",
        Variant::Double => "fdpg-double",
    };
    let mut trace = RunTrace::with_capacity(name, seed, 2 * hyper.rollout * iterations);
    for _ in 0..iterations {
        st.iterate(cfg, &mut rng, Some(&mut trace));
    }
    trace.diverged = st.diverged();
    trace.elapsed = start.elapsed();
    (st.params().to_table(), trace)
}
