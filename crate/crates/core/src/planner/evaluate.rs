use nalgebra::{DMatrix, DVector};

use crate::model::{Action, EnvConfig};
use crate::policies::greedy_action;

use super::kernel::Mdp;
use super::space::{argmin_action, TabularPolicy};

/// Largest state space evaluated by a direct dense solve.
pub const DENSE_LIMIT: usize = 5000;

const ITERATIVE_TOL: f64 = 1e-11;
const ITERATIVE_MAX: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMethod {
    Dense,
    Iterative,
}

/// Average cost and bias of a fixed policy.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub gain: f64,
    /// Bias values with `h(reference) = 0`.
    pub h: Vec<f64>,
    /// `max_s |c(s) + E h(s') - h(s) - J|` for the policy's own actions.
    pub residual: f64,
    pub method: EvalMethod,
}

impl Mdp {
    /// Solves `h(s) + J = c(s) + sum_s' P(s'|s, pi(s)) h(s')` with
    /// `h(reference) = 0`.
    ///
    /// Small spaces use a dense LU factorization; larger ones (or a singular
    /// system, as for a policy with several recurrent classes) use a lazy
    /// relative evaluation sweep.
    pub fn evaluate(&self, policy: &TabularPolicy, reference: usize) -> Evaluation {
        assert_eq!(policy.len(), self.len(), "policy does not match the state space");
        for s in 0..self.len() {
            assert!(
                self.feasible(s).contains(policy.action(s)),
                "policy picks infeasible {} in {}",
                policy.action(s),
                self.state(s)
            );
        }
        if self.len() <= DENSE_LIMIT {
            if let Some(eval) = self.evaluate_dense(policy, reference) {
                return eval;
            }
            log::warn!("policy evaluation system is singular; falling back to iteration");
        }
        self.evaluate_iterative(policy, reference)
    }

    fn policy_residual(&self, policy: &TabularPolicy, gain: f64, h: &[f64]) -> f64 {
        (0..self.len())
            .map(|s| {
                let a = policy.action(s);
                (self.cost(s) + self.expected(s, a, h) - h[s] - gain).abs()
            })
            .fold(0.0, f64::max)
    }

    fn evaluate_dense(&self, policy: &TabularPolicy, reference: usize) -> Option<Evaluation> {
        let n = self.len();
        // Column `reference` carries the gain instead of h(reference) = 0.
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut c = DVector::<f64>::zeros(n);
        for s in 0..n {
            c[s] = self.cost(s);
            if s != reference {
                a[(s, s)] += 1.0;
            }
            for (t, p) in self.row(s, policy.action(s)) {
                if t != reference {
                    a[(s, t)] -= p;
                }
            }
            a[(s, reference)] += 1.0;
        }
        let x = a.lu().solve(&c)?;
        if x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let gain = x[reference];
        let mut h: Vec<f64> = x.iter().copied().collect();
        h[reference] = 0.0;
        let residual = self.policy_residual(policy, gain, &h);
        if residual > 1e-6 {
            return None;
        }
        Some(Evaluation {
            gain,
            h,
            residual,
            method: EvalMethod::Dense,
        })
    }

    fn evaluate_iterative(&self, policy: &TabularPolicy, reference: usize) -> Evaluation {
        // Lazy sweep h <- (h + T_pi h) / 2 - const, which removes periodicity
        // without changing the fixed point.
        let n = self.len();
        let mut h = vec![0.0; n];
        let mut w = vec![0.0; n];
        let mut gain = 0.0;
        for _ in 0..ITERATIVE_MAX {
            for (s, ws) in w.iter_mut().enumerate() {
                *ws = self.cost(s) + self.expected(s, policy.action(s), &h);
            }
            gain = w[reference] - h[reference];
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for s in 0..n {
                let next = 0.5 * h[s] + 0.5 * (w[s] - gain);
                let d = next - h[s];
                lo = lo.min(d);
                hi = hi.max(d);
                h[s] = next;
            }
            let shift = h[reference];
            h.iter_mut().for_each(|x| *x -= shift);
            if hi - lo < ITERATIVE_TOL {
                break;
            }
        }
        let residual = self.policy_residual(policy, gain, &h);
        Evaluation {
            gain,
            h,
            residual,
            method: EvalMethod::Iterative,
        }
    }

    /// Howard policy iteration started from the greedy baseline. Improvement
    /// keeps the incumbent action unless another one is better by more than a
    /// small margin, which rules out cycling between tied policies.
    pub fn policy_iteration(&self, reference: usize) -> PolicyIterationResult {
        let cfg = self.cfg();
        let mut policy = self.tabulate(|s| greedy_action(s, cfg));
        let mut iterations = 0;
        loop {
            iterations += 1;
            let eval = self.evaluate(&policy, reference);
            let margin = 1e-9 * (1.0 + eval.gain.abs());
            let mut changed = false;
            let next: Vec<Action> = (0..self.len())
                .map(|s| {
                    let q = self.q_row(s, &eval.h);
                    let current = policy.action(s);
                    let best = argmin_action(&q, self.feasible(s));
                    if q[best.index()] < q[current.index()] - margin {
                        changed = true;
                        best
                    } else {
                        current
                    }
                })
                .collect();
            if !changed || iterations >= 1000 {
                if changed {
                    log::warn!("policy iteration hit the iteration cap; returning the incumbent");
                }
                return PolicyIterationResult {
                    gain: eval.gain,
                    h: eval.h,
                    policy,
                    iterations,
                };
            }
            policy = TabularPolicy::new(self.space(), next);
        }
    }
}

#[derive(Debug, Clone)]
pub struct PolicyIterationResult {
    pub gain: f64,
    pub h: Vec<f64>,
    pub policy: TabularPolicy,
    pub iterations: usize,
}

/// Exact gain and bias of `policy` on `cfg`, normalized at the default
/// reference state.
pub fn evaluate_policy_exact(policy: &TabularPolicy, cfg: &EnvConfig) -> Evaluation {
    let mdp = Mdp::new(cfg);
    let reference = mdp.space().index(&super::DEFAULT_REFERENCE);
    mdp.evaluate(policy, reference)
}

/// Policy iteration on `cfg`; an independent check on relative value iteration.
pub fn policy_iteration_solve(cfg: &EnvConfig) -> (f64, TabularPolicy) {
    let mdp = Mdp::new(cfg);
    let reference = mdp.space().index(&super::DEFAULT_REFERENCE);
    let res = mdp.policy_iteration(reference);
    (res.gain, res.policy)
}
