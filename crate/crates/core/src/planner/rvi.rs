use std::fmt;

use crate::error::Error;
use crate::model::{EnvConfig, SystemState};

use super::kernel::Mdp;
use super::space::{argmin_action, TabularPolicy};

/// Reference state used to pin `h(s_ref) = 0`: empty battery, fresh AoI.
pub const DEFAULT_REFERENCE: SystemState = SystemState::new(0, 0, 1, 1, 0);

#[derive(Debug, Clone)]
pub struct RviOptions {
    /// Stop once `span(V_{n+1} - V_n)` drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub reference: SystemState,
}

impl Default for RviOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 100_000,
            reference: DEFAULT_REFERENCE,
        }
    }
}

impl RviOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Gain, differential values and action values of a solved instance.
#[derive(Debug, Clone)]
pub struct ValueTables {
    pub gain: f64,
    /// Differential values, zero at the reference state.
    pub h: Vec<f64>,
    /// `Q(s, a)` computed from `h`; `+inf` marks infeasible actions.
    pub q: Vec<[f64; 3]>,
    pub iterations: usize,
    /// Span of the last value difference.
    pub residual: f64,
    pub reference: usize,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub values: ValueTables,
    pub policy: TabularPolicy,
}

/// RVI ran out of iterations; the last tables are kept.
#[derive(Debug, Clone)]
pub struct Unconverged(pub Box<Solution>);

impl fmt::Display for Unconverged {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "relative value iteration stopped after {} iterations with span {:e}",
            self.0.values.iterations, self.0.values.residual
        )
    }
}

impl std::error::Error for Unconverged {}

impl From<Unconverged> for Error {
    fn from(u: Unconverged) -> Self {
        Error::NotConverged {
            iterations: u.0.values.iterations,
            residual: u.0.values.residual,
        }
    }
}

impl Mdp {
    /// Relative value iteration from `h_0 = 0`.
    pub fn rvi(&self, opts: &RviOptions) -> Result<Solution, Unconverged> {
        self.rvi_from(opts, &vec![0.0; self.len()])
    }

    /// Relative value iteration from an arbitrary `h_0`.
    ///
    /// Each sweep computes `V_{n+1}(s) = min_a [delta_rx + E h_n(s')]` and
    /// `h_{n+1} = V_{n+1} - V_{n+1}(s_ref)`. The gain is `V_{n+1}(s_ref)` at the
    /// last sweep.
    pub fn rvi_from(&self, opts: &RviOptions, h0: &[f64]) -> Result<Solution, Unconverged> {
        assert_eq!(h0.len(), self.len(), "initial h has the wrong length");
        let reference = self
            .space()
            .index_of(&opts.reference)
            .expect("reference state must be valid");
        let n = self.len();
        let mut h = h0.to_vec();
        let mut v_old = vec![f64::NAN; n];
        let mut v = vec![0.0; n];
        let mut residual = f64::INFINITY;
        let mut iterations = 0;
        let mut gain = 0.0;

        while iterations < opts.max_iter {
            iterations += 1;
            for (s, vs) in v.iter_mut().enumerate() {
                let q = self.q_row(s, &h);
                *vs = q.iter().copied().fold(f64::INFINITY, f64::min);
            }
            gain = v[reference];
            if iterations > 1 {
                let (lo, hi) = v
                    .iter()
                    .zip(&v_old)
                    .map(|(a, b)| a - b)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
                        (lo.min(d), hi.max(d))
                    });
                residual = hi - lo;
            }
            for (hs, vs) in h.iter_mut().zip(&v) {
                *hs = vs - gain;
            }
            std::mem::swap(&mut v, &mut v_old);
            if residual < opts.tol {
                break;
            }
        }

        let q = self.q_table(&h);
        let policy = TabularPolicy::new(
            self.space(),
            (0..n).map(|s| argmin_action(&q[s], self.feasible(s))).collect(),
        );
        let solution = Solution {
            values: ValueTables {
                gain,
                h,
                q,
                iterations,
                residual,
                reference,
            },
            policy,
        };
        if residual < opts.tol {
            Ok(solution)
        } else {
            Err(Unconverged(Box::new(solution)))
        }
    }

    /// `max_s |min_a Q(s, a) - h(s) - J|` with `Q` recomputed from `h`.
    pub fn bellman_residual(&self, gain: f64, h: &[f64]) -> f64 {
        (0..self.len())
            .map(|s| {
                let q = self.q_row(s, h);
                let m = q.iter().copied().fold(f64::INFINITY, f64::min);
                (m - h[s] - gain).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Builds the MDP for `cfg` and runs relative value iteration.
pub fn rvi_solve(cfg: &EnvConfig, opts: &RviOptions) -> Result<Solution, Unconverged> {
    Mdp::new(cfg).rvi(opts)
}
