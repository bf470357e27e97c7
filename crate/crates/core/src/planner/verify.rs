use crate::model::{Action, EnvConfig, SystemState};

use super::kernel::Mdp;
use super::rvi::ValueTables;
use super::space::{StateSpace, TabularPolicy};

/// Slack allowed in the diminishing-differences inequality.
pub const SUBMODULARITY_TOL: f64 = 1e-9;

/// A `(e, b, delta_tx, r)` slice where the policy idles again after having
/// transmitted at a smaller receiver AoI.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdViolation {
    pub e: usize,
    pub b: usize,
    pub delta_tx: usize,
    pub r: usize,
    /// Receiver AoI of the first transmission in the slice.
    pub first_transmit: usize,
    /// Receiver AoI of the first idle decision after it.
    pub idle_after: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ThresholdReport {
    pub slices_checked: usize,
    pub violations: Vec<ThresholdViolation>,
}

impl ThresholdReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that in every `(e, b, delta_tx, r)` slice the policy is idle up to
/// some receiver AoI and transmits (`n` or `x`) from there on.
pub fn verify_threshold_structure(policy: &TabularPolicy, space: &StateSpace) -> ThresholdReport {
    assert_eq!(policy.len(), space.len(), "policy does not match the state space");
    let mut report = ThresholdReport::default();
    let states = space.states();
    // Group states by slice; within a slice delta_rx increases with the index.
    let mut slices: std::collections::BTreeMap<(usize, usize, usize, usize), Vec<usize>> =
        Default::default();
    for (i, s) in states.iter().enumerate() {
        slices.entry((s.e, s.b, s.delta_tx, s.r)).or_default().push(i);
    }
    for ((e, b, delta_tx, r), members) in slices {
        report.slices_checked += 1;
        let mut first_transmit = None;
        for i in members {
            let a = policy.action(i);
            match (first_transmit, a.is_transmission()) {
                (None, true) => first_transmit = Some(states[i].delta_rx),
                (Some(t), false) => {
                    report.violations.push(ThresholdViolation {
                        e,
                        b,
                        delta_tx,
                        r,
                        first_transmit: t,
                        idle_after: states[i].delta_rx,
                    });
                    break;
                }
                _ => {}
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubmodularityViolation {
    /// State at the lower receiver AoI; the comparison is with `delta_rx + 1`.
    pub state: SystemState,
    pub pair: (Action, Action),
    /// `Q(delta_rx + 1, a2) - Q(delta_rx + 1, a1)`.
    pub upper_difference: f64,
    /// `Q(delta_rx, a2) - Q(delta_rx, a1)`.
    pub lower_difference: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SubmodularityReport {
    pub comparisons: usize,
    pub violations: Vec<SubmodularityViolation>,
    /// Largest `upper - lower` seen (positive values are violations).
    pub worst_excess: f64,
}

impl SubmodularityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const ACTION_PAIRS: [(Action, Action); 3] = [
    (Action::Idle, Action::NewUpdate),
    (Action::Idle, Action::Retransmit),
    (Action::NewUpdate, Action::Retransmit),
];

impl Mdp {
    /// Checks that `Q(s, a2) - Q(s, a1)` is non-increasing in the receiver AoI
    /// for the pairs `(i, n)`, `(i, x)` and `(n, x)`, with `Q` rebuilt from
    /// `values.h`. Pairs with an infeasible action are skipped.
    pub fn verify_submodularity(&self, values: &ValueTables, tol: f64) -> SubmodularityReport {
        let space = self.space();
        let mut report = SubmodularityReport {
            worst_excess: f64::NEG_INFINITY,
            ..Default::default()
        };
        for (lo_idx, s) in space.states().iter().enumerate() {
            if s.delta_rx >= space.delta_max() {
                continue;
            }
            let up = SystemState {
                delta_rx: s.delta_rx + 1,
                ..*s
            };
            let up_idx = space.index(&up);
            let feasible = self.feasible(lo_idx);
            let q_lo = self.q_row(lo_idx, &values.h);
            let q_up = self.q_row(up_idx, &values.h);
            for (a1, a2) in ACTION_PAIRS {
                if !(feasible.contains(a1) && feasible.contains(a2)) {
                    continue;
                }
                report.comparisons += 1;
                let upper = q_up[a2.index()] - q_up[a1.index()];
                let lower = q_lo[a2.index()] - q_lo[a1.index()];
                let excess = upper - lower;
                report.worst_excess = report.worst_excess.max(excess);
                if excess > tol {
                    report.violations.push(SubmodularityViolation {
                        state: *s,
                        pair: (a1, a2),
                        upper_difference: upper,
                        lower_difference: lower,
                    });
                }
            }
        }
        report
    }
}

/// Free-function form of [`Mdp::verify_submodularity`] at the default tolerance.
pub fn verify_submodularity(values: &ValueTables, cfg: &EnvConfig) -> SubmodularityReport {
    Mdp::new(cfg).verify_submodularity(values, SUBMODULARITY_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> StateSpace {
        StateSpace::with_dims(1, 2, 12, 1)
    }

    #[test]
    fn always_idle_is_vacuously_monotone() {
        let space = space();
        let p = TabularPolicy::from_fn(&space, |_| Action::Idle);
        let rep = verify_threshold_structure(&p, &space);
        assert!(rep.passed());
        assert!(rep.slices_checked > 0);
    }

    #[test]
    fn idle_after_transmit_is_reported_once() {
        let space = space();
        let p = TabularPolicy::from_fn(&space, |s| {
            let in_slice = s.e == 0 && s.b == 2 && s.delta_tx == 1 && s.r == 0;
            if in_slice && s.delta_rx == 9 {
                Action::NewUpdate
            } else {
                Action::Idle
            }
        });
        let rep = verify_threshold_structure(&p, &space);
        assert_eq!(
            rep.violations,
            vec![ThresholdViolation {
                e: 0,
                b: 2,
                delta_tx: 1,
                r: 0,
                first_transmit: 9,
                idle_after: 10
            }]
        );
    }

    #[test]
    fn proper_thresholds_pass() {
        let space = space();
        let p = TabularPolicy::from_fn(&space, |s| {
            if s.delta_rx >= 5 + s.b {
                Action::NewUpdate
            } else {
                Action::Idle
            }
        });
        assert!(verify_threshold_structure(&p, &space).passed());
    }
}
