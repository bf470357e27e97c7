use rand::{Rng, RngCore};

use super::threshold::{project_double, ThresholdLayout, ThresholdTable, Variant};
use super::{coerce, Policy};
use crate::model::{Action, EnvConfig, SystemState};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let z = x.exp();
        z / (1.0 + z)
    }
}

/// Smoothed thresholds: the probability of transmitting in state `s` is
/// `1 / (1 + exp(-(delta_rx - theta) / tau))`.
///
/// The double variant gates twice with the same uniform draw `u`: `x` when
/// `u < sigma_x`, otherwise `n` when `u < sigma_n`, otherwise `i`. With
/// `theta_n <= theta_x` this gives `P(x) = sigma_x` and `P(n) = sigma_n - sigma_x`,
/// which tends to the double-threshold rule as `tau -> 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmoidThresholdParams {
    layout: ThresholdLayout,
    variant: Variant,
    theta_n: Vec<f64>,
    theta_x: Vec<f64>,
    tau: f64,
}

/// Which column of the table a learnable coordinate belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    N,
    X,
}

impl SigmoidThresholdParams {
    /// Every free coordinate starts at `init`; pinned ones at their fixed value.
    pub fn new(layout: ThresholdLayout, variant: Variant, init: f64, tau: f64) -> Self {
        assert!(tau > 0.0, "temperature must be positive");
        let n = layout.len();
        let mut p = Self {
            layout,
            variant,
            theta_n: vec![init; n],
            theta_x: vec![init; n],
            tau,
        };
        p.project();
        p
    }

    pub fn layout(&self) -> &ThresholdLayout {
        &self.layout
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn set_tau(&mut self, tau: f64) {
        assert!(tau > 0.0, "temperature must be positive");
        self.tau = tau;
    }

    pub fn theta_n(&self) -> &[f64] {
        &self.theta_n
    }

    pub fn theta_x(&self) -> &[f64] {
        &self.theta_x
    }

    /// Learnable coordinates in a fixed order (pinned and tied slots left out).
    pub fn coordinates(&self) -> Vec<(usize, Column)> {
        let l = &self.layout;
        let mut out = Vec::new();
        for slot in 0..l.len() {
            match self.variant {
                Variant::Single => {
                    if !l.single_pinned(slot) {
                        out.push((slot, Column::N));
                    }
                }
                Variant::Double => {
                    if l.double_n_free(slot) {
                        out.push((slot, Column::N));
                    }
                    if l.double_x_free(slot) {
                        out.push((slot, Column::X));
                    }
                }
            }
        }
        out
    }

    pub fn get(&self, coord: (usize, Column)) -> f64 {
        match coord.1 {
            Column::N => self.theta_n[coord.0],
            Column::X => self.theta_x[coord.0],
        }
    }

    /// Writes raw values into the learnable coordinates, without projecting.
    pub fn set(&mut self, coord: (usize, Column), value: f64) {
        match coord.1 {
            Column::N => {
                self.theta_n[coord.0] = value;
                if self.variant == Variant::Single {
                    self.theta_x[coord.0] = value;
                }
            }
            Column::X => self.theta_x[coord.0] = value,
        }
    }

    /// Clips every coordinate to `[1, delta_max + 1]`, restores pinned values
    /// and, for the double variant, enforces `theta_n <= theta_x`.
    pub fn project(&mut self) {
        let l = self.layout;
        let never = l.never() as f64;
        for slot in 0..l.len() {
            match self.variant {
                Variant::Single => {
                    let v = if l.single_pinned(slot) {
                        never
                    } else {
                        self.theta_n[slot].clamp(1.0, never)
                    };
                    self.theta_n[slot] = v;
                    self.theta_x[slot] = v;
                }
                Variant::Double => {
                    let (n, x) = project_double(&l, slot, self.theta_n[slot], self.theta_x[slot]);
                    self.theta_n[slot] = n;
                    self.theta_x[slot] = x;
                }
            }
        }
    }

    fn gates(&self, s: &SystemState) -> (f64, f64) {
        let slot = self.layout.slot_of(s);
        let d = s.delta_rx as f64;
        (
            sigmoid((d - self.theta_n[slot]) / self.tau),
            sigmoid((d - self.theta_x[slot]) / self.tau),
        )
    }

    /// Action for a given uniform draw `u` in `[0, 1)`.
    pub fn action_for_uniform(&self, s: &SystemState, u: f64) -> Action {
        let (p_n, p_x) = self.gates(s);
        let preferred = match self.variant {
            Variant::Single => {
                if u < p_n {
                    if s.r == 0 {
                        Action::NewUpdate
                    } else {
                        Action::Retransmit
                    }
                } else {
                    Action::Idle
                }
            }
            Variant::Double => {
                if u < p_x {
                    Action::Retransmit
                } else if u < p_n {
                    Action::NewUpdate
                } else {
                    Action::Idle
                }
            }
        };
        coerce(preferred, self.layout.feasible(s))
    }

    /// Deterministic limit: thresholds rounded to integers.
    pub fn to_table(&self) -> ThresholdTable {
        let round = |v: f64| v.round().max(1.0) as usize;
        match self.variant {
            Variant::Single => ThresholdTable::single(self.layout, |e, b, d, r| {
                round(self.theta_n[self.layout.slot(e, b, d, r)])
            }),
            Variant::Double => ThresholdTable::double(self.layout, |e, b, d, r| {
                let slot = self.layout.slot(e, b, d, r);
                (round(self.theta_n[slot]), round(self.theta_x[slot]))
            }),
        }
    }
}

/// Probability of transmitting at all in `s` (the `n`/`x` gate for the single
/// variant, the first gate for the double one).
pub fn sigmoid_transmit_probability(params: &SigmoidThresholdParams, s: &SystemState) -> f64 {
    params.gates(s).0
}

impl Policy for SigmoidThresholdParams {
    fn act(&self, s: &SystemState, _cfg: &EnvConfig, rng: &mut dyn RngCore) -> Action {
        let u: f64 = rng.gen();
        self.action_for_uniform(s, u)
    }

    fn name(&self) -> &str {
        match self.variant {
            Variant::Single => "sigmoid-single",
            Variant::Double => "sigmoid-double",
        }
    }
}
