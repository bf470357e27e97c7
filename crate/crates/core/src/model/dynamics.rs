use rand::Rng;

use super::{Action, ActionSet, EnvConfig, SystemState, TransitionOutcome};
use crate::error::{Error, Result};

/// Result of one sampled slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub next: SystemState,
    /// AoI at the receiver during the slot, `c(s, a) = delta_rx`.
    pub cost: usize,
    pub ack: Option<bool>,
}

/// Actions allowed by energy causality: a fresh update needs `e_s + e_tx`
/// units, a retransmission needs `e_tx` and an undecoded packet (`r >= 1`).
pub fn feasible_actions(s: &SystemState, cfg: &EnvConfig) -> ActionSet {
    let mut set = ActionSet::empty();
    set.insert(Action::Idle);
    if s.b >= cfg.new_update_cost() {
        set.insert(Action::NewUpdate);
    }
    if s.b >= cfg.e_tx() && s.r >= 1 {
        set.insert(Action::Retransmit);
    }
    set
}

fn ensure_feasible(s: &SystemState, a: Action, cfg: &EnvConfig) -> Result<()> {
    if feasible_actions(s, cfg).contains(a) {
        Ok(())
    } else {
        Err(Error::InfeasibleAction { state: *s, action: a })
    }
}

/// Battery at the start of the next slot: spend, add the energy harvested in
/// this slot, clip at capacity.
pub fn next_battery(b: usize, harvested: usize, a: Action, cfg: &EnvConfig) -> Result<usize> {
    let spent = match a {
        Action::Idle => 0,
        Action::NewUpdate => cfg.new_update_cost(),
        Action::Retransmit => cfg.e_tx(),
    };
    if spent > b {
        return Err(Error::Domain(format!(
            "action {a} needs {spent} energy units but the battery holds {b}"
        )));
    }
    Ok((b - spent + harvested).min(cfg.b_max()))
}

/// Deterministic part of the transition once the channel outcome is known.
/// `ack` is `None` for idle slots. `e_next` is filled in by the caller.
fn advance(s: &SystemState, a: Action, ack: Option<bool>, b_next: usize, cfg: &EnvConfig) -> SystemState {
    let dmax = cfg.delta_max();
    let success = ack == Some(true);
    let delta_tx = match a {
        Action::NewUpdate => 1,
        _ => (s.delta_tx + 1).min(dmax),
    };
    let delta_rx = match (a, success) {
        (Action::NewUpdate, true) => 1,
        (Action::Retransmit, true) => (s.delta_tx + 1).min(dmax),
        _ => (s.delta_rx + 1).min(dmax),
    };
    let r = if success || delta_tx == dmax {
        0
    } else {
        match a {
            Action::NewUpdate => 1,
            Action::Idle => s.r,
            Action::Retransmit => (s.r + 1).min(cfg.r_max()),
        }
    };
    SystemState::new(s.e, b_next, delta_rx, delta_tx, r)
}

/// Failure probability of the channel use made by `a` in `s`; `None` for idle.
fn channel_error(s: &SystemState, a: Action, cfg: &EnvConfig) -> Option<f64> {
    match a {
        Action::Idle => None,
        Action::NewUpdate => Some(cfg.harq().error_probability_clamped(0)),
        Action::Retransmit => Some(cfg.harq().error_probability_clamped(s.r)),
    }
}

/// Exact `P(. | s, a)` as the product of the channel outcome and the next EH
/// state. Zero-probability branches are omitted.
pub fn transition_distribution(
    s: &SystemState,
    a: Action,
    cfg: &EnvConfig,
) -> Result<Vec<TransitionOutcome>> {
    ensure_feasible(s, a, cfg)?;
    let b_next = next_battery(s.b, s.e, a, cfg)?;
    let channel: Vec<(Option<bool>, f64)> = match channel_error(s, a, cfg) {
        None => vec![(None, 1.0)],
        Some(g) => vec![(Some(true), 1.0 - g), (Some(false), g)],
    };
    let row = cfg.eh().row(s.e);
    let mut out = Vec::with_capacity(channel.len() * row.len());
    for (ack, pc) in channel {
        let base = advance(s, a, ack, b_next, cfg);
        for (e_next, &pe) in row.iter().enumerate() {
            let prob = pc * pe;
            if prob > 0.0 {
                out.push(TransitionOutcome {
                    next: SystemState { e: e_next, ..base },
                    prob,
                    ack,
                });
            }
        }
    }
    Ok(out)
}

/// Free-function form of [`EnvConfig::initial_state`].
pub fn initial_state<R: Rng + ?Sized>(cfg: &EnvConfig, rng: &mut R) -> SystemState {
    cfg.initial_state(rng)
}

impl EnvConfig {
    pub fn feasible_actions(&self, s: &SystemState) -> ActionSet {
        feasible_actions(s, self)
    }

    /// Samples one slot. Every call consumes exactly two uniforms from `rng`
    /// (channel, then EH), idle or not, so that two runs sharing a seed stay
    /// aligned whatever actions they take.
    pub fn step<R: Rng + ?Sized>(&self, s: &SystemState, a: Action, rng: &mut R) -> Result<StepOutcome> {
        let u_channel: f64 = rng.gen();
        let u_eh: f64 = rng.gen();
        self.step_with_uniforms(s, a, u_channel, u_eh)
    }

    /// [`step`](Self::step) driven by explicit uniforms in `[0, 1)`.
    pub fn step_with_uniforms(
        &self,
        s: &SystemState,
        a: Action,
        u_channel: f64,
        u_eh: f64,
    ) -> Result<StepOutcome> {
        ensure_feasible(s, a, self)?;
        let b_next = next_battery(s.b, s.e, a, self)?;
        let ack = channel_error(s, a, self).map(|g| u_channel >= g);
        let mut next = advance(s, a, ack, b_next, self);
        next.e = self.eh().next_from_uniform(s.e, u_eh);
        Ok(StepOutcome {
            next,
            cost: s.delta_rx,
            ack,
        })
    }
}
