//! Policy families behind one decision interface.

mod sigmoid;
mod softmax;
mod threshold;

use rand::RngCore;

use crate::model::{Action, ActionSet, EnvConfig, SystemState};
use crate::planner::TabularPolicy;

pub use sigmoid::{sigmoid, Column, sigmoid_transmit_probability, SigmoidThresholdParams};
pub use softmax::{softmax_distribution, sample_from, SoftmaxPolicy};
pub use threshold::{
    double_threshold_action, single_threshold_action, ThresholdLayout, ThresholdTable, Variant,
};

/// A (possibly randomized) stationary policy.
///
/// Randomized realizations take exactly one uniform draw from `rng` per call;
/// deterministic ones take none.
pub trait Policy {
    fn act(&self, s: &SystemState, cfg: &EnvConfig, rng: &mut dyn RngCore) -> Action;

    fn name(&self) -> &str;
}

/// Senses and sends whenever the battery allows it, retransmits when only
/// the transmission energy is left, idles otherwise.
pub fn greedy_action(s: &SystemState, cfg: &EnvConfig) -> Action {
    if s.b < cfg.e_tx() {
        Action::Idle
    } else if s.b >= cfg.new_update_cost() {
        Action::NewUpdate
    } else if s.r >= 1 {
        Action::Retransmit
    } else {
        // Nothing to retransmit.
        Action::Idle
    }
}

/// Replaces an infeasible choice by the nearest feasible lower action along
/// `x -> n -> i`.
pub fn coerce(preferred: Action, feasible: ActionSet) -> Action {
    let chain: &[Action] = match preferred {
        Action::Retransmit => &[Action::Retransmit, Action::NewUpdate, Action::Idle],
        Action::NewUpdate => &[Action::NewUpdate, Action::Idle],
        Action::Idle => &[Action::Idle],
    };
    chain
        .iter()
        .copied()
        .find(|a| feasible.contains(*a))
        .unwrap_or(Action::Idle)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Greedy;

impl Policy for Greedy {
    fn act(&self, s: &SystemState, cfg: &EnvConfig, _rng: &mut dyn RngCore) -> Action {
        greedy_action(s, cfg)
    }

    fn name(&self) -> &str {
        "greedy"
    }
}

impl Policy for TabularPolicy {
    fn act(&self, s: &SystemState, _cfg: &EnvConfig, _rng: &mut dyn RngCore) -> Action {
        self.action_for(s)
    }

    fn name(&self) -> &str {
        "tabular"
    }
}

impl<P: Policy + ?Sized> Policy for &P {
    fn act(&self, s: &SystemState, cfg: &EnvConfig, rng: &mut dyn RngCore) -> Action {
        (**self).act(s, cfg, rng)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn act(&self, s: &SystemState, cfg: &EnvConfig, rng: &mut dyn RngCore) -> Action {
        (**self).act(s, cfg, rng)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}
