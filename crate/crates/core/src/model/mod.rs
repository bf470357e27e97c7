//! Environment: state, actions, energy causality and the HARQ/EH dynamics.

mod config;
mod dynamics;
mod energy;
mod harq;

use std::fmt;

pub use config::EnvConfig;
pub(crate) use config::toml_error;
pub use dynamics::{
    feasible_actions, initial_state, next_battery, transition_distribution, StepOutcome,
};
pub use energy::{stationary_distribution, EhChain};
pub use harq::{error_probability, HarqModel};

/// Transmitter decision in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    /// Stay silent.
    Idle,
    /// Sense and transmit a fresh status update.
    NewUpdate,
    /// Retransmit the last failed update.
    Retransmit,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Idle, Action::NewUpdate, Action::Retransmit];

    /// Preference order for breaking exact ties: the cheaper action wins.
    pub const TIE_ORDER: [Action; 3] = [Action::Idle, Action::Retransmit, Action::NewUpdate];

    /// Dense index, also the integer code used in plot data (0=i, 1=n, 2=x).
    pub fn index(self) -> usize {
        match self {
            Action::Idle => 0,
            Action::NewUpdate => 1,
            Action::Retransmit => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    pub fn symbol(self) -> char {
        match self {
            Action::Idle => 'i',
            Action::NewUpdate => 'n',
            Action::Retransmit => 'x',
        }
    }

    pub fn from_symbol(c: &str) -> Option<Action> {
        match c {
            "i" => Some(Action::Idle),
            "n" => Some(Action::NewUpdate),
            "x" => Some(Action::Retransmit),
            _ => None,
        }
    }

    pub fn is_transmission(self) -> bool {
        self != Action::Idle
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// Feasible-action set as a small bit mask indexed by [`Action::index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ActionSet(u8);

impl ActionSet {
    pub fn empty() -> Self {
        ActionSet(0)
    }

    pub fn insert(&mut self, a: Action) {
        self.0 |= 1 << a.index();
    }

    pub fn contains(self, a: Action) -> bool {
        self.0 & (1 << a.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Action> {
        Action::ALL.into_iter().filter(move |a| self.contains(*a))
    }
}

impl FromIterator<Action> for ActionSet {
    fn from_iter<I: IntoIterator<Item = Action>>(iter: I) -> Self {
        let mut s = ActionSet::empty();
        for a in iter {
            s.insert(a);
        }
        s
    }
}

/// `(e, b, delta_rx, delta_tx, r)`: EH state, battery level, AoI at the
/// receiver, AoI at the transmitter and retransmission count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SystemState {
    pub e: usize,
    pub b: usize,
    pub delta_rx: usize,
    pub delta_tx: usize,
    pub r: usize,
}

impl SystemState {
    pub const fn new(e: usize, b: usize, delta_rx: usize, delta_tx: usize, r: usize) -> Self {
        Self {
            e,
            b,
            delta_rx,
            delta_tx,
            r,
        }
    }
}

impl fmt::Display for SystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {}, {})",
            self.e, self.b, self.delta_rx, self.delta_tx, self.r
        )
    }
}

/// One branch of `P(. | s, a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionOutcome {
    pub next: SystemState,
    pub prob: f64,
    /// Channel feedback; `None` when nothing was transmitted.
    pub ack: Option<bool>,
}
