use crate::model::{Action, ActionSet, EnvConfig, SystemState};

/// Number of `(delta_rx, delta_tx)` pairs with `1 <= delta_tx <= delta_rx <= delta_max`.
pub fn aoi_pair_count(delta_max: usize) -> usize {
    delta_max * (delta_max + 1) / 2
}

/// Arithmetic position of a state in the lexicographic order of
/// `(e, b, delta_rx, delta_tx, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateIndexer {
    num_e: usize,
    b_max: usize,
    delta_max: usize,
    r_max: usize,
}

impl StateIndexer {
    pub fn len(&self) -> usize {
        self.num_e * (self.b_max + 1) * aoi_pair_count(self.delta_max) * (self.r_max + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, s: &SystemState) -> bool {
        s.e < self.num_e
            && s.b <= self.b_max
            && s.delta_tx >= 1
            && s.delta_tx <= s.delta_rx
            && s.delta_rx <= self.delta_max
            && s.r <= self.r_max
    }

    pub fn index_of(&self, s: &SystemState) -> Option<usize> {
        if !self.contains(s) {
            return None;
        }
        let pair = (s.delta_rx - 1) * s.delta_rx / 2 + (s.delta_tx - 1);
        let idx = ((s.e * (self.b_max + 1) + s.b) * aoi_pair_count(self.delta_max) + pair)
            * (self.r_max + 1)
            + s.r;
        Some(idx)
    }
}

/// Every valid state, in lexicographic order of `(e, b, delta_rx, delta_tx, r)`,
/// with an arithmetic index map in both directions.
#[derive(Debug, Clone)]
pub struct StateSpace {
    states: Vec<SystemState>,
    indexer: StateIndexer,
}

impl StateSpace {
    pub fn new(cfg: &EnvConfig) -> Self {
        Self::with_dims(cfg.num_eh_states(), cfg.b_max(), cfg.delta_max(), cfg.r_max())
    }

    pub fn with_dims(num_e: usize, b_max: usize, delta_max: usize, r_max: usize) -> Self {
        let mut states =
            Vec::with_capacity(num_e * (b_max + 1) * aoi_pair_count(delta_max) * (r_max + 1));
        for e in 0..num_e {
            for b in 0..=b_max {
                for drx in 1..=delta_max {
                    for dtx in 1..=drx {
                        for r in 0..=r_max {
                            states.push(SystemState::new(e, b, drx, dtx, r));
                        }
                    }
                }
            }
        }
        Self {
            states,
            indexer: StateIndexer {
                num_e,
                b_max,
                delta_max,
                r_max,
            },
        }
    }

    pub fn indexer(&self) -> StateIndexer {
        self.indexer
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[SystemState] {
        &self.states
    }

    pub fn state(&self, idx: usize) -> SystemState {
        self.states[idx]
    }

    pub fn delta_max(&self) -> usize {
        self.indexer.delta_max
    }

    pub fn contains(&self, s: &SystemState) -> bool {
        self.indexer.contains(s)
    }

    /// Position of `s`, or `None` when it is not a valid state.
    pub fn index_of(&self, s: &SystemState) -> Option<usize> {
        self.indexer.index_of(s)
    }

    /// Index of a state known to be valid.
    pub fn index(&self, s: &SystemState) -> usize {
        self.index_of(s)
            .unwrap_or_else(|| panic!("state {s} is outside the state space"))
    }
}

/// Free-function form of [`StateSpace::new`].
pub fn enumerate_states(cfg: &EnvConfig) -> StateSpace {
    StateSpace::new(cfg)
}

/// Deterministic policy stored as one action per state of a [`StateSpace`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TabularPolicy {
    indexer: StateIndexer,
    actions: Vec<Action>,
}

impl TabularPolicy {
    pub fn new(space: &StateSpace, actions: Vec<Action>) -> Self {
        assert_eq!(actions.len(), space.len(), "one action per state");
        Self {
            indexer: space.indexer(),
            actions,
        }
    }

    /// Builds a table by asking `f` for every state of `space`.
    pub fn from_fn(space: &StateSpace, mut f: impl FnMut(&SystemState) -> Action) -> Self {
        Self::new(space, space.states().iter().map(&mut f).collect())
    }

    /// Action taken in `s`; panics if `s` lies outside the table's space.
    pub fn action_for(&self, s: &SystemState) -> Action {
        let idx = self
            .indexer
            .index_of(s)
            .unwrap_or_else(|| panic!("state {s} is outside the policy table"));
        self.actions[idx]
    }

    pub fn action(&self, idx: usize) -> Action {
        self.actions[idx]
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// First state whose action is not feasible, if any.
    pub fn first_infeasible(&self, space: &StateSpace, cfg: &EnvConfig) -> Option<SystemState> {
        space
            .states()
            .iter()
            .zip(&self.actions)
            .find(|(s, a)| !cfg.feasible_actions(s).contains(**a))
            .map(|(s, _)| *s)
    }
}

/// Argmin over the feasible entries of an action-value row; exact ties go to
/// the earlier action in [`Action::TIE_ORDER`].
pub fn argmin_action(q: &[f64; 3], feasible: ActionSet) -> Action {
    let mut best = Action::Idle;
    let mut best_q = f64::INFINITY;
    for a in Action::TIE_ORDER {
        if feasible.contains(a) && q[a.index()] < best_q {
            best = a;
            best_q = q[a.index()];
        }
    }
    best
}
