use crate::model::{transition_distribution, Action, ActionSet, EnvConfig, SystemState};

use super::space::{StateSpace, TabularPolicy};

/// The MDP in array form: state space, feasibility masks and the sparse
/// transition rows `P(. | s, a)` for every feasible pair.
#[derive(Debug, Clone)]
pub struct Mdp {
    cfg: EnvConfig,
    space: StateSpace,
    feasible: Vec<ActionSet>,
    /// Row `s * 3 + a` spans `offsets[s * 3 + a]..offsets[s * 3 + a + 1]`.
    offsets: Vec<usize>,
    targets: Vec<u32>,
    probs: Vec<f64>,
}

impl Mdp {
    pub fn new(cfg: &EnvConfig) -> Self {
        let space = StateSpace::new(cfg);
        let n = space.len();
        let mut feasible = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(3 * n + 1);
        let mut targets = Vec::new();
        let mut probs = Vec::new();
        offsets.push(0);
        for s in space.states() {
            let set = cfg.feasible_actions(s);
            feasible.push(set);
            for a in Action::ALL {
                if set.contains(a) {
                    let outcomes = transition_distribution(s, a, cfg)
                        .expect("feasible action has a distribution");
                    for o in outcomes {
                        targets.push(space.index(&o.next) as u32);
                        probs.push(o.prob);
                    }
                }
                offsets.push(targets.len());
            }
        }
        Self {
            cfg: cfg.clone(),
            space,
            feasible,
            offsets,
            targets,
            probs,
        }
    }

    pub fn cfg(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn feasible(&self, s: usize) -> ActionSet {
        self.feasible[s]
    }

    pub fn cost(&self, s: usize) -> f64 {
        self.space.state(s).delta_rx as f64
    }

    pub fn state(&self, s: usize) -> SystemState {
        self.space.state(s)
    }

    /// Sparse row of `P(. | s, a)`; empty when `a` is infeasible.
    pub fn row(&self, s: usize, a: Action) -> impl Iterator<Item = (usize, f64)> + '_ {
        let k = s * 3 + a.index();
        let range = self.offsets[k]..self.offsets[k + 1];
        self.targets[range.clone()]
            .iter()
            .zip(&self.probs[range])
            .map(|(&t, &p)| (t as usize, p))
    }

    /// `E[h(s') | s, a]`.
    pub fn expected(&self, s: usize, a: Action, h: &[f64]) -> f64 {
        self.row(s, a).map(|(t, p)| p * h[t]).sum()
    }

    /// `Q(s, .) = delta_rx + E[h(s') | s, .]`, with `+inf` for infeasible actions.
    pub fn q_row(&self, s: usize, h: &[f64]) -> [f64; 3] {
        let c = self.cost(s);
        let set = self.feasible[s];
        let mut q = [f64::INFINITY; 3];
        for a in set.iter() {
            q[a.index()] = c + self.expected(s, a, h);
        }
        q
    }

    pub fn q_table(&self, h: &[f64]) -> Vec<[f64; 3]> {
        (0..self.len()).map(|s| self.q_row(s, h)).collect()
    }

    /// Tabulates an arbitrary state-to-action rule over this state space.
    pub fn tabulate(&self, f: impl FnMut(&SystemState) -> Action) -> TabularPolicy {
        TabularPolicy::from_fn(&self.space, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn every_row_is_a_distribution() {
        let cfg = EnvConfig::correlated().with_delta_max(12).unwrap();
        let mdp = Mdp::new(&cfg);
        for s in 0..mdp.len() {
            for a in mdp.feasible(s).iter() {
                let total: f64 = mdp.row(s, a).map(|(_, p)| p).sum();
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
            }
            assert_eq!(mdp.row(s, Action::Retransmit).count() > 0, mdp.feasible(s).contains(Action::Retransmit));
        }
    }
}
