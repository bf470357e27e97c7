use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::model::SystemState;

use super::kernel::Mdp;
use super::space::TabularPolicy;

const CLASS_TOL: f64 = 1e-11;
const TRANSIENT_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 2_000_000;

/// Long-run average AoI of a policy from the initial-state distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct AverageAoi {
    pub gain: f64,
    /// Closed classes reachable from the initial states, with their gains.
    pub classes: Vec<(Vec<usize>, f64)>,
}

impl Mdp {
    /// Initial states (`b = 0`, fresh AoI, nothing pending) weighted by the
    /// stationary harvesting distribution.
    pub fn initial_distribution(&self) -> Vec<(usize, f64)> {
        self.cfg()
            .eh()
            .stationary()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(e, &p)| (self.space().index(&SystemState::new(e, 0, 1, 1, 0)), p))
            .collect()
    }

    /// Expected long-run average AoI when `policy` starts from
    /// [`initial_distribution`](Self::initial_distribution).
    ///
    /// Unlike [`evaluate`](Self::evaluate) this does not assume a single
    /// recurrent class: every closed class reachable from the start gets its
    /// own gain, weighted by the probability of ending up in it.
    pub fn average_aoi(&self, policy: &TabularPolicy) -> AverageAoi {
        assert_eq!(policy.len(), self.len(), "policy does not match the state space");
        let succ = |s: usize| {
            self.row(s, policy.action(s))
                .filter(|&(_, p)| p > 0.0)
        };

        // Reachable subgraph.
        let n = self.len();
        let mut local = vec![usize::MAX; n];
        let mut graph: DiGraph<usize, ()> = DiGraph::new();
        let mut stack: Vec<usize> = Vec::new();
        for (s, _) in self.initial_distribution() {
            if local[s] == usize::MAX {
                local[s] = graph.add_node(s).index();
                stack.push(s);
            }
        }
        while let Some(s) = stack.pop() {
            for (t, _) in succ(s) {
                if local[t] == usize::MAX {
                    local[t] = graph.add_node(t).index();
                    stack.push(t);
                }
                graph.add_edge(NodeIndex::new(local[s]), NodeIndex::new(local[t]), ());
            }
        }

        // Components come out sinks first, so every successor component of
        // a transient one is already solved when it is reached.
        let comps = tarjan_scc(&graph);
        let mut comp_of = vec![usize::MAX; n];
        for (c, members) in comps.iter().enumerate() {
            for m in members {
                comp_of[graph[*m]] = c;
            }
        }
        let mut value = vec![f64::NAN; n];
        let mut classes = Vec::new();
        for (c, members) in comps.iter().enumerate() {
            let states: Vec<usize> = members.iter().map(|m| graph[*m]).collect();
            let closed = states.iter().all(|&s| succ(s).all(|(t, _)| comp_of[t] == c));
            if closed {
                let g = self.class_gain(policy, &states);
                for &s in &states {
                    value[s] = g;
                }
                classes.push((states, g));
            } else {
                self.solve_transient(policy, &states, &mut value);
            }
        }
        let gain = self
            .initial_distribution()
            .iter()
            .map(|&(s, p)| p * value[s])
            .sum();
        AverageAoi { gain, classes }
    }

    /// Gain of a closed class by lazy relative evaluation, stopped on the span
    /// of the one-step differences (which brackets the gain).
    fn class_gain(&self, policy: &TabularPolicy, states: &[usize]) -> f64 {
        if states.len() == 1 {
            return self.cost(states[0]);
        }
        let mut h = vec![0.0; self.len()];
        let mut next = vec![0.0; states.len()];
        for _ in 0..MAX_SWEEPS {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (k, &s) in states.iter().enumerate() {
                let w = self.cost(s) + self.expected(s, policy.action(s), &h);
                let d = w - h[s];
                lo = lo.min(d);
                hi = hi.max(d);
                next[k] = 0.5 * (h[s] + w);
            }
            if hi - lo < CLASS_TOL {
                return 0.5 * (lo + hi);
            }
            let base = next[0];
            for (k, &s) in states.iter().enumerate() {
                h[s] = next[k] - base;
            }
        }
        log::warn!("class gain did not settle within {MAX_SWEEPS} sweeps");
        f64::NAN
    }

    /// `v(s) = sum_t P(t | s) v(t)` on a transient component, by Gauss-Seidel.
    fn solve_transient(
        &self,
        policy: &TabularPolicy,
        states: &[usize],
        value: &mut [f64],
    ) {
        for &s in states {
            value[s] = 0.0;
        }
        for _ in 0..MAX_SWEEPS {
            let mut change: f64 = 0.0;
            for &s in states {
                let v: f64 = self
                    .row(s, policy.action(s))
                    .map(|(t, p)| p * value[t])
                    .sum();
                change = change.max((v - value[s]).abs());
                value[s] = v;
            }
            if change < TRANSIENT_TOL {
                return;
            }
        }
        log::warn!("transient values did not settle within {MAX_SWEEPS} sweeps");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Action, EnvConfig};
    use crate::planner::{RviOptions, DEFAULT_REFERENCE};
    use crate::policies::greedy_action;

    #[test]
    fn unichain_policies_agree_with_evaluate() {
        let cfg = EnvConfig::correlated().with_delta_max(20).unwrap();
        let mdp = Mdp::new(&cfg);
        let r = mdp.space().index(&DEFAULT_REFERENCE);
        let sol = mdp.rvi(&RviOptions::default()).unwrap();
        let greedy = mdp.tabulate(|s| greedy_action(s, &cfg));
        for p in [&sol.policy, &greedy] {
            let avg = mdp.average_aoi(p);
            assert_eq!(avg.classes.len(), 1);
            assert!((avg.gain - mdp.evaluate(p, r).gain).abs() < 1e-8);
        }
    }

    #[test]
    fn idling_forever_sits_at_the_cap() {
        let cfg = EnvConfig::baseline().with_delta_max(10).unwrap();
        let mdp = Mdp::new(&cfg);
        let avg = mdp.average_aoi(&mdp.tabulate(|_| Action::Idle));
        assert!((avg.gain - 10.0).abs() < 1e-12);
    }

    #[test]
    fn getting_stuck_at_the_cap_absorbs_everything() {
        // Greedy, except that it never leaves the state where both ages are capped.
        let cfg = EnvConfig::baseline().with_delta_max(6).unwrap();
        let mdp = Mdp::new(&cfg);
        let p = mdp.tabulate(|s| {
            if s.delta_rx == 6 && s.delta_tx == 6 {
                Action::Idle
            } else {
                greedy_action(s, &cfg)
            }
        });
        let avg = mdp.average_aoi(&p);
        assert_eq!(avg.classes.len(), 1);
        assert!((avg.gain - 6.0).abs() < 1e-9, "{}", avg.gain);
    }

    #[test]
    fn random_policies_match_simulation() {
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;
        let cfg = EnvConfig::correlated().with_delta_max(4).unwrap().with_b_max(2).unwrap();
        let mdp = Mdp::new(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..6 {
            let actions: Vec<Action> = (0..mdp.len())
                .map(|s| {
                    let f: Vec<Action> = mdp.feasible(s).iter().collect();
                    f[rng.gen_range(0..f.len())]
                })
                .collect();
            let p = TabularPolicy::new(mdp.space(), actions);
            let avg = mdp.average_aoi(&p);
            let runs = 200;
            let horizon = 3000;
            let mut finals = Vec::with_capacity(runs);
            for _ in 0..runs {
                let mut s = cfg.initial_state(&mut rng);
                let mut total = 0usize;
                for _ in 0..horizon {
                    let out = cfg.step(&s, p.action_for(&s), &mut rng).unwrap();
                    total += out.cost;
                    s = out.next;
                }
                finals.push(total as f64 / horizon as f64);
            }
            let mean = finals.iter().sum::<f64>() / runs as f64;
            let var = finals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
            let se = (var / runs as f64).sqrt();
            assert!((mean - avg.gain).abs() < 4.0 * se + 0.01, "{mean} vs {} (se {se})", avg.gain);
        }
    }
}
