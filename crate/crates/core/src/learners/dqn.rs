use std::time::Instant;

use rand::seq::index;
use rand::{Rng, RngCore};

use super::{substreams, RunTrace};
use crate::model::{Action, ActionSet, EnvConfig, SystemState};
use crate::planner::{StateSpace, TabularPolicy};

/// `0.5 e^2` inside `[-d, d]`, `d (|e| - d/2)` outside.
pub fn huber_loss(e: f64, d: f64) -> f64 {
    if e.abs() <= d {
        0.5 * e * e
    } else {
        d * (e.abs() - 0.5 * d)
    }
}

/// Derivative of [`huber_loss`] in `e`.
pub fn huber_grad(e: f64, d: f64) -> f64 {
    e.clamp(-d, d)
}

/// Network input: one-hot EH state followed by battery, both ages and the
/// retransmission count, each scaled into `[0, 1]`.
pub fn encode_state(s: &SystemState, cfg: &EnvConfig, out: &mut Vec<f64>) {
    out.clear();
    out.extend((0..cfg.num_eh_states()).map(|e| if e == s.e { 1.0 } else { 0.0 }));
    let scale = |v: usize, max: usize| if max == 0 { 0.0 } else { v as f64 / max as f64 };
    out.push(scale(s.b, cfg.b_max()));
    out.push(scale(s.delta_rx, cfg.delta_max()));
    out.push(scale(s.delta_tx, cfg.delta_max()));
    out.push(scale(s.r, cfg.r_max()));
}

/// One-hidden-layer perceptron with rectified-linear hidden units and a
/// linear output layer. Parameters are stored flat as
/// `[w1 (hidden x in), b1, w2 (out x hidden), b2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    n_in: usize,
    n_hidden: usize,
    n_out: usize,
    params: Vec<f64>,
}

impl Mlp {
    /// Uniform `+-1/sqrt(fan_in)` initialization for weights and biases.
    pub fn new<R: Rng + ?Sized>(n_in: usize, n_hidden: usize, n_out: usize, rng: &mut R) -> Self {
        let mut params = Vec::with_capacity(n_hidden * (n_in + 1) + n_out * (n_hidden + 1));
        let l1 = 1.0 / (n_in as f64).sqrt();
        let l2 = 1.0 / (n_hidden as f64).sqrt();
        params.extend((0..n_hidden * (n_in + 1)).map(|_| rng.gen_range(-l1..l1)));
        params.extend((0..n_out * (n_hidden + 1)).map(|_| rng.gen_range(-l2..l2)));
        Self {
            n_in,
            n_hidden,
            n_out,
            params,
        }
    }

    pub fn from_params(n_in: usize, n_hidden: usize, n_out: usize, params: Vec<f64>) -> Self {
        assert_eq!(params.len(), n_hidden * (n_in + 1) + n_out * (n_hidden + 1));
        Self {
            n_in,
            n_hidden,
            n_out,
            params,
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_outputs(&self) -> usize {
        self.n_out
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        let (w1, rest) = self.params.split_at(self.n_hidden * self.n_in);
        let (b1, rest) = rest.split_at(self.n_hidden);
        let (w2, b2) = rest.split_at(self.n_out * self.n_hidden);
        (w1, b1, w2, b2)
    }

    fn hidden(&self, x: &[f64], h: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_in);
        let (w1, b1, _, _) = self.split();
        for (j, hj) in h.iter_mut().enumerate() {
            let row = &w1[j * self.n_in..(j + 1) * self.n_in];
            let z = b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            *hj = z.max(0.0);
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.n_hidden];
        self.hidden(x, &mut h);
        let (_, _, w2, b2) = self.split();
        (0..self.n_out)
            .map(|k| b2[k] + w2[k * self.n_hidden..(k + 1) * self.n_hidden].iter().zip(&h).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    /// Adds `scale * d out[k] / d params` to `grad` and returns `out[k]`.
    pub fn accumulate_output_grad(&self, x: &[f64], k: usize, scale: f64, grad: &mut [f64]) -> f64 {
        let mut h = vec![0.0; self.n_hidden];
        self.hidden(x, &mut h);
        let (_, _, w2, b2) = self.split();
        let w2k = &w2[k * self.n_hidden..(k + 1) * self.n_hidden];
        let out = b2[k] + w2k.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>();

        let (g1, rest) = grad.split_at_mut(self.n_hidden * self.n_in);
        let (gb1, rest) = rest.split_at_mut(self.n_hidden);
        let (g2, gb2) = rest.split_at_mut(self.n_out * self.n_hidden);
        gb2[k] += scale;
        for j in 0..self.n_hidden {
            g2[k * self.n_hidden + j] += scale * h[j];
            if h[j] > 0.0 {
                let back = scale * w2k[j];
                gb1[j] += back;
                for (g, v) in g1[j * self.n_in..(j + 1) * self.n_in].iter_mut().zip(x) {
                    *g += back * v;
                }
            }
        }
        out
    }
}

/// Highest value among `feasible`, ties resolved in [`Action::TIE_ORDER`].
fn argmax_feasible(q: &[f64], feasible: ActionSet) -> Action {
    let mut best: Option<Action> = None;
    for a in Action::TIE_ORDER {
        if feasible.contains(a) && best.is_none_or(|b| q[a.index()] > q[b.index()]) {
            best = Some(a);
        }
    }
    best.expect("at least one feasible action")
}

/// `Q(s, a) - (-cost + gamma Q_target(s', argmax_a' Q(s', a')))` with the
/// argmax restricted to the actions feasible in `s'`.
#[allow(clippy::too_many_arguments)]
pub fn dqn_td_error(
    online: &Mlp,
    target: &Mlp,
    s: &[f64],
    a: Action,
    next: &[f64],
    next_feasible: ActionSet,
    cost: f64,
    gamma: f64,
) -> f64 {
    online.forward(s)[a.index()] - td_target(online, target, next, next_feasible, cost, gamma)
}

fn td_target(online: &Mlp, target: &Mlp, next: &[f64], next_feasible: ActionSet, cost: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        return -cost;
    }
    let pick = argmax_feasible(&online.forward(next), next_feasible);
    -cost + gamma * target.forward(next)[pick.index()]
}

/// TD error and its gradient with respect to the online parameters. The
/// bootstrap target is held fixed.
#[allow(clippy::too_many_arguments)]
pub fn td_error_gradient(
    online: &Mlp,
    target: &Mlp,
    s: &[f64],
    a: Action,
    next: &[f64],
    next_feasible: ActionSet,
    cost: f64,
    gamma: f64,
) -> (f64, Vec<f64>) {
    let y = td_target(online, target, next, next_feasible, cost, gamma);
    let mut grad = vec![0.0; online.params().len()];
    let q = online.accumulate_output_grad(s, a.index(), 1.0, &mut grad);
    (q - y, grad)
}

/// Adaptive-moment optimizer.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: SystemState,
    pub a: Action,
    pub next: SystemState,
    pub cost: f64,
}

/// Fixed-capacity experience memory; the oldest record is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            capacity,
            items: Vec::with_capacity(capacity),
            head: 0,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
        }
        self.head = (self.head + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Distinct uniformly chosen records.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, rng: &mut R, n: usize) -> impl Iterator<Item = &'a Transition> + 'a {
        index::sample(rng, self.items.len(), n.min(self.items.len()))
            .into_iter()
            .map(move |i| &self.items[i])
    }
}

/// DQN settings. Defaults: discount 0.99, minibatch 32, memory 2000,
/// learning rate 1e-3 on costs scaled by 0.05, exploration from 1 decayed by
/// 0.9 per episode to 0.01, episodes of 1000 slots, 24 hidden units.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, serde::Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnHyper {
    pub gamma: f64,
    pub batch: usize,
    pub replay: usize,
    pub lr: f64,
    pub eps0: f64,
    pub eps_decay: f64,
    pub eps_min: f64,
    /// Episode length; also the target refresh period.
    pub episode_len: usize,
    pub hidden: usize,
    pub huber_d: f64,
    /// Multiplies the AoI before it enters the TD target.
    pub cost_scale: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for DqnHyper {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            batch: 32,
            replay: 2000,
            lr: 1e-3,
            eps0: 1.0,
            eps_decay: 0.9,
            eps_min: 0.01,
            episode_len: 1000,
            hidden: 24,
            huber_d: 1.0,
            cost_scale: 0.05,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl DqnHyper {
    /// Exploration rate after `k` completed episodes.
    pub fn epsilon_after(&self, k: u32) -> f64 {
        (self.eps0 * self.eps_decay.powi(k as i32)).max(self.eps_min)
    }
}

/// Networks, optimizer, memory and counters of one DQN run.
#[derive(Debug, Clone)]
pub struct DqnState {
    pub online: Mlp,
    pub target: Mlp,
    adam: Adam,
    pub buffer: ReplayBuffer,
    epsilon: f64,
    steps: u64,
    episodes: u32,
    target_updates: u64,
    hyper: DqnHyper,
    scratch: (Vec<f64>, Vec<f64>),
}

impl DqnState {
    pub fn new<R: Rng + ?Sized>(cfg: &EnvConfig, hyper: DqnHyper, rng: &mut R) -> Self {
        let n_in = cfg.num_eh_states() + 4;
        let online = Mlp::new(n_in, hyper.hidden, Action::ALL.len(), rng);
        let adam = Adam::new(online.params().len(), hyper.lr, hyper.adam_beta1, hyper.adam_beta2, hyper.adam_eps);
        Self {
            target: online.clone(),
            online,
            adam,
            buffer: ReplayBuffer::new(hyper.replay),
            epsilon: hyper.eps0,
            steps: 0,
            episodes: 0,
            target_updates: 0,
            hyper,
            scratch: (Vec::new(), Vec::new()),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn target_updates(&self) -> u64 {
        self.target_updates
    }

    pub fn greedy_action(&mut self, s: &SystemState, cfg: &EnvConfig) -> Action {
        encode_state(s, cfg, &mut self.scratch.0);
        argmax_feasible(&self.online.forward(&self.scratch.0), cfg.feasible_actions(s))
    }

    /// Epsilon-greedy choice; always consumes two uniforms from `rng`.
    pub fn select<R: Rng + ?Sized>(&mut self, s: &SystemState, cfg: &EnvConfig, rng: &mut R) -> Action {
        let explore = rng.gen::<f64>() < self.epsilon;
        let u: f64 = rng.gen();
        if explore {
            let feasible: Vec<Action> = cfg.feasible_actions(s).iter().collect();
            feasible[((u * feasible.len() as f64) as usize).min(feasible.len() - 1)]
        } else {
            self.greedy_action(s, cfg)
        }
    }

    /// Stores the transition, trains on one minibatch when enough records
    /// exist and refreshes the target every `episode_len` steps.
    pub fn observe<R: Rng + ?Sized>(&mut self, cfg: &EnvConfig, t: Transition, rng: &mut R) {
        self.buffer.push(t);
        let h = self.hyper;
        if self.buffer.len() >= h.batch {
            let mut grad = vec![0.0; self.online.params().len()];
            let (xs, xn) = &mut self.scratch;
            let scale = 1.0 / h.batch as f64;
            for tr in self.buffer.sample(rng, h.batch) {
                encode_state(&tr.s, cfg, xs);
                encode_state(&tr.next, cfg, xn);
                let y = td_target(&self.online, &self.target, xn, cfg.feasible_actions(&tr.next), tr.cost * h.cost_scale, h.gamma);
                let q = self.online.forward(xs)[tr.a.index()];
                let g = huber_grad(q - y, h.huber_d) * scale;
                self.online.accumulate_output_grad(xs, tr.a.index(), g, &mut grad);
            }
            self.adam.step(self.online.params_mut(), &grad);
        }
        self.steps += 1;
        if self.steps.is_multiple_of(h.episode_len as u64) {
            self.target = self.online.clone();
            self.target_updates += 1;
        }
    }

    pub fn end_episode(&mut self) {
        self.episodes += 1;
        self.epsilon = self.hyper.epsilon_after(self.episodes);
    }

    /// Greedy feasible policy of the online network.
    pub fn policy(&self, cfg: &EnvConfig) -> TabularPolicy {
        let space = StateSpace::new(cfg);
        let mut x = Vec::new();
        TabularPolicy::from_fn(&space, |s| {
            encode_state(s, cfg, &mut x);
            argmax_feasible(&self.online.forward(&x), cfg.feasible_actions(s))
        })
    }
}

/// Trains for `episodes` blocks of `episode_len` slots along one continuing
/// trajectory and returns the network's greedy policy.
pub fn dqn_learn(cfg: &EnvConfig, episodes: usize, seed: u64, hyper: DqnHyper) -> (TabularPolicy, RunTrace) {
    let start = Instant::now();
    let (mut env_rng, mut rng) = substreams(seed);
    let mut st = DqnState::new(cfg, hyper, &mut rng);
    let mut trace = RunTrace::with_capacity("dqn", seed, episodes * hyper.episode_len);
    let mut s = cfg.initial_state(&mut env_rng);
    for _ in 0..episodes {
        for _ in 0..hyper.episode_len {
            let a = st.select(&s, cfg, &mut rng);
            let out = cfg.step(&s, a, &mut env_rng).expect("selected action is feasible");
            trace.push(out.cost);
            st.observe(
                cfg,
                Transition {
                    s,
                    a,
                    next: out.next,
                    cost: out.cost as f64,
                },
                &mut rng as &mut dyn RngCore,
            );
            s = out.next;
        }
        st.end_episode();
    }
    trace.elapsed = start.elapsed();
    (st.policy(cfg), trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EhChain;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn huber_examples() {
        assert_eq!(huber_loss(0.5, 1.0), 0.125);
        assert_eq!(huber_loss(2.0, 1.0), 1.5);
        assert_eq!(huber_loss(-2.0, 1.0), 1.5);
        for d in [0.3, 1.0, 4.0] {
            assert_abs_diff_eq!(huber_loss(d, d), 0.5 * d * d, epsilon = 1e-15);
            assert_abs_diff_eq!(d * (d - 0.5 * d), 0.5 * d * d, epsilon = 1e-15);
        }
    }

    #[test]
    fn td_error_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = EnvConfig::baseline();
        let mut net = Mlp::new(6, 4, 3, &mut rng);
        // Zero output weights and biases: Q = 0 everywhere.
        let n1 = 4 * 7;
        net.params_mut()[n1..].iter_mut().for_each(|p| *p = 0.0);
        let x = vec![1.0, 0.0, 0.2, 0.1, 0.1, 0.0];
        let all: ActionSet = Action::ALL.into_iter().collect();
        assert_eq!(dqn_td_error(&net, &net, &x, Action::Idle, &x, all, 5.0, 0.0), 5.0);
        // Constant Q = c0, gamma = 1, cost = 0.
        let n = net.params().len();
        net.params_mut()[n - 3..].iter_mut().for_each(|p| *p = 2.5);
        assert_eq!(dqn_td_error(&net, &net, &x, Action::NewUpdate, &x, all, 0.0, 1.0), 0.0);
        let _ = cfg;
    }

    #[test]
    fn epsilon_schedule() {
        let h = DqnHyper::default();
        assert_eq!(h.epsilon_after(0), 1.0);
        assert_abs_diff_eq!(h.epsilon_after(3), 0.729, epsilon = 1e-15);
        assert_eq!(h.epsilon_after(100), 0.01);
    }

    #[test]
    fn replay_buffer_is_bounded() {
        let mut b = ReplayBuffer::new(2000);
        let s = SystemState::new(0, 0, 1, 1, 0);
        for i in 0..5000 {
            b.push(Transition {
                s,
                a: Action::Idle,
                next: s,
                cost: i as f64,
            });
            assert!(b.len() <= 2000);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let costs: Vec<f64> = b.sample(&mut rng, 32).map(|t| t.cost).collect();
        assert_eq!(costs.len(), 32);
        assert!(costs.iter().all(|&c| c >= 3000.0));
    }

    #[test]
    fn target_refreshes_every_episode() {
        let cfg = EnvConfig::baseline();
        let hyper = DqnHyper {
            episode_len: 50,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut st = DqnState::new(&cfg, hyper, &mut rng);
        let s = SystemState::new(1, 3, 4, 2, 1);
        let mut snapshots = 0;
        let mut last = st.target.clone();
        for step in 1..=200u64 {
            st.observe(&cfg, Transition { s, a: Action::Retransmit, next: s, cost: 4.0 }, &mut rng);
            if st.target != last {
                snapshots += 1;
                assert_eq!(step % 50, 0);
                last = st.target.clone();
            }
        }
        assert_eq!(snapshots, 4);
        assert_eq!(st.target_updates(), 4);
    }

    #[test]
    fn no_energy_policy_idles() {
        let cfg = EnvConfig::baseline().with_eh(EhChain::no_energy(2).unwrap());
        let (policy, trace) = dqn_learn(&cfg, 3, 5, DqnHyper::default());
        assert_eq!(trace.len(), 3000);
        let s = SystemState::new(0, 0, 40, 40, 0);
        assert_eq!(policy.action_for(&s), Action::Idle);
    }
}
