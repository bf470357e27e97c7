use eh_aoi::learners::{
    dqn_learn, dqn_td_error, fdpg_learn, gr_learn, td_error_gradient, DqnHyper, FdpgHyper, GrHyper,
    Mlp,
};
use eh_aoi::planner::{evaluate_policy_exact, Mdp, DEFAULT_REFERENCE};
use eh_aoi::policies::Variant;
use eh_aoi::{Action, EhChain, EnvConfig};
use proptest::prelude::*;

/// Largest relative gap between the analytic TD-error gradient and central
/// differences over every parameter of `online`.
fn worst_relative_gap(online: &Mlp, target: &Mlp, s: &[f64], a: Action, next: &[f64], cost: f64, gamma: f64) -> f64 {
    let all = Action::ALL.into_iter().collect();
    let (_, grad) = td_error_gradient(online, target, s, a, next, all, cost, gamma);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (i, g) in grad.iter().enumerate() {
        let mut plus = online.clone();
        plus.params_mut()[i] += h;
        let mut minus = online.clone();
        minus.params_mut()[i] -= h;
        let fd = (dqn_td_error(&plus, target, s, a, next, all, cost, gamma)
            - dqn_td_error(&minus, target, s, a, next, all, cost, gamma))
            / (2.0 * h);
        let scale = g.abs().max(fd.abs());
        let gap = if scale < 1e-9 { (g - fd).abs() } else { (g - fd).abs() / scale };
        worst = worst.max(gap);
    }
    worst
}

#[test]
fn td_gradient_matches_finite_differences_on_toy_network() {
    // 2 inputs, 1 hidden unit, 3 outputs: 5 weights plus 4 biases.
    let online = Mlp::from_params(2, 1, 3, vec![0.7, -0.4, 0.3, 1.2, -0.8, 0.5, 0.1, -0.2, 0.05]);
    let target = Mlp::from_params(2, 1, 3, vec![0.2, 0.9, -0.1, -0.5, 0.4, 1.1, 0.3, 0.0, -0.3]);
    let s = [0.8, 0.25];
    let next = [0.1, 0.9];
    for a in Action::ALL {
        let gap = worst_relative_gap(&online, &target, &s, a, &next, 3.0, 0.99);
        assert!(gap < 1e-4, "{a}: {gap}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn td_gradient_matches_finite_differences(
        w in proptest::collection::vec(-1.0f64..1.0, 9),
        t in proptest::collection::vec(-1.0f64..1.0, 9),
        s0 in 0.0f64..1.0, s1 in 0.0f64..1.0,
        cost in 0.0f64..40.0,
        k in 0usize..3,
    ) {
        let online = Mlp::from_params(2, 1, 3, w.clone());
        let s = [s0, s1];
        // Stay away from the rectifier's kink, where the derivative is undefined.
        let pre = w[0] * s0 + w[1] * s1 + w[2];
        prop_assume!(pre.abs() > 1e-3);
        let target = Mlp::from_params(2, 1, 3, t);
        let gap = worst_relative_gap(&online, &target, &s, Action::ALL[k], &[0.5, 0.5], cost, 0.99);
        prop_assert!(gap < 1e-4, "{}", gap);
    }
}

fn dry() -> EnvConfig {
    EnvConfig::baseline().with_eh(EhChain::no_energy(2).unwrap())
}

#[test]
fn learners_without_energy_sit_at_the_cap() {
    let cfg = dry();
    let (_, gr) = gr_learn(&cfg, 20_000, 1, GrHyper::default());
    assert!((gr.final_running_average() - 40.0).abs() < 0.4);
    for variant in [Variant::Single, Variant::Double] {
        let (table, trace) = fdpg_learn(&cfg, 200, 1, FdpgHyper::default(), variant);
        let mdp = Mdp::new(&cfg);
        let p = mdp.tabulate(|s| table.action(s));
        assert!((evaluate_policy_exact(&p, &cfg).gain - 40.0).abs() < 1e-6);
        assert_eq!(trace.len(), 200 * 2 * FdpgHyper::default().rollout);
    }
    let (p, trace) = dqn_learn(&cfg, 2, 1, DqnHyper::default());
    // States with charge are never reached, so only the gain is pinned down.
    assert!((evaluate_policy_exact(&p, &cfg).gain - 40.0).abs() < 1e-6);
    assert_eq!(trace.len(), 2000);
}

#[test]
fn learning_runs_are_reproducible() {
    let cfg = EnvConfig::correlated();
    let (p1, t1) = gr_learn(&cfg, 3000, 9, GrHyper::default());
    let (p2, t2) = gr_learn(&cfg, 3000, 9, GrHyper::default());
    assert_eq!(p1.actions(), p2.actions());
    assert_eq!(t1.inst_aoi(), t2.inst_aoi());
    let (a, ta) = fdpg_learn(&cfg, 20, 9, FdpgHyper::default(), Variant::Double);
    let (b, tb) = fdpg_learn(&cfg, 20, 9, FdpgHyper::default(), Variant::Double);
    assert_eq!(a.t_n(), b.t_n());
    assert_eq!(a.t_x(), b.t_x());
    assert_eq!(ta.inst_aoi(), tb.inst_aoi());
    let (d1, _) = dqn_learn(&cfg, 1, 9, DqnHyper::default());
    let (d2, _) = dqn_learn(&cfg, 1, 9, DqnHyper::default());
    assert_eq!(d1.actions(), d2.actions());
}

#[test]
fn learners_beat_greedy_on_the_baseline() {
    // Few seeds, so only the clear margins are checked here.
    let cfg = EnvConfig::baseline();
    let mdp = Mdp::new(&cfg);
    let r = mdp.space().index(&DEFAULT_REFERENCE);
    let greedy = 5.1327;
    let mut fdpg = 0.0;
    for seed in 0..8 {
        let (table, _) = fdpg_learn(&cfg, 200, seed, FdpgHyper::default(), Variant::Double);
        fdpg += mdp.evaluate(&mdp.tabulate(|s| table.action(s)), r).gain / 8.0;
    }
    assert!(fdpg < greedy - 0.3, "{fdpg}");
    let gr: f64 = (0..8)
        .map(|seed| gr_learn(&cfg, 20_000, seed, GrHyper::default()).1.final_running_average())
        .sum::<f64>()
        / 8.0;
    assert!(gr < greedy, "{gr}");
}
