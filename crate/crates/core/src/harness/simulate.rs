use crate::learners::{substreams, RunTrace};
use crate::model::EnvConfig;
use crate::policies::Policy;

/// Runs `policy` for `horizon` slots from the usual initial state.
///
/// Environment noise and the policy's own randomness come from separate
/// substreams of `seed`, as in the learners.
pub fn simulate<P: Policy + ?Sized>(policy: &P, cfg: &EnvConfig, horizon: usize, seed: u64) -> RunTrace {
    let (mut env_rng, mut policy_rng) = substreams(seed);
    let mut trace = RunTrace::with_capacity(policy.name(), seed, horizon);
    let mut s = cfg.initial_state(&mut env_rng);
    for _ in 0..horizon {
        let a = policy.act(&s, cfg, &mut policy_rng);
        let out = cfg
            .step(&s, a, &mut env_rng)
            .unwrap_or_else(|e| panic!("policy {} chose an infeasible action: {e}", policy.name()));
        trace.push(out.cost);
        s = out.next;
    }
    trace
}

/// Batch-means estimate of a long-run average: the sample is cut into
/// `batches` equal consecutive blocks (any remainder is dropped) and the
/// block means are treated as independent. Returns the mean and its
/// standard error.
pub fn batch_means(samples: &[u32], batches: usize) -> (f64, f64) {
    assert!(batches >= 2, "need at least two batches");
    let size = samples.len() / batches;
    assert!(size > 0, "fewer samples than batches");
    let means: Vec<f64> = samples
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().map(|&x| f64::from(x)).sum::<f64>() / size as f64)
        .collect();
    super::mean_stderr(&means)
}
