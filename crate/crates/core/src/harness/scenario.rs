use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::learners::{dqn_learn, fdpg_learn, gr_learn, LearnerConfig, RunTrace};
use crate::model::EnvConfig;
use crate::planner::{Mdp, RviOptions, TabularPolicy, DEFAULT_REFERENCE};
use crate::policies::{greedy_action, Variant};

use super::simulate::simulate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Rvi,
    Pi,
    Greedy,
    Gr,
    FdpgSingle,
    FdpgDouble,
    Dqn,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Rvi,
        Algorithm::Pi,
        Algorithm::Greedy,
        Algorithm::Gr,
        Algorithm::FdpgSingle,
        Algorithm::FdpgDouble,
        Algorithm::Dqn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Rvi => "rvi",
            Algorithm::Pi => "pi",
            Algorithm::Greedy => "greedy",
            Algorithm::Gr => "gr",
            Algorithm::FdpgSingle => "fdpg-single",
            Algorithm::FdpgDouble => "fdpg-double",
            Algorithm::Dqn => "dqn",
        }
    }

    pub fn is_learner(self) -> bool {
        matches!(
            self,
            Algorithm::Gr | Algorithm::FdpgSingle | Algorithm::FdpgDouble | Algorithm::Dqn
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Domain(format!("unknown algorithm `{s}`")))
    }
}

/// One experiment: an environment, an algorithm and a seeded run set.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub cfg: EnvConfig,
    pub algorithm: Algorithm,
    pub runs: usize,
    /// Environment steps per run (learning budget for the learners,
    /// simulation length for fixed policies).
    pub horizon: usize,
    pub seed_base: u64,
    pub learners: LearnerConfig,
}

impl Scenario {
    pub fn new(name: impl Into<String>, cfg: EnvConfig, algorithm: Algorithm) -> Self {
        Self {
            name: name.into(),
            cfg,
            algorithm,
            runs: super::DEFAULT_RUNS,
            horizon: super::DEFAULT_HORIZON,
            seed_base: 0,
            learners: LearnerConfig::default(),
        }
    }

    pub fn with_runs(mut self, runs: usize) -> Self {
        self.runs = runs;
        self
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_seed(mut self, seed_base: u64) -> Self {
        self.seed_base = seed_base;
        self
    }

    pub fn with_learners(mut self, learners: LearnerConfig) -> Self {
        self.learners = learners;
        self
    }

    /// Seed of run `i`.
    pub fn run_seed(&self, i: usize) -> u64 {
        self.seed_base.wrapping_add(i as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::InvalidConfig("scenario name is empty".into()));
        }
        if self.runs == 0 {
            return Err(Error::InvalidConfig(format!("scenario {}: runs must be >= 1", self.name)));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig(format!("scenario {}: horizon must be >= 1", self.name)));
        }
        self.learners.fdpg.validate()
    }
}

/// Outcome of one seeded run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub trace: RunTrace,
    /// The policy the run produced (learners) or followed (planners, greedy).
    pub policy: Option<TabularPolicy>,
}

impl RunResult {
    /// Exact average AoI of the returned policy when one was measured,
    /// otherwise the final running average of the trace.
    pub fn score(&self) -> f64 {
        self.trace
            .evaluated_aoi
            .unwrap_or_else(|| self.trace.final_running_average())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub algorithm: String,
    pub runs: usize,
    pub horizon: usize,
    /// Mean and standard error of [`RunResult::score`].
    pub mean: f64,
    pub stderr: f64,
    /// Mean and standard error of the final running averages.
    pub mean_running: f64,
    pub stderr_running: f64,
    /// `exact` when every run reported a policy gain, `running` otherwise.
    pub metric: &'static str,
    pub partial: bool,
}

pub const SUMMARY_CSV_HEADER: [&str; 10] = [
    "scenario",
    "algorithm",
    "runs",
    "horizon",
    "mean_aoi",
    "stderr_aoi",
    "mean_running_avg",
    "stderr_running_avg",
    "metric",
    "status",
];

impl SummaryRow {
    pub fn write_header<W: Write>(out: &mut csv::Writer<W>) -> Result<()> {
        out.write_record(SUMMARY_CSV_HEADER)?;
        Ok(())
    }

    pub fn write<W: Write>(&self, out: &mut csv::Writer<W>) -> Result<()> {
        out.write_record([
            self.scenario.clone(),
            self.algorithm.clone(),
            self.runs.to_string(),
            self.horizon.to_string(),
            self.mean.to_string(),
            self.stderr.to_string(),
            self.mean_running.to_string(),
            self.stderr_running.to_string(),
            self.metric.to_string(),
            if self.partial { "partial" } else { "complete" }.to_string(),
        ])?;
        Ok(())
    }
}

/// Sample mean and standard error of the mean; the error is 0 for one value.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub scenario: String,
    pub runs: Vec<RunResult>,
    pub summary: SummaryRow,
    /// Error of the first failing run; the runs before it are kept.
    pub failure: Option<String>,
}

pub const RUNS_CSV_HEADER: [&str; 6] = [
    "scenario",
    "algorithm",
    "seed",
    "steps",
    "final_running_avg",
    "evaluated_aoi",
];

impl ScenarioResult {
    /// Writes every trace, keeping every `every`-th step.
    pub fn write_traces<W: Write>(&self, out: &mut csv::Writer<W>, header: bool, every: usize) -> Result<()> {
        for (i, r) in self.runs.iter().enumerate() {
            r.trace.write_csv_every(out, header && i == 0, every)?;
        }
        if header && self.runs.is_empty() {
            out.write_record(crate::learners::TRACE_CSV_HEADER)?;
        }
        Ok(())
    }

    /// One row per run with its final running average and measured gain.
    pub fn write_runs<W: Write>(&self, out: &mut csv::Writer<W>, header: bool) -> Result<()> {
        if header {
            out.write_record(RUNS_CSV_HEADER)?;
        }
        for r in &self.runs {
            let t = &r.trace;
            out.write_record([
                t.scenario.clone(),
                t.algorithm.clone(),
                t.seed.to_string(),
                t.len().to_string(),
                t.final_running_average().to_string(),
                t.evaluated_aoi.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        Ok(())
    }
}

/// Shared per-scenario state: the MDP (for exact evaluation) and, for the
/// planners and greedy, the fixed policy with its gain.
struct Prepared {
    mdp: Mdp,
    fixed: Option<(TabularPolicy, f64)>,
    label: String,
}

fn prepare(sc: &Scenario) -> Result<Prepared> {
    let mdp = Mdp::new(&sc.cfg);
    let label = sc.algorithm.to_string();
    let fixed = match sc.algorithm {
        Algorithm::Rvi => {
            let sol = mdp.rvi(&RviOptions::default())?;
            Some((sol.policy, sol.values.gain))
        }
        Algorithm::Pi => {
            let res = mdp.policy_iteration(mdp.space().index(&DEFAULT_REFERENCE));
            Some((res.policy, res.gain))
        }
        Algorithm::Greedy => {
            let cfg = &sc.cfg;
            let policy = mdp.tabulate(|s| greedy_action(s, cfg));
            let gain = mdp.average_aoi(&policy).gain;
            Some((policy, gain))
        }
        _ => None,
    };
    Ok(Prepared {
        mdp,
        fixed,
        label,
    })
}

fn run_one(sc: &Scenario, prep: &Prepared, seed: u64) -> Result<RunResult> {
    let cfg = &sc.cfg;
    let hyper = &sc.learners;
    let exact = |p: &TabularPolicy| prep.mdp.average_aoi(p).gain;
    let (policy, mut trace) = match (sc.algorithm, &prep.fixed) {
        (_, Some((policy, gain))) => {
            let mut trace = simulate(policy, cfg, sc.horizon, seed);
            trace.algorithm = prep.label.clone();
            trace.evaluated_aoi = Some(*gain);
            (policy.clone(), trace)
        }
        (Algorithm::Gr, None) => gr_learn(cfg, sc.horizon, seed, hyper.gr),
        (Algorithm::FdpgSingle | Algorithm::FdpgDouble, None) => {
            let variant = if sc.algorithm == Algorithm::FdpgSingle {
                Variant::Single
            } else {
                Variant::Double
            };
            // Each iteration spends two rollouts.
            let iterations = (sc.horizon / (2 * hyper.fdpg.rollout)).max(1);
            let (table, mut trace) = fdpg_learn(cfg, iterations, seed, hyper.fdpg, variant);
            let policy = prep.mdp.tabulate(|s| table.action(s));
            trace.evaluated_aoi = Some(exact(&policy));
            (policy, trace)
        }
        (Algorithm::Dqn, None) => {
            let episodes = sc.horizon.div_ceil(hyper.dqn.episode_len).max(1);
            let (policy, mut trace) = dqn_learn(cfg, episodes, seed, hyper.dqn);
            trace.evaluated_aoi = Some(exact(&policy));
            (policy, trace)
        }
        (a, None) => unreachable!("{a} is prepared with a fixed policy"),
    };
    if trace.diverged {
        log::warn!("{} seed {seed}: parameters were clipped", sc.algorithm);
    }
    trace.scenario = sc.name.clone();
    Ok(RunResult {
        trace,
        policy: Some(policy),
    })
}

/// Executes `sc.runs` independent runs (run `i` uses seed `seed_base + i`) on
/// the current rayon pool and merges them in seed order.
pub fn run_scenario(sc: &Scenario) -> Result<ScenarioResult> {
    sc.validate()?;
    let prep = prepare(sc)?;
    execute(sc, &prep)
}

/// Simulates a given tabular policy under the scenario's run set; the
/// scenario's algorithm is ignored and `label` names the policy instead.
pub fn run_policy(sc: &Scenario, policy: TabularPolicy, label: &str) -> Result<ScenarioResult> {
    sc.validate()?;
    let mdp = Mdp::new(&sc.cfg);
    if let Some(s) = policy.first_infeasible(mdp.space(), &sc.cfg) {
        return Err(Error::InvalidConfig(format!("policy {label} is infeasible in state {s}")));
    }
    let gain = mdp.average_aoi(&policy).gain;
    let prep = Prepared {
        mdp,
        fixed: Some((policy, gain)),
        label: label.to_string(),
    };
    execute(sc, &prep)
}

fn execute(sc: &Scenario, prep: &Prepared) -> Result<ScenarioResult> {
    let outcomes: Vec<Result<RunResult>> = (0..sc.runs)
        .into_par_iter()
        .map(|i| run_one(sc, prep, sc.run_seed(i)))
        .collect();
    let mut runs = Vec::with_capacity(sc.runs);
    let mut failure = None;
    for o in outcomes {
        match o {
            Ok(r) => runs.push(r),
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        }
    }
    let summary = summarize(sc, &prep.label, &runs, failure.is_some());
    Ok(ScenarioResult {
        scenario: sc.name.clone(),
        runs,
        summary,
        failure,
    })
}

fn summarize(sc: &Scenario, label: &str, runs: &[RunResult], partial: bool) -> SummaryRow {
    let scores: Vec<f64> = runs.iter().map(RunResult::score).collect();
    let running: Vec<f64> = runs.iter().map(|r| r.trace.final_running_average()).collect();
    let (mean, stderr) = mean_stderr(&scores);
    let (mean_running, stderr_running) = mean_stderr(&running);
    let exact = !runs.is_empty() && runs.iter().all(|r| r.trace.evaluated_aoi.is_some());
    SummaryRow {
        scenario: sc.name.clone(),
        algorithm: label.to_string(),
        runs: runs.len(),
        horizon: sc.horizon,
        mean,
        stderr,
        mean_running,
        stderr_running,
        metric: if exact { "exact" } else { "running" },
        partial,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EhChain;

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert!("sarsa".parse::<Algorithm>().is_err());
    }

    #[test]
    fn mean_and_stderr() {
        let (m, se) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // sample variance 5/3, divided by 4
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_stderr(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn greedy_without_energy_sits_at_cap() {
        let cfg = EnvConfig::baseline()
            .with_eh(EhChain::no_energy(2).unwrap())
            .with_delta_max(10)
            .unwrap();
        let sc = Scenario::new("dry", cfg, Algorithm::Greedy)
            .with_runs(3)
            .with_horizon(100 * 10);
        let res = run_scenario(&sc).unwrap();
        assert!((res.summary.mean - 10.0).abs() < 1e-9);
        assert_eq!(res.summary.stderr, 0.0);
        assert_eq!(res.summary.metric, "exact");
        assert!(res.failure.is_none());
    }

    #[test]
    fn zero_runs_rejected() {
        let sc = Scenario::new("x", EnvConfig::baseline(), Algorithm::Greedy).with_runs(0);
        assert!(matches!(run_scenario(&sc), Err(Error::InvalidConfig(_))));
    }
}
