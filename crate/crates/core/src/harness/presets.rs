use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::learners::LearnerConfig;
use crate::model::{EhChain, EnvConfig, HarqModel};
use crate::planner::{verify_threshold_structure, write_policy_csv, Mdp, PolicyRow, RviOptions};

use super::heatmap::{export_policy_heatmap, write_heatmaps};
use super::scenario::{run_scenario, Algorithm, Scenario, ScenarioResult, SummaryRow};
use super::sweep::{run_sweep, SweepParam, SweepSpec, SweepTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Fig2,
        Preset::Fig3,
        Preset::Fig4,
        Preset::Fig5,
        Preset::Fig6,
        Preset::Fig7,
        Preset::Fig8,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::Fig7 => "fig7",
            Preset::Fig8 => "fig8",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Domain(format!("unknown preset `{s}` (expected fig2..fig8)")))
    }
}

/// Settings shared by every preset.
#[derive(Debug, Clone)]
pub struct PresetOptions {
    /// Environment the preset starts from; each preset changes only the
    /// parameters its experiment varies.
    pub base: EnvConfig,
    pub learners: LearnerConfig,
    pub runs: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Keep every n-th step in `traces.csv`.
    pub trace_every: usize,
}

impl Default for PresetOptions {
    fn default() -> Self {
        Self {
            base: EnvConfig::baseline(),
            learners: LearnerConfig::default(),
            runs: super::DEFAULT_RUNS,
            horizon: super::DEFAULT_HORIZON,
            seed: 0,
            trace_every: 100,
        }
    }
}

/// A named pass/fail observation made while running a preset.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct PresetReport {
    pub dir: PathBuf,
    pub summaries: Vec<SummaryRow>,
    pub sweeps: Vec<SweepTable>,
    pub checks: Vec<Check>,
}

/// Correlated harvesting with `p(0|0) = p(1|1) = 0.7`.
pub fn correlated_eh() -> EhChain {
    EhChain::symmetric(0.7).expect("valid EH chain")
}

/// Plain ARQ: every attempt fails with probability 0.5, whatever the round.
pub fn arq_config(base: &EnvConfig) -> Result<EnvConfig> {
    Ok(base
        .clone()
        .with_harq(HarqModel::arq(0.5, base.r_max())?)
        .with_eh(correlated_eh()))
}

pub const LEARNING_SET: [Algorithm; 6] = [
    Algorithm::Greedy,
    Algorithm::Gr,
    Algorithm::Dqn,
    Algorithm::FdpgSingle,
    Algorithm::FdpgDouble,
    Algorithm::Rvi,
];

/// Runs one preset and writes its files under `out/<preset>/`.
pub fn run_preset(preset: Preset, opts: &PresetOptions, out: &Path) -> Result<PresetReport> {
    let dir = out.join(preset.as_str());
    std::fs::create_dir_all(&dir)?;
    let mut report = PresetReport {
        dir: dir.clone(),
        ..Default::default()
    };
    let scenario = |name: &str, cfg: &EnvConfig, a: Algorithm| {
        Scenario::new(format!("{name}-{a}"), cfg.clone(), a)
            .with_runs(opts.runs)
            .with_horizon(opts.horizon)
            .with_seed(opts.seed)
            .with_learners(opts.learners)
    };
    match preset {
        Preset::Fig2 => solve_and_map(&opts.base, &dir, &mut report)?,
        Preset::Fig5 => solve_and_map(&opts.base.clone().with_eh(correlated_eh()), &dir, &mut report)?,
        Preset::Fig3 => {
            let rvi = |cfg: &EnvConfig| scenario("fig3", cfg, Algorithm::Rvi).with_runs(1);
            let sweeps = [
                (SweepParam::Pe, vec![0.2, 0.4, 0.6, 0.8], opts.base.clone()),
                (SweepParam::BMax, vec![2.0, 5.0, 10.0, 30.0], opts.base.clone()),
                (SweepParam::Es, vec![0.0, 1.0, 2.0], opts.base.clone()),
                (
                    SweepParam::BMax,
                    vec![30.0, 60.0],
                    opts.base.clone().with_eh(EhChain::iid(0.2)?).with_e_s(0)?,
                ),
            ];
            for (param, values, cfg) in sweeps {
                let table = run_sweep(&SweepSpec::new(param, values, rvi(&cfg)))?;
                let strict = param != SweepParam::BMax;
                let passed = if strict { table.strictly_monotone } else { table.monotone };
                report.checks.push(Check {
                    name: format!("rvi over {param}"),
                    passed,
                    detail: rows_detail(&table),
                });
                report.sweeps.push(table);
            }
            let last = &report.sweeps[3].rows;
            let gap = (last[0].mean - last[1].mean).abs();
            report.checks.push(Check {
                name: "b_max 30 vs 60 at pe=0.2, e_s=0".into(),
                passed: gap < 0.5,
                detail: format!("|difference| = {gap}"),
            });
            write_sweeps(&dir, &report.sweeps)?;
        }
        Preset::Fig4 | Preset::Fig7 | Preset::Fig6 => {
            let (cfg, algorithms): (EnvConfig, &[Algorithm]) = match preset {
                Preset::Fig4 => (opts.base.clone(), &LEARNING_SET),
                Preset::Fig7 => (opts.base.clone().with_eh(correlated_eh()), &LEARNING_SET),
                _ => (
                    arq_config(&opts.base)?,
                    &[Algorithm::Greedy, Algorithm::FdpgSingle, Algorithm::FdpgDouble, Algorithm::Rvi],
                ),
            };
            let mut results = Vec::new();
            for &a in algorithms {
                results.push(run_scenario(&scenario(preset.as_str(), &cfg, a))?);
            }
            write_results(&dir, &results, opts.trace_every)?;
            report.summaries = results.into_iter().map(|r| r.summary).collect();
            let mean = |a: Algorithm| report.summaries.iter().find(|s| s.algorithm == a.as_str()).map(|s| s.mean);
            if preset == Preset::Fig6 {
                let single = report.summaries.iter().find(|s| s.algorithm == Algorithm::FdpgSingle.as_str());
                let double = report.summaries.iter().find(|s| s.algorithm == Algorithm::FdpgDouble.as_str());
                if let (Some(s), Some(d)) = (single, double) {
                    let pooled = (s.stderr.powi(2) + d.stderr.powi(2)).sqrt();
                    report.checks.push(Check {
                        name: "double threshold beats single by 2 pooled SE".into(),
                        passed: s.mean - d.mean > 2.0 * pooled,
                        detail: format!("single {} double {} pooled SE {pooled}", s.mean, d.mean),
                    });
                }
            } else {
                let order = [
                    Algorithm::Greedy,
                    Algorithm::Gr,
                    Algorithm::Dqn,
                    Algorithm::FdpgDouble,
                    Algorithm::Rvi,
                ];
                let means: Vec<f64> = order.iter().filter_map(|&a| mean(a)).collect();
                let passed = means.len() == order.len() && means.windows(2).all(|w| w[0] >= w[1]);
                report.checks.push(Check {
                    name: "greedy >= gr >= dqn >= fdpg-double >= rvi".into(),
                    passed,
                    detail: format!("{means:?}"),
                });
            }
        }
        Preset::Fig8 => {
            let rhos = vec![0.0, 0.2, 0.4, 0.6, 0.8];
            for a in [
                Algorithm::Rvi,
                Algorithm::FdpgSingle,
                Algorithm::FdpgDouble,
                Algorithm::Greedy,
            ] {
                let table = run_sweep(&SweepSpec::new(SweepParam::Rho, rhos.clone(), scenario("fig8", &opts.base, a)))?;
                report.checks.push(Check {
                    name: format!("{a} non-decreasing in rho"),
                    passed: table.monotone,
                    detail: rows_detail(&table),
                });
                report.sweeps.push(table);
            }
            let greedy = &report.sweeps[3].rows;
            for t in &report.sweeps[1..3] {
                let above = greedy.iter().zip(&t.rows).all(|(g, f)| g.mean > f.mean);
                report.checks.push(Check {
                    name: format!("greedy above {} at every rho", t.algorithm),
                    passed: above,
                    detail: String::new(),
                });
            }
            write_sweeps(&dir, &report.sweeps)?;
            let results: Vec<ScenarioResult> = report
                .sweeps
                .iter()
                .flat_map(|t| t.results.iter().cloned())
                .collect();
            write_results(&dir, &results, opts.trace_every)?;
        }
    }
    write_checks(&dir, &report.checks)?;
    Ok(report)
}

fn rows_detail(t: &SweepTable) -> String {
    t.rows
        .iter()
        .map(|r| format!("{}={}: {}", t.param, r.value, r.mean))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Solves with RVI and writes `policy.csv`, the threshold report and one
/// heatmap per slice.
fn solve_and_map(cfg: &EnvConfig, dir: &Path, report: &mut PresetReport) -> Result<()> {
    let mdp = Mdp::new(cfg);
    let sol = mdp.rvi(&RviOptions::default())?;
    let mut buf = Vec::new();
    write_policy_csv(&mut buf, &mdp, &sol)?;
    std::fs::write(dir.join("policy.csv"), &buf)?;
    let rows: Vec<PolicyRow> = crate::planner::read_policy_csv(buf.as_slice())?;
    write_heatmaps(&dir.join("heatmaps"), &export_policy_heatmap(&rows)?)?;
    let thresholds = verify_threshold_structure(&sol.policy, mdp.space());
    report.checks.push(Check {
        name: "threshold structure".into(),
        passed: thresholds.passed(),
        detail: format!(
            "gain {} over {} slices, {} violations",
            sol.values.gain,
            thresholds.slices_checked,
            thresholds.violations.len()
        ),
    });
    Ok(())
}

/// Writes `summary.csv`, `runs.csv` and `traces.csv` for a list of scenarios.
pub fn write_results(dir: &Path, results: &[ScenarioResult], trace_every: usize) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut summary = csv::Writer::from_writer(File::create(dir.join("summary.csv"))?);
    let mut runs = csv::Writer::from_writer(File::create(dir.join("runs.csv"))?);
    let mut traces = csv::Writer::from_writer(File::create(dir.join("traces.csv"))?);
    SummaryRow::write_header(&mut summary)?;
    for (i, r) in results.iter().enumerate() {
        r.summary.write(&mut summary)?;
        r.write_runs(&mut runs, i == 0)?;
        r.write_traces(&mut traces, i == 0, trace_every)?;
    }
    summary.flush()?;
    runs.flush()?;
    traces.flush()?;
    Ok(())
}

pub fn write_sweeps(dir: &Path, tables: &[SweepTable]) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(dir.join("sweep.csv"))?);
    for (i, t) in tables.iter().enumerate() {
        t.write_csv(&mut w, i == 0)?;
    }
    w.flush()?;
    Ok(())
}

fn write_checks(dir: &Path, checks: &[Check]) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(dir.join("checks.csv"))?);
    w.write_record(["check", "passed", "detail"])?;
    for c in checks {
        w.write_record([c.name.as_str(), if c.passed { "true" } else { "false" }, c.detail.as_str()])?;
    }
    w.flush()?;
    Ok(())
}
