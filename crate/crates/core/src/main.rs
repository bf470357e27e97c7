use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use eh_aoi::harness::{
    export_policy_heatmap, run_policy, run_preset, run_scenario, run_sweep, write_heatmaps,
    write_results, write_sweeps, Algorithm, Preset, PresetOptions, Scenario, SweepParam, SweepSpec,
    DEFAULT_HORIZON, DEFAULT_RUNS,
};
use eh_aoi::learners::LearnerConfig;
use eh_aoi::planner::{
    read_policy_csv, verify_threshold_structure, write_policy_csv, Mdp, RviOptions, Solution,
    TabularPolicy, ValueTables, DEFAULT_REFERENCE, SUBMODULARITY_TOL,
};
use eh_aoi::EnvConfig;

#[derive(Parser, Debug)]
#[command(name = "eh-aoi", version, about = "Average-AoI scheduling for an energy-harvesting HARQ transmitter")]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Environment and learner configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base seed; run i uses seed + i.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[arg(long, global = true, default_value_t = DEFAULT_RUNS)]
    runs: usize,

    /// Environment steps per run.
    #[arg(long, global = true, default_value_t = DEFAULT_HORIZON)]
    horizon: usize,

    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Keep every n-th step in traces.csv.
    #[arg(long, global = true, default_value_t = 1)]
    trace_every: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the MDP exactly and write policy.csv.
    Solve {
        #[arg(long, value_enum, default_value_t = Method::Rvi)]
        method: Method,
        /// Also write one action grid per (e, delta_tx, r) slice.
        #[arg(long)]
        heatmap: bool,
    },
    /// Check the threshold structure and the diminishing differences of Q.
    Verify {
        #[arg(long, default_value_t = SUBMODULARITY_TOL)]
        tol: f64,
    },
    /// Simulate a policy: greedy, rvi, pi, or a policy CSV written by `solve`.
    Simulate {
        #[arg(long, default_value = "rvi")]
        policy: String,
    },
    /// Train a learner.
    Learn {
        #[arg(value_enum)]
        learner: Learner,
        /// Threshold variant for fdpg.
        #[arg(long, value_enum, default_value_t = VariantArg::Double)]
        variant: VariantArg,
    },
    /// Sweep one environment parameter.
    Sweep {
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value = "rvi")]
        algorithm: String,
    },
    /// Run one figure preset (fig2..fig8).
    Preset { name: String },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Method {
    Rvi,
    Pi,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Learner {
    Gr,
    Fdpg,
    Dqn,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum VariantArg {
    Single,
    Double,
}

/// Verification failure, reported with exit code 2.
#[derive(Debug)]
struct VerificationFailed(String);

impl std::fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for VerificationFailed {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<VerificationFailed>() => {
            eprintln!("verification failed: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load(global: &Global) -> anyhow::Result<(EnvConfig, LearnerConfig)> {
    match &global.config {
        Some(path) => {
            let cfg = EnvConfig::load(path).with_context(|| format!("reading {}", path.display()))?;
            let learners = LearnerConfig::load(path).with_context(|| format!("reading {}", path.display()))?;
            Ok((cfg, learners))
        }
        None => Ok((EnvConfig::baseline(), LearnerConfig::default())),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    if g.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(g.workers)
            .build_global()
            .context("starting the worker pool")?;
    }
    let (cfg, learners) = load(g)?;
    std::fs::create_dir_all(&g.out).with_context(|| format!("creating {}", g.out.display()))?;
    let scenario = |name: String, cfg: EnvConfig, a: Algorithm| {
        Scenario::new(name, cfg, a)
            .with_runs(g.runs)
            .with_horizon(g.horizon)
            .with_seed(g.seed)
            .with_learners(learners)
    };
    match &cli.command {
        Command::Solve { method, heatmap } => {
            let mdp = Mdp::new(&cfg);
            let sol = match method {
                Method::Rvi => mdp.rvi(&RviOptions::default())?,
                Method::Pi => {
                    let reference = mdp.space().index(&DEFAULT_REFERENCE);
                    let res = mdp.policy_iteration(reference);
                    Solution {
                        values: ValueTables {
                            gain: res.gain,
                            q: mdp.q_table(&res.h),
                            residual: mdp.bellman_residual(res.gain, &res.h),
                            h: res.h,
                            iterations: res.iterations,
                            reference,
                        },
                        policy: res.policy,
                    }
                }
            };
            let path = g.out.join("policy.csv");
            write_policy_csv(File::create(&path)?, &mdp, &sol)?;
            println!("average AoI {} ({} iterations)", sol.values.gain, sol.values.iterations);
            println!("wrote {}", path.display());
            if *heatmap {
                let rows = read_policy_csv(File::open(&path)?)?;
                let files = write_heatmaps(&g.out.join("heatmaps"), &export_policy_heatmap(&rows)?)?;
                println!("wrote {} heatmap slices", files.len());
            }
        }
        Command::Verify { tol } => {
            let mdp = Mdp::new(&cfg);
            let sol = mdp.rvi(&RviOptions::default())?;
            let thresholds = verify_threshold_structure(&sol.policy, mdp.space());
            let sub = mdp.verify_submodularity(&sol.values, *tol);
            write_verify_reports(&g.out, &thresholds, &sub)?;
            println!(
                "threshold structure: {} violations in {} slices",
                thresholds.violations.len(),
                thresholds.slices_checked
            );
            println!(
                "diminishing differences: {} violations in {} comparisons (worst excess {})",
                sub.violations.len(),
                sub.comparisons,
                sub.worst_excess
            );
            if !thresholds.passed() || !sub.passed() {
                return Err(VerificationFailed(format!(
                    "{} threshold and {} submodularity violations",
                    thresholds.violations.len(),
                    sub.violations.len()
                ))
                .into());
            }
        }
        Command::Simulate { policy } => {
            let res = match policy.as_str() {
                "greedy" | "rvi" | "pi" => {
                    let a: Algorithm = policy.parse()?;
                    run_scenario(&scenario(format!("simulate-{a}"), cfg.clone(), a))?
                }
                path => {
                    let table = load_policy(Path::new(path), &cfg)?;
                    let sc = scenario("simulate-file".into(), cfg.clone(), Algorithm::Rvi);
                    run_policy(&sc, table, "tabular")?
                }
            };
            finish(&g.out, &[res], g.trace_every)?;
        }
        Command::Learn { learner, variant } => {
            let a = match (learner, variant) {
                (Learner::Gr, _) => Algorithm::Gr,
                (Learner::Dqn, _) => Algorithm::Dqn,
                (Learner::Fdpg, VariantArg::Single) => Algorithm::FdpgSingle,
                (Learner::Fdpg, VariantArg::Double) => Algorithm::FdpgDouble,
            };
            let res = run_scenario(&scenario(format!("learn-{a}"), cfg.clone(), a))?;
            finish(&g.out, &[res], g.trace_every)?;
        }
        Command::Sweep {
            param,
            values,
            algorithm,
        } => {
            let param: SweepParam = param.parse()?;
            let a: Algorithm = algorithm.parse()?;
            let base = scenario(format!("sweep-{a}"), cfg.clone(), a);
            let table = run_sweep(&SweepSpec::new(param, values.clone(), base))?;
            write_sweeps(&g.out, std::slice::from_ref(&table))?;
            write_results(&g.out, &table.results, g.trace_every)?;
            for r in &table.rows {
                println!("{param}={}: {} ± {}", r.value, r.mean, r.stderr);
            }
            println!(
                "monotone: {} (strictly: {})",
                table.monotone, table.strictly_monotone
            );
        }
        Command::Preset { name } => {
            let preset: Preset = name.parse()?;
            let opts = PresetOptions {
                base: cfg,
                learners,
                runs: g.runs,
                horizon: g.horizon,
                seed: g.seed,
                trace_every: g.trace_every,
            };
            let report = run_preset(preset, &opts, &g.out)?;
            for s in &report.summaries {
                println!("{:<12} {} ± {}", s.algorithm, s.mean, s.stderr);
            }
            for c in &report.checks {
                println!("[{}] {} {}", if c.passed { "ok" } else { "no" }, c.name, c.detail);
            }
            println!("wrote {}", report.dir.display());
        }
    }
    Ok(())
}

fn finish(out: &Path, results: &[eh_aoi::harness::ScenarioResult], every: usize) -> anyhow::Result<()> {
    write_results(out, results, every)?;
    for r in results {
        let s = &r.summary;
        println!(
            "{}: mean AoI {} ± {} ({} runs, metric {})",
            s.algorithm, s.mean, s.stderr, s.runs, s.metric
        );
        if let Some(f) = &r.failure {
            bail!("scenario {} stopped early: {f}", r.scenario);
        }
    }
    Ok(())
}

fn load_policy(path: &Path, cfg: &EnvConfig) -> anyhow::Result<TabularPolicy> {
    let rows = read_policy_csv(File::open(path).with_context(|| format!("opening {}", path.display()))?)
        .with_context(|| format!("reading {}", path.display()))?;
    let mdp = Mdp::new(cfg);
    if rows.len() != mdp.len() {
        bail!(
            "{} has {} states, the configuration has {}",
            path.display(),
            rows.len(),
            mdp.len()
        );
    }
    let mut actions = vec![None; mdp.len()];
    for row in &rows {
        let idx = mdp
            .space()
            .index_of(&row.state)
            .with_context(|| format!("state {} is outside the configuration", row.state))?;
        actions[idx] = Some(row.action);
    }
    let actions = actions
        .into_iter()
        .enumerate()
        .map(|(i, a)| a.with_context(|| format!("no row for state {}", mdp.state(i))))
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(TabularPolicy::new(mdp.space(), actions))
}

fn write_verify_reports(
    out: &Path,
    thresholds: &eh_aoi::planner::ThresholdReport,
    sub: &eh_aoi::planner::SubmodularityReport,
) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(File::create(out.join("threshold_violations.csv"))?);
    w.write_record(["e", "b", "delta_tx", "r", "first_transmit", "idle_after"])?;
    for v in &thresholds.violations {
        w.write_record([v.e, v.b, v.delta_tx, v.r, v.first_transmit, v.idle_after].map(|x| x.to_string()))?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_writer(File::create(out.join("submodularity_violations.csv"))?);
    w.write_record(["e", "b", "delta_rx", "delta_tx", "r", "a1", "a2", "upper_difference", "lower_difference"])?;
    for v in &sub.violations {
        let s = v.state;
        w.write_record([
            s.e.to_string(),
            s.b.to_string(),
            s.delta_rx.to_string(),
            s.delta_tx.to_string(),
            s.r.to_string(),
            v.pair.0.symbol().to_string(),
            v.pair.1.symbol().to_string(),
            v.upper_difference.to_string(),
            v.lower_difference.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
