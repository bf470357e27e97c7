use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{EhChain, EnvConfig};

use super::scenario::{run_scenario, Scenario, ScenarioResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Harvesting probability of the memoryless chain.
    Pe,
    BMax,
    Es,
    /// Correlation of the symmetric two-state chain.
    Rho,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Pe => "pe",
            SweepParam::BMax => "b_max",
            SweepParam::Es => "e_s",
            SweepParam::Rho => "rho",
        }
    }

    /// Expected direction of the mean AoI as the value grows: `true` for
    /// non-increasing.
    pub fn decreasing(self) -> bool {
        matches!(self, SweepParam::Pe | SweepParam::BMax)
    }

    /// `base` with the parameter set to `value`.
    pub fn apply(self, base: &EnvConfig, value: f64) -> Result<EnvConfig> {
        let integer = || {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Domain(format!("{} takes non-negative integers, got {value}", self.as_str())))
            }
        };
        match self {
            SweepParam::Pe => Ok(base.clone().with_eh(EhChain::iid(value)?)),
            SweepParam::BMax => base.clone().with_b_max(integer()?),
            SweepParam::Es => base.clone().with_e_s(integer()?),
            SweepParam::Rho => Ok(base.clone().with_eh(EhChain::with_correlation(value)?)),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [SweepParam::Pe, SweepParam::BMax, SweepParam::Es, SweepParam::Rho]
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Domain(format!("unknown sweep parameter `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub base: Scenario,
}

impl SweepSpec {
    pub fn new(param: SweepParam, values: Vec<f64>, base: Scenario) -> Self {
        Self { param, values, base }
    }

    /// Scenario for one value, named `<base>-<param>=<value>`.
    pub fn scenario_for(&self, value: f64) -> Result<Scenario> {
        let mut sc = self.base.clone();
        sc.cfg = self.param.apply(&self.base.cfg, value)?;
        sc.name = format!("{}-{}={}", self.base.name, self.param, value);
        Ok(sc)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub param: SweepParam,
    pub algorithm: String,
    pub rows: Vec<SweepRow>,
    /// The means move in the expected direction (ties allowed).
    pub monotone: bool,
    /// The means move strictly in the expected direction.
    pub strictly_monotone: bool,
    pub results: Vec<ScenarioResult>,
}

pub const SWEEP_CSV_HEADER: [&str; 5] = ["param", "value", "algorithm", "mean_aoi", "stderr_aoi"];

impl SweepTable {
    pub fn write_csv<W: Write>(&self, out: &mut csv::Writer<W>, header: bool) -> Result<()> {
        if header {
            out.write_record(SWEEP_CSV_HEADER)?;
        }
        for r in &self.rows {
            out.write_record([
                self.param.to_string(),
                r.value.to_string(),
                self.algorithm.clone(),
                r.mean.to_string(),
                r.stderr.to_string(),
            ])?;
        }
        Ok(())
    }
}

/// Monotonicity of `means` in the given direction: `(weak, strict)`.
pub fn monotonicity(means: &[f64], decreasing: bool) -> (bool, bool) {
    let steps: Vec<f64> = means
        .windows(2)
        .map(|w| if decreasing { w[0] - w[1] } else { w[1] - w[0] })
        .collect();
    (steps.iter().all(|&d| d >= 0.0), steps.iter().all(|&d| d > 0.0))
}

/// Runs the base scenario once per value, in the order given.
pub fn run_sweep(sw: &SweepSpec) -> Result<SweepTable> {
    let mut rows = Vec::with_capacity(sw.values.len());
    let mut results = Vec::with_capacity(sw.values.len());
    for &v in &sw.values {
        let res = run_scenario(&sw.scenario_for(v)?)?;
        rows.push(SweepRow {
            value: v,
            mean: res.summary.mean,
            stderr: res.summary.stderr,
        });
        results.push(res);
    }
    let means: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    let (monotone, strictly_monotone) = monotonicity(&means, sw.param.decreasing());
    Ok(SweepTable {
        param: sw.param,
        algorithm: sw.base.algorithm.to_string(),
        rows,
        monotone,
        strictly_monotone,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Algorithm;

    #[test]
    fn monotonicity_flags() {
        assert_eq!(monotonicity(&[3.0, 2.0, 2.0], true), (true, false));
        assert_eq!(monotonicity(&[3.0, 2.0, 1.0], true), (true, true));
        assert_eq!(monotonicity(&[1.0, 2.0, 1.5], false), (false, false));
        assert_eq!(monotonicity(&[1.0], false), (true, true));
    }

    #[test]
    fn rho_zero_is_the_fair_coin() {
        let cfg = SweepParam::Rho.apply(&EnvConfig::baseline(), 0.0).unwrap();
        assert_eq!(cfg.eh().matrix(), EnvConfig::baseline().eh().matrix());
        let cfg = SweepParam::Rho.apply(&EnvConfig::baseline(), 0.4).unwrap();
        assert!((cfg.eh().prob(1, 1) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(SweepParam::BMax.apply(&EnvConfig::baseline(), 2.5).is_err());
        assert!(SweepParam::Pe.apply(&EnvConfig::baseline(), 1.5).is_err());
    }

    #[test]
    fn pe_sweep_decreases() {
        let base = Scenario::new(
            "pe",
            EnvConfig::baseline().with_delta_max(12).unwrap(),
            Algorithm::Rvi,
        )
        .with_runs(1)
        .with_horizon(10);
        let t = run_sweep(&SweepSpec::new(SweepParam::Pe, vec![0.3, 0.5, 0.7], base)).unwrap();
        assert!(t.strictly_monotone, "{:?}", t.rows);
        assert_eq!(t.rows.len(), 3);
    }
}
