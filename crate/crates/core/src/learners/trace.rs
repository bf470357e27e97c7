use std::io::Write;
use std::time::Duration;

use crate::error::Result;

pub const TRACE_CSV_HEADER: [&str; 6] =
    ["step", "inst_aoi", "running_avg", "seed", "algorithm", "scenario"];

/// Learning curve of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub algorithm: String,
    pub scenario: String,
    pub seed: u64,
    inst_aoi: Vec<u32>,
    running_avg: Vec<f64>,
    total: u64,
    pub elapsed: Duration,
    /// Set when a learner had to clip a runaway parameter.
    pub diverged: bool,
    /// Average AoI of the returned policy measured after learning, when the
    /// learner reports one.
    pub evaluated_aoi: Option<f64>,
}

impl RunTrace {
    pub fn new(algorithm: impl Into<String>, seed: u64) -> Self {
        Self {
            algorithm: algorithm.into(),
            seed,
            ..Default::default()
        }
    }

    pub fn with_capacity(algorithm: impl Into<String>, seed: u64, steps: usize) -> Self {
        let mut t = Self::new(algorithm, seed);
        t.inst_aoi.reserve(steps);
        t.running_avg.reserve(steps);
        t
    }

    pub fn push(&mut self, aoi: usize) {
        self.total += aoi as u64;
        self.inst_aoi.push(aoi as u32);
        self.running_avg
            .push(self.total as f64 / self.inst_aoi.len() as f64);
    }

    pub fn len(&self) -> usize {
        self.inst_aoi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inst_aoi.is_empty()
    }

    pub fn inst_aoi(&self) -> &[u32] {
        &self.inst_aoi
    }

    pub fn running_avg(&self) -> &[f64] {
        &self.running_avg
    }

    /// Running average after the last step, `NaN` for an empty trace.
    pub fn final_running_average(&self) -> f64 {
        self.running_avg.last().copied().unwrap_or(f64::NAN)
    }

    /// Writes one row per step. The header is written only when asked, so
    /// several traces can share a file.
    pub fn write_csv<W: Write>(&self, out: &mut csv::Writer<W>, header: bool) -> Result<()> {
        self.write_csv_every(out, header, 1)
    }

    /// Like [`write_csv`](Self::write_csv) but keeps only every `every`-th
    /// step, plus the last one so the final running average is always present.
    pub fn write_csv_every<W: Write>(&self, out: &mut csv::Writer<W>, header: bool, every: usize) -> Result<()> {
        let every = every.max(1);
        if header {
            out.write_record(TRACE_CSV_HEADER)?;
        }
        let seed = self.seed.to_string();
        let last = self.len();
        for (i, (aoi, avg)) in self.inst_aoi.iter().zip(&self.running_avg).enumerate() {
            if (i + 1) % every != 0 && i + 1 != last {
                continue;
            }
            out.write_record([
                (i + 1).to_string().as_str(),
                aoi.to_string().as_str(),
                avg.to_string().as_str(),
                seed.as_str(),
                self.algorithm.as_str(),
                self.scenario.as_str(),
            ])?;
        }
        Ok(())
    }
}
