use std::path::Path;

use rand::Rng;
use serde::Deserialize;

use super::{EhChain, HarqModel, SystemState};
use crate::error::{Error, Result};

/// Every parameter of the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    harq: HarqModel,
    eh: EhChain,
    b_max: usize,
    e_s: usize,
    e_tx: usize,
    delta_max: usize,
}

impl EnvConfig {
    pub fn new(
        harq: HarqModel,
        eh: EhChain,
        b_max: usize,
        e_s: usize,
        e_tx: usize,
        delta_max: usize,
    ) -> Result<Self> {
        if e_tx < 1 {
            return Err(Error::InvalidConfig("e_tx must be at least 1".into()));
        }
        if b_max < e_tx {
            return Err(Error::InvalidConfig(format!(
                "b_max = {b_max} is below the transmission cost e_tx = {e_tx}"
            )));
        }
        if delta_max < 2 {
            return Err(Error::InvalidConfig(format!(
                "delta_max must be at least 2, got {delta_max}"
            )));
        }
        Ok(Self {
            harq,
            eh,
            b_max,
            e_s,
            e_tx,
            delta_max,
        })
    }

    /// Memoryless harvesting with `Pr(E = 1) = 0.5`, `B_max = 5`,
    /// `R_max = 3`, `delta_max = 40`, `g(r) = 2^-(r+1)` and unit energy costs.
    pub fn baseline() -> Self {
        Self::new(
            HarqModel::exponential(0.5, 0.5, 3).expect("valid HARQ curve"),
            EhChain::iid(0.5).expect("valid EH chain"),
            5,
            1,
            1,
            40,
        )
        .expect("valid baseline configuration")
    }

    /// Same as [`baseline`](Self::baseline) with the symmetric correlated
    /// chain `p(0|0) = p(1|1) = 0.7`.
    pub fn correlated() -> Self {
        Self::baseline()
            .with_eh(EhChain::symmetric(0.7).expect("valid EH chain"))
    }

    pub fn harq(&self) -> &HarqModel {
        &self.harq
    }

    pub fn eh(&self) -> &EhChain {
        &self.eh
    }

    pub fn b_max(&self) -> usize {
        self.b_max
    }

    pub fn e_s(&self) -> usize {
        self.e_s
    }

    pub fn e_tx(&self) -> usize {
        self.e_tx
    }

    pub fn delta_max(&self) -> usize {
        self.delta_max
    }

    pub fn r_max(&self) -> usize {
        self.harq.r_max()
    }

    pub fn num_eh_states(&self) -> usize {
        self.eh.num_states()
    }

    /// Energy spent by a fresh update (sensing plus transmission).
    pub fn new_update_cost(&self) -> usize {
        self.e_s + self.e_tx
    }

    pub fn with_eh(mut self, eh: EhChain) -> Self {
        self.eh = eh;
        self
    }

    pub fn with_harq(mut self, harq: HarqModel) -> Self {
        self.harq = harq;
        self
    }

    pub fn with_b_max(self, b_max: usize) -> Result<Self> {
        Self::new(self.harq, self.eh, b_max, self.e_s, self.e_tx, self.delta_max)
    }

    pub fn with_e_s(self, e_s: usize) -> Result<Self> {
        Self::new(self.harq, self.eh, self.b_max, e_s, self.e_tx, self.delta_max)
    }

    pub fn with_delta_max(self, delta_max: usize) -> Result<Self> {
        Self::new(self.harq, self.eh, self.b_max, self.e_s, self.e_tx, delta_max)
    }

    /// Checks the bounds of `s` and the ordering `delta_rx >= delta_tx`.
    pub fn check_state(&self, s: &SystemState) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidState(*s, msg));
        if s.e >= self.num_eh_states() {
            return fail(format!("EH state beyond {}", self.eh.e_max()));
        }
        if s.b > self.b_max {
            return fail(format!("battery beyond b_max = {}", self.b_max));
        }
        if s.delta_tx < 1 || s.delta_rx > self.delta_max {
            return fail(format!("AoI outside [1, {}]", self.delta_max));
        }
        if s.delta_rx < s.delta_tx {
            return fail("receiver AoI below transmitter AoI".into());
        }
        if s.r > self.r_max() {
            return fail(format!("retransmission count beyond r_max = {}", self.r_max()));
        }
        Ok(())
    }

    /// Start of every run: empty battery, nothing to retransmit, fresh AoI and
    /// the EH state drawn from the chain's stationary distribution.
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> SystemState {
        SystemState::new(self.eh.sample_stationary(rng), 0, 1, 1, 0)
    }

    /// Parses the key/value configuration format (TOML syntax). Missing keys
    /// take the [`baseline`](Self::baseline) values; sections for learner
    /// hyperparameters are ignored here.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawEnv = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        raw.build()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Renders the configuration in the format read by
    /// [`from_toml_str`](Self::from_toml_str).
    pub fn to_toml_string(&self) -> String {
        let table: Vec<String> = self.harq.table().iter().map(|g| format!("{g:?}")).collect();
        let matrix: Vec<String> = self
            .eh
            .matrix()
            .iter()
            .flatten()
            .map(|p| format!("{p:?}"))
            .collect();
        format!(
            "g_table = [{}]\neh_matrix = [{}]\nb_max = {}\ne_s = {}\ne_tx = {}\ndelta_max = {}\n",
            table.join(", "),
            matrix.join(", "),
            self.b_max,
            self.e_s,
            self.e_tx,
            self.delta_max
        )
    }
}

pub(crate) fn toml_error(text: &str, err: &toml::de::Error) -> Error {
    let line = err
        .span()
        .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(0);
    Error::Parse {
        line,
        msg: err.message().to_string(),
    }
}

#[derive(Debug, Deserialize)]
struct RawEnv {
    p0: Option<f64>,
    lambda: Option<f64>,
    r_max: Option<usize>,
    g_table: Option<Vec<f64>>,
    eh_matrix: Option<Vec<f64>>,
    pe: Option<f64>,
    b_max: Option<usize>,
    e_s: Option<usize>,
    e_tx: Option<usize>,
    delta_max: Option<usize>,
}

impl RawEnv {
    fn build(self) -> Result<EnvConfig> {
        let base = EnvConfig::baseline();
        let harq = match self.g_table {
            Some(table) => HarqModel::from_table(table)?,
            None => HarqModel::exponential(
                self.p0.unwrap_or(base.harq.p0()),
                self.lambda.unwrap_or(base.harq.lambda()),
                self.r_max.unwrap_or(base.r_max()),
            )?,
        };
        let eh = match (self.eh_matrix, self.pe) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig(
                    "give either eh_matrix or pe, not both".into(),
                ))
            }
            (Some(flat), None) => {
                let n = (flat.len() as f64).sqrt().round() as usize;
                if n * n != flat.len() || n == 0 {
                    return Err(Error::InvalidConfig(format!(
                        "eh_matrix has {} entries, which is not a square",
                        flat.len()
                    )));
                }
                EhChain::new(flat.chunks(n).map(|c| c.to_vec()).collect())?
            }
            (None, Some(pe)) => EhChain::iid(pe)?,
            (None, None) => base.eh.clone(),
        };
        EnvConfig::new(
            harq,
            eh,
            self.b_max.unwrap_or(base.b_max),
            self.e_s.unwrap_or(base.e_s),
            self.e_tx.unwrap_or(base.e_tx),
            self.delta_max.unwrap_or(base.delta_max),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parses_full_file() {
        let text = "\
# correlated EH, ARQ
g_table = [0.5, 0.5, 0.5, 0.5]
eh_matrix = [0.7, 0.3, 0.3, 0.7]
b_max = 5
e_s = 1
e_tx = 1
delta_max = 40

[fdpg]
sigma = 1.0
";
        let cfg = EnvConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.r_max(), 3);
        assert_eq!(cfg.harq().error_probability(3).unwrap(), 0.5);
        assert_eq!(cfg.eh().prob(1, 1), 0.7);
        assert_eq!(cfg.delta_max(), 40);
    }

    #[test]
    fn pe_shortcut_and_defaults() {
        let cfg = EnvConfig::from_toml_str("pe = 0.3\nb_max = 10\n").unwrap();
        assert_eq!(cfg.eh().prob(0, 1), 0.3);
        assert_eq!(cfg.b_max(), 10);
        assert_eq!(cfg.harq(), EnvConfig::baseline().harq());
    }

    #[test]
    fn round_trips_through_text() {
        let cfg = EnvConfig::correlated();
        assert_eq!(EnvConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }

    #[test]
    fn reports_parse_line() {
        let err = EnvConfig::from_toml_str("b_max = 5\ne_s = oops\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_degenerate_models() {
        assert!(EnvConfig::from_toml_str("b_max = 0").is_err());
        assert!(EnvConfig::from_toml_str("e_tx = 0").is_err());
        assert!(EnvConfig::from_toml_str("delta_max = 1").is_err());
        assert!(EnvConfig::from_toml_str("eh_matrix = [0.5, 0.5, 0.5]").is_err());
        assert!(EnvConfig::from_toml_str("pe = 0.5\neh_matrix = [1.0]").is_err());
    }

    #[test]
    fn initial_state_is_empty_and_fresh() {
        let cfg = EnvConfig::baseline();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ones = 0;
        for _ in 0..20_000 {
            let s = cfg.initial_state(&mut rng);
            assert_eq!((s.b, s.delta_rx, s.delta_tx, s.r), (0, 1, 1, 0));
            ones += s.e;
        }
        let frac = ones as f64 / 20_000.0;
        // 4 sigma of a fair coin over 20k draws
        assert!((frac - 0.5).abs() < 4.0 * (0.25f64 / 20_000.0).sqrt());
    }
}
