use crate::error::{Error, Result};

/// Decoding error probability as a function of the combined retransmission
/// count, `g(r)`.
///
/// The default shape is exponential decay `g(r) = p0 * lambda^r`; an explicit
/// table can replace it (for example a measured curve).
#[derive(Debug, Clone, PartialEq)]
pub struct HarqModel {
    p0: f64,
    lambda: f64,
    r_max: usize,
    table: Vec<f64>,
}

impl HarqModel {
    /// Exponential HARQ curve. `lambda = 1` gives plain ARQ.
    pub fn exponential(p0: f64, lambda: f64, r_max: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda must lie in (0, 1], got {lambda}"
            )));
        }
        let table = (0..=r_max).map(|r| p0 * lambda.powi(r as i32)).collect();
        Self::build(p0, lambda, r_max, table)
    }

    /// Explicit curve `g[0..=r_max]`.
    pub fn from_table(table: Vec<f64>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::InvalidConfig("g_table must not be empty".into()));
        }
        let r_max = table.len() - 1;
        let p0 = table[0];
        let lambda = if r_max > 0 && p0 > 0.0 { table[1] / p0 } else { 1.0 };
        Self::build(p0, lambda, r_max, table)
    }

    /// Plain ARQ: the same error probability for every attempt.
    pub fn arq(p: f64, r_max: usize) -> Result<Self> {
        Self::exponential(p, 1.0, r_max)
    }

    fn build(p0: f64, lambda: f64, r_max: usize, table: Vec<f64>) -> Result<Self> {
        for (r, &g) in table.iter().enumerate() {
            if !(g > 0.0 && g < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "g({r}) = {g} must lie strictly between 0 and 1"
                )));
            }
        }
        if let Some(r) = table.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::InvalidConfig(format!(
                "g must be non-increasing, but g({}) > g({r})",
                r + 1
            )));
        }
        Ok(Self {
            p0,
            lambda,
            r_max,
            table,
        })
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn r_max(&self) -> usize {
        self.r_max
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// `g(r)`, the probability that a transmission combining `r` earlier
    /// attempts fails.
    pub fn error_probability(&self, r: usize) -> Result<f64> {
        self.table.get(r).copied().ok_or_else(|| {
            Error::Domain(format!(
                "retransmission count {r} exceeds r_max = {}",
                self.r_max
            ))
        })
    }

    /// Same as [`error_probability`](Self::error_probability) with `r`
    /// saturated at `r_max`.
    pub fn error_probability_clamped(&self, r: usize) -> f64 {
        self.table[r.min(self.r_max)]
    }
}

/// Free-function form of [`HarqModel::error_probability`].
pub fn error_probability(harq: &HarqModel, r: usize) -> Result<f64> {
    harq.error_probability(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_curve_values() {
        let h = HarqModel::exponential(0.5, 0.5, 3).unwrap();
        assert_eq!(h.error_probability(0).unwrap(), 0.5);
        assert_eq!(h.error_probability(3).unwrap(), 0.0625);
        // 2^-(r+1)
        for r in 0..=3 {
            assert_eq!(h.error_probability(r).unwrap(), 2f64.powi(-(r as i32 + 1)));
        }
    }

    #[test]
    fn arq_is_flat() {
        let h = HarqModel::exponential(0.5, 1.0, 3).unwrap();
        assert_eq!(h.error_probability(2).unwrap(), 0.5);
        assert_eq!(HarqModel::arq(0.5, 3).unwrap(), h);
    }

    #[test]
    fn out_of_range_is_domain_error() {
        let h = HarqModel::exponential(0.5, 0.5, 3).unwrap();
        assert!(matches!(h.error_probability(4), Err(Error::Domain(_))));
        assert_eq!(h.error_probability_clamped(9), 0.0625);
    }

    #[test]
    fn rejects_bad_curves() {
        assert!(HarqModel::from_table(vec![0.5, 0.6]).is_err());
        assert!(HarqModel::from_table(vec![1.0, 0.5]).is_err());
        assert!(HarqModel::from_table(vec![0.5, 0.0]).is_err());
        assert!(HarqModel::exponential(0.5, 0.0, 2).is_err());
        assert!(HarqModel::from_table(vec![0.4, 0.2, 0.2]).is_ok());
    }
}
