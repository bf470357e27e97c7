use rand::Rng;

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;

/// First-order Markov chain over harvested energy amounts `0..=e_max`.
///
/// `matrix[e1][e2]` is the probability of harvesting `e2` units in the next
/// slot given `e1` units in the current one.
#[derive(Debug, Clone, PartialEq)]
pub struct EhChain {
    matrix: Vec<Vec<f64>>,
    stationary: Vec<f64>,
}

impl EhChain {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let n = matrix.len();
        if n == 0 {
            return Err(Error::InvalidConfig("EH chain needs at least one state".into()));
        }
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidConfig(format!(
                    "EH matrix row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidConfig(format!(
                    "EH matrix row {i} has an entry outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidConfig(format!(
                    "EH matrix row {i} sums to {sum}"
                )));
            }
            if row[0] <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "p_E(0 | {i}) must be positive"
                )));
            }
        }
        let stationary = stationary_distribution(&matrix);
        Ok(Self { matrix, stationary })
    }

    /// Memoryless harvesting: one unit with probability `pe`, none otherwise.
    pub fn iid(pe: f64) -> Result<Self> {
        Self::new(vec![vec![1.0 - pe, pe], vec![1.0 - pe, pe]])
    }

    /// Symmetric two-state chain with `p(0|0) = p(1|1) = stay`.
    pub fn symmetric(stay: f64) -> Result<Self> {
        Self::new(vec![vec![stay, 1.0 - stay], vec![1.0 - stay, stay]])
    }

    /// Symmetric two-state chain with lag-one correlation coefficient `rho`,
    /// i.e. `p(1|1) = p(0|0) = (1 + rho) / 2`.
    pub fn with_correlation(rho: f64) -> Result<Self> {
        if !(-1.0..1.0).contains(&rho) {
            return Err(Error::InvalidConfig(format!(
                "correlation coefficient must lie in [-1, 1), got {rho}"
            )));
        }
        Self::symmetric((1.0 + rho) / 2.0)
    }

    /// A chain that never harvests anything.
    pub fn no_energy(states: usize) -> Result<Self> {
        let n = states.max(1);
        let mut row = vec![0.0; n];
        row[0] = 1.0;
        Self::new(vec![row; n])
    }

    pub fn num_states(&self) -> usize {
        self.matrix.len()
    }

    pub fn e_max(&self) -> usize {
        self.matrix.len() - 1
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.matrix[from][to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.matrix[from]
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// Draws the next EH state by inverting the row CDF at `u` in `[0, 1)`.
    pub fn next_from_uniform(&self, from: usize, u: f64) -> usize {
        pick(&self.matrix[from], u)
    }

    pub fn sample_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        pick(&self.stationary, rng.gen::<f64>())
    }
}

fn pick(dist: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in dist.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Stationary distribution by lazy power iteration, `pi <- pi (I + P) / 2`.
///
/// Falls back to the uniform distribution (with a warning) when the iteration
/// does not settle, which can only happen for a chain with several closed
/// classes.
pub fn stationary_distribution(matrix: &[Vec<f64>]) -> Vec<f64> {
    let n = matrix.len();
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..200_000 {
        let mut next = vec![0.0; n];
        for (i, row) in matrix.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                next[j] += pi[i] * p;
            }
        }
        for (x, old) in next.iter_mut().zip(&pi) {
            *x = 0.5 * (*x + old);
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let diff = next
            .iter()
            .zip(&pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        pi = next;
        if diff < 1e-15 {
            return pi;
        }
    }
    log::warn!("EH chain stationary distribution did not converge; using uniform initial state");
    vec![1.0 / n as f64; n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn iid_stationary_matches_pe() {
        let c = EhChain::iid(0.5).unwrap();
        assert_abs_diff_eq!(c.stationary()[0], 0.5, epsilon = 1e-12);
        let c = EhChain::iid(0.2).unwrap();
        assert_abs_diff_eq!(c.stationary()[1], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_chain_is_balanced() {
        let c = EhChain::symmetric(0.7).unwrap();
        assert_abs_diff_eq!(c.stationary()[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c.stationary()[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn correlation_maps_to_stay_probability() {
        let c = EhChain::with_correlation(0.4).unwrap();
        assert_abs_diff_eq!(c.prob(1, 1), 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(c.prob(0, 0), 0.7, epsilon = 1e-15);
        assert_eq!(EhChain::with_correlation(0.0).unwrap(), EhChain::iid(0.5).unwrap());
    }

    #[test]
    fn three_state_stationary_is_fixed_point() {
        let m = vec![
            vec![0.5, 0.3, 0.2],
            vec![0.1, 0.6, 0.3],
            vec![0.3, 0.3, 0.4],
        ];
        let c = EhChain::new(m.clone()).unwrap();
        let pi = c.stationary();
        for j in 0..3 {
            let v: f64 = (0..3).map(|i| pi[i] * m[i][j]).sum();
            assert_abs_diff_eq!(v, pi[j], epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_invalid_rows() {
        assert!(EhChain::new(vec![vec![0.5, 0.4], vec![0.5, 0.5]]).is_err());
        assert!(EhChain::new(vec![vec![0.0, 1.0], vec![0.5, 0.5]]).is_err());
        assert!(EhChain::new(vec![vec![1.0]]).is_ok());
    }

    #[test]
    fn inverse_cdf_skips_zero_mass() {
        let c = EhChain::no_energy(2).unwrap();
        assert_eq!(c.next_from_uniform(1, 0.999_999), 0);
        let c = EhChain::iid(0.3).unwrap();
        assert_eq!(c.next_from_uniform(0, 0.69), 0);
        assert_eq!(c.next_from_uniform(0, 0.71), 1);
    }
}
