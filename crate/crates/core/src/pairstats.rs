//! Pairwise sufficient statistics from one Gram-matrix pass.
//!
//! The hat matrix of a single column is rank one, so
//! `x_i' H_j x_i = (x_j' x_i)^2 / |x_j|^2`. Every per-pair quantity used by
//! the Bayes factors is therefore an `O(1)` function of the Gram matrix.

use rayon::prelude::*;

use crate::dataio::DataMatrix;
use crate::error::{Error, Result};

/// Relative level below which a regression residual is treated as an exact fit.
pub const COLLINEAR_TOL: f64 = 1e-14;

const PAIRWISE_BLOCK: usize = 32;

/// Inner product with pairwise (recursive halving) summation.
pub fn pairwise_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= PAIRWISE_BLOCK {
        let mut s = 0.0;
        for (x, y) in a.iter().zip(b) {
            s += x * y;
        }
        return s;
    }
    let mid = a.len() / 2;
    pairwise_dot(&a[..mid], &b[..mid]) + pairwise_dot(&a[mid..], &b[mid..])
}

/// Gram matrix `X'X` and squared column norms of a data matrix.
#[derive(Debug, Clone)]
pub struct GramCache {
    gram: Vec<f64>,
    norms_sq: Vec<f64>,
    n: usize,
    p: usize,
}

/// `tau_{ij,gamma}^2` together with the near-collinearity flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairResidual {
    pub value: f64,
    /// Set when `value < COLLINEAR_TOL * tau_i^2`.
    pub near_collinear: bool,
}

/// Compute the Gram matrix. Each entry is an independent pairwise-summed dot
/// product, so the result does not depend on the number of worker threads.
pub fn build_gram(data: &DataMatrix) -> GramCache {
    let (n, p) = (data.n(), data.p());
    let upper: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|i| {
            let xi = data.column(i);
            (i..p).map(|j| pairwise_dot(xi, data.column(j))).collect()
        })
        .collect();

    let mut gram = vec![0.0; p * p];
    for (i, row) in upper.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let j = i + k;
            gram[i * p + j] = v;
            gram[j * p + i] = v;
        }
    }
    let norms_sq = (0..p).map(|j| gram[j * p + j]).collect();
    GramCache {
        gram,
        norms_sq,
        n,
        p,
    }
}

impl GramCache {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn gram(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.p + j]
    }

    pub fn norms_sq(&self) -> &[f64] {
        &self.norms_sq
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.p {
            return Err(Error::InvalidPair {
                i,
                j: i,
                reason: format!("index out of range for p = {}", self.p),
            });
        }
        Ok(())
    }

    pub(crate) fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.p || j >= self.p {
            return Err(Error::InvalidPair {
                i,
                j,
                reason: format!("index out of range for p = {}", self.p),
            });
        }
        if i == j {
            return Err(Error::InvalidPair {
                i,
                j,
                reason: "indices must differ".into(),
            });
        }
        Ok(())
    }

    /// `tau_i^2 = |x_i|^2 / n`.
    pub fn tau_i_sq(&self, i: usize) -> Result<f64> {
        self.check_index(i)?;
        Ok(self.norms_sq[i] / self.n as f64)
    }

    /// `tau_{ij,gamma}^2 = x_i'{I - (1+gamma)^{-1} H_j} x_i / n`.
    pub fn tau_ij_gamma_sq(&self, i: usize, j: usize, gamma: f64) -> Result<PairResidual> {
        self.check_pair(i, j)?;
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::param("gamma", format!("must be >= 0, got {gamma}")));
        }
        Ok(self.residual_unchecked(i, j, gamma))
    }

    pub(crate) fn residual_unchecked(&self, i: usize, j: usize, gamma: f64) -> PairResidual {
        let ni = self.norms_sq[i];
        let g = self.gram(i, j);
        let rss = (ni - g * g / ((1.0 + gamma) * self.norms_sq[j])).max(0.0);
        PairResidual {
            value: rss / self.n as f64,
            near_collinear: rss < COLLINEAR_TOL * ni,
        }
    }

    /// Squared sample correlation (uncentered) `g_ij^2 / (|x_i|^2 |x_j|^2)`.
    pub fn sample_correlation_sq(&self, i: usize, j: usize) -> Result<f64> {
        self.check_pair(i, j)?;
        Ok(self.correlation_sq_unchecked(i, j))
    }

    pub(crate) fn correlation_sq_unchecked(&self, i: usize, j: usize) -> f64 {
        let g = self.gram(i, j);
        (g * g / (self.norms_sq[i] * self.norms_sq[j])).min(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cache(cols: &[Vec<f64>]) -> GramCache {
        build_gram(&DataMatrix::from_columns(cols).unwrap())
    }

    #[test]
    fn identity_columns() {
        let c = cache(&[vec![1., 0.], vec![0., 1.]]);
        assert_eq!(c.norms_sq(), &[1.0, 1.0]);
        assert_eq!(c.gram(0, 1), 0.0);
        assert_eq!(c.gram(1, 1), 1.0);
    }

    #[test]
    fn hand_example() {
        let c = cache(&[vec![1., 2., 3.], vec![1., 1., 1.]]);
        assert_eq!(c.gram(0, 1), 6.0);
        assert_eq!(c.norms_sq(), &[14.0, 3.0]);
        assert_relative_eq!(c.tau_i_sq(0).unwrap(), 14.0 / 3.0);
        let r = c.tau_ij_gamma_sq(0, 1, 0.5).unwrap();
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-15);
        assert!(!r.near_collinear);
        assert_relative_eq!(c.sample_correlation_sq(0, 1).unwrap(), 6.0 / 7.0);
    }

    #[test]
    fn duplicated_column() {
        let c = cache(&[vec![1., 2., 4.], vec![1., 2., 4.]]);
        assert_eq!(c.gram(0, 1), c.norms_sq()[0]);
        assert_eq!(c.gram(0, 1), c.norms_sq()[1]);
        let r = c.tau_ij_gamma_sq(0, 1, 0.0).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.near_collinear);
        assert_eq!(c.sample_correlation_sq(0, 1).unwrap(), 1.0);
    }

    #[test]
    fn orthogonal_pair() {
        let c = cache(&[vec![1., 1., 0.], vec![1., -1., 5.]]);
        for gamma in [0.0, 0.3, 7.0] {
            let r = c.tau_ij_gamma_sq(0, 1, gamma).unwrap();
            assert_eq!(r.value, c.tau_i_sq(0).unwrap());
        }
        assert_eq!(c.sample_correlation_sq(0, 1).unwrap(), 0.0);
    }

    #[test]
    fn unit_column() {
        let mut col = vec![0.0; 10];
        col[0] = 1.0;
        let c = cache(&[col, (0..10).map(f64::from).collect()]);
        assert_relative_eq!(c.tau_i_sq(0).unwrap(), 0.1);
    }

    #[test]
    fn index_errors() {
        let c = cache(&[vec![1., 2., 3.], vec![1., 1., 2.]]);
        assert!(matches!(c.tau_i_sq(2), Err(Error::InvalidPair { .. })));
        assert!(matches!(
            c.tau_ij_gamma_sq(1, 1, 0.1),
            Err(Error::InvalidPair { .. })
        ));
        assert!(c.sample_correlation_sq(0, 0).is_err());
    }

    #[test]
    fn pairwise_dot_matches_naive() {
        let a: Vec<f64> = (0..1000).map(|k| (k as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..1000).map(|k| (k as f64 * 0.11).cos()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert_relative_eq!(pairwise_dot(&a, &b), naive, max_relative = 1e-12);
    }

    fn matrix_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, f64, f64)> {
        (3usize..12, 2usize..6).prop_flat_map(|(n, p)| {
            (
                prop::collection::vec(prop::collection::vec(-10.0f64..10.0, n), p),
                0.0f64..5.0,
                0.0f64..5.0,
            )
        })
    }

    proptest! {
        #[test]
        fn residual_bounds_and_monotonicity((cols, g1, g2) in matrix_strategy()) {
            prop_assume!(cols.iter().all(|c| c.iter().any(|&v| v != c[0])));
            let c = cache(&cols);
            let (lo, hi) = if g1 < g2 { (g1, g2) } else { (g2, g1) };
            for i in 0..c.p() {
                for j in 0..c.p() {
                    if i == j { continue; }
                    let ti = c.tau_i_sq(i).unwrap();
                    let a = c.tau_ij_gamma_sq(i, j, lo).unwrap().value;
                    let b = c.tau_ij_gamma_sq(i, j, hi).unwrap().value;
                    prop_assert!(a <= ti * (1.0 + 1e-12));
                    prop_assert!(a <= b * (1.0 + 1e-12) + 1e-300);
                    let floor = hi / (1.0 + hi) * ti;
                    prop_assert!(b >= floor * (1.0 - 1e-9) - 1e-12);
                    // Regression sum of squares is nonnegative.
                    let r0 = c.tau_ij_gamma_sq(i, j, 0.0).unwrap().value;
                    prop_assert!(c.n() as f64 * (ti - r0) >= -1e-9 * ti);
                    let rho = c.sample_correlation_sq(i, j).unwrap();
                    prop_assert!((0.0..=1.0).contains(&rho));
                }
            }
        }

        #[test]
        fn gram_is_symmetric_and_cauchy_schwarz((cols, _, _) in matrix_strategy()) {
            prop_assume!(cols.iter().all(|c| c.iter().any(|&v| v != c[0])));
            let c = cache(&cols);
            for i in 0..c.p() {
                prop_assert_eq!(c.gram(i, i), c.norms_sq()[i]);
                for j in 0..c.p() {
                    prop_assert_eq!(c.gram(i, j), c.gram(j, i));
                    let g = c.gram(i, j);
                    prop_assert!(g * g <= c.norms_sq()[i] * c.norms_sq()[j] * (1.0 + 1e-10));
                }
            }
        }

        #[test]
        fn column_scaling_is_quadratic((cols, _, _) in matrix_strategy(), scale in 0.1f64..10.0) {
            prop_assume!(cols.iter().all(|c| c.iter().any(|&v| v != c[0])));
            let mut scaled = cols.clone();
            scaled[0].iter_mut().for_each(|v| *v *= scale);
            let a = cache(&cols).tau_i_sq(0).unwrap();
            let b = cache(&scaled).tau_i_sq(0).unwrap();
            prop_assert!((b - scale * scale * a).abs() <= 1e-10 * b.abs().max(1e-300));
        }
    }
}
