//! Covariance support recovery by thresholding pairwise diagonality Bayes
//! factors, cross-validated threshold choice, and selection metrics.

use std::io::Write;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::bayesfactor::{diag_unchecked, half_log_shrinkage, HyperParams};
use crate::dataio::{CovarianceSpec, DataMatrix};
use crate::error::{Error, Result};
use crate::pairstats::{build_gram, pairwise_dot, GramCache};
use crate::simulate::replicate_rng;

/// Default threshold grid: -7 to 10 in steps of 0.2.
pub const DEFAULT_GRID: (f64, f64, f64) = (-7.0, 10.0, 0.2);
pub const DEFAULT_SPLITS: usize = 50;

fn one_based_pairs<S: Serializer>(
    pairs: &[(usize, usize)],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(pairs.iter().map(|&(i, j)| [i + 1, j + 1]))
}

/// Selected pairs `(i, j)`, `i < j`, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportEstimate {
    pub threshold: f64,
    pub symmetrized: bool,
    #[serde(serialize_with = "one_based_pairs")]
    pub pairs: Vec<(usize, usize)>,
    #[serde(skip)]
    pub p: usize,
}

impl SupportEstimate {
    pub fn contains(&self, i: usize, j: usize) -> bool {
        let key = (i.min(j), i.max(j));
        self.pairs.binary_search(&key).is_ok()
    }

    /// Edge list with a header and one-based indices.
    pub fn write_edge_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "i,j")?;
        for &(i, j) in &self.pairs {
            writeln!(out, "{},{}", i + 1, j + 1)?;
        }
        out.flush()
    }
}

/// Full `p x p` table of `2 log B~10(x_i, x_j)` (response `i`).
#[derive(Debug, Clone)]
pub struct PairScores {
    p: usize,
    dev: Vec<f64>,
}

impl PairScores {
    pub fn compute(cache: &GramCache, gamma: f64) -> Self {
        let p = cache.p();
        let hls = half_log_shrinkage(gamma);
        let rows: Vec<Vec<f64>> = (0..p)
            .into_par_iter()
            .map(|i| {
                (0..p)
                    .map(|j| {
                        if i == j {
                            f64::NEG_INFINITY
                        } else {
                            diag_unchecked(cache, i, j, gamma, hls).deviance()
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            p,
            dev: rows.concat(),
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dev[i * self.p + j]
    }

    /// Score used to decide pair `{i, j}`.
    pub fn selection_score(&self, i: usize, j: usize, symmetrize: bool) -> f64 {
        let (a, b) = (i.min(j), i.max(j));
        if symmetrize {
            self.get(a, b).max(self.get(b, a))
        } else {
            self.get(a, b)
        }
    }

    pub fn select(&self, c_sel: f64, symmetrize: bool) -> SupportEstimate {
        let mut pairs = Vec::new();
        for i in 0..self.p {
            for j in (i + 1)..self.p {
                if self.selection_score(i, j, symmetrize) > c_sel {
                    pairs.push((i, j));
                }
            }
        }
        SupportEstimate {
            threshold: c_sel,
            symmetrized: symmetrize,
            pairs,
            p: self.p,
        }
    }
}

/// Pairs whose `2 log B~10` exceeds `c_sel`. With `symmetrize`, a pair is
/// scored by the larger of its two regression directions.
pub fn select_support(
    data: &DataMatrix,
    hp: &HyperParams,
    c_sel: f64,
    symmetrize: bool,
) -> Result<SupportEstimate> {
    if data.p() < 2 {
        return Err(Error::param("p", "at least two variables are required"));
    }
    let cache = build_gram(data);
    Ok(PairScores::compute(&cache, hp.gamma).select(c_sel, symmetrize))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Serialize for Confusion {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Confusion", 4)?;
        st.serialize_field("tp", &self.tp)?;
        st.serialize_field("tn", &self.tn)?;
        st.serialize_field("fp", &self.fp)?;
        st.serialize_field("fn", &self.fn_)?;
        st.end()
    }
}

/// Tally an estimate against the nonzero off-diagonal pattern of `truth`.
pub fn confusion(estimate: &SupportEstimate, truth: &CovarianceSpec) -> Result<Confusion> {
    let p = truth.p();
    if estimate.p != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: estimate.p,
        });
    }
    let mut c = Confusion {
        tp: 0,
        tn: 0,
        fp: 0,
        fn_: 0,
    };
    for i in 0..p {
        for j in (i + 1)..p {
            let actual = truth.get(i, j) != 0.0;
            match (estimate.contains(i, j), actual) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
    }
    Ok(c)
}

/// Matthews correlation coefficient; 0 when any marginal is empty.
pub fn mcc(c: &Confusion) -> f64 {
    let (tp, tn, fp, fn_) = (c.tp as f64, c.tn as f64, c.fp as f64, c.fn_ as f64);
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom == 0.0 {
        return 0.0;
    }
    (tp * tn - fp * fn_) / denom.sqrt()
}

/// Number of misclassified pairs, FP + FN.
pub fn error_count(c: &Confusion) -> u64 {
    c.fp + c.fn_
}

/// Rows on which the regression slope in the CV loss is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FitBetaOn {
    /// The held-out rows, as in the original recipe.
    #[default]
    Test,
    Train,
}

/// Loss charged to a column with no selected partner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmptyLoss {
    /// The residual of predicting zero, `sum_{I1} x_j^2 / (n1 - 1)`.
    #[default]
    NullResidual,
    /// Nothing. Makes the loss nonincreasing in the threshold, so the
    /// largest grid point always wins.
    Zero,
}

/// Options of the held-out loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvConfig {
    pub fit_beta_on: FitBetaOn,
    pub empty_loss: EmptyLoss,
    pub symmetrize: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            fit_beta_on: FitBetaOn::Test,
            empty_loss: EmptyLoss::NullResidual,
            symmetrize: true,
        }
    }
}

/// Row partition: `test` is I1 (scored), `train` is I2 (used for selection).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub test: Vec<usize>,
    pub train: Vec<usize>,
}

impl Split {
    /// Uniform split with `ceil(n/3)` test rows, from stream `index` of `seed`.
    pub fn random(n: usize, seed: u64, index: u64) -> Self {
        let n1 = n.div_ceil(3);
        let mut rng = replicate_rng(seed, index);
        let mut test = sample(&mut rng, n, n1).into_vec();
        test.sort_unstable();
        let mut in_test = vec![false; n];
        test.iter().for_each(|&r| in_test[r] = true);
        let train = (0..n).filter(|&r| !in_test[r]).collect();
        Self { test, train }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.test.len() < 2 {
            return Err(Error::param("split", "test set needs at least 2 rows"));
        }
        if self.train.len() < 3 {
            return Err(Error::param("split", "training set needs at least 3 rows"));
        }
        let mut seen = vec![false; n];
        for &r in self.test.iter().chain(&self.train) {
            if r >= n || seen[r] {
                return Err(Error::param("split", "test and train must partition the rows"));
            }
            seen[r] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::param("split", "test and train must partition the rows"));
        }
        Ok(())
    }
}

fn row_gram(data: &DataMatrix, rows: &[usize]) -> Vec<f64> {
    let p = data.p();
    let cols: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let c = data.column(j);
            rows.iter().map(|&r| c[r]).collect()
        })
        .collect();
    let mut g = vec![0.0; p * p];
    for i in 0..p {
        for j in i..p {
            let v = pairwise_dot(&cols[i], &cols[j]);
            g[i * p + j] = v;
            g[j * p + i] = v;
        }
    }
    g
}

/// Everything about one split that does not depend on the threshold.
#[derive(Debug, Clone)]
pub struct SplitEvaluator {
    p: usize,
    scores: PairScores,
    config: CvConfig,
    /// `resid[j*p + l]`: test-row residual sum of squares of `x_j` on `x_l`,
    /// divided by `n1 - 1`; NaN when the slope is undefined.
    resid: Vec<f64>,
    /// Loss of column `j` when nothing is selected for it.
    empty: Vec<f64>,
}

impl SplitEvaluator {
    pub fn new(
        data: &DataMatrix,
        hp: &HyperParams,
        split: &Split,
        config: CvConfig,
    ) -> Result<Self> {
        split.validate(data.n())?;
        let p = data.p();
        let train = data.select_rows(&split.train)?;
        let scores = PairScores::compute(&build_gram(&train), hp.gamma);

        let g1 = row_gram(data, &split.test);
        let g_fit = match config.fit_beta_on {
            FitBetaOn::Test => None,
            FitBetaOn::Train => Some(row_gram(data, &split.train)),
        };
        let denom = split.test.len() as f64 - 1.0;
        let mut resid = vec![0.0; p * p];
        for j in 0..p {
            for l in 0..p {
                if j == l {
                    continue;
                }
                let (gjj, gjl, gll) = (g1[j * p + j], g1[j * p + l], g1[l * p + l]);
                let beta = match &g_fit {
                    None => gjl / gll,
                    Some(g2) => g2[j * p + l] / g2[l * p + l],
                };
                // sum (x_j - beta x_l)^2 expanded over the test Gram
                let rss = (gjj - 2.0 * beta * gjl + beta * beta * gll).max(0.0);
                resid[j * p + l] = if beta.is_finite() { rss / denom } else { f64::NAN };
            }
        }
        let empty = (0..p)
            .map(|j| match config.empty_loss {
                EmptyLoss::NullResidual => g1[j * p + j] / denom,
                EmptyLoss::Zero => 0.0,
            })
            .collect();
        Ok(Self {
            p,
            scores,
            config,
            resid,
            empty,
        })
    }

    pub fn scores(&self) -> &PairScores {
        &self.scores
    }

    /// Sum over columns `j` of the mean residual over selected partners;
    /// columns with no selected partner are charged per [`EmptyLoss`].
    pub fn mse(&self, c_sel: f64) -> Result<f64> {
        let p = self.p;
        let mut total = 0.0;
        for j in 0..p {
            let mut sum = 0.0;
            let mut count = 0usize;
            for l in (0..p).filter(|&l| l != j) {
                if self.scores.selection_score(j, l, self.config.symmetrize) > c_sel {
                    let r = self.resid[j * p + l];
                    if r.is_nan() {
                        return Err(Error::DegenerateSplit { column: l });
                    }
                    sum += r;
                    count += 1;
                }
            }
            total += if count > 0 {
                sum / count as f64
            } else {
                self.empty[j]
            };
        }
        Ok(total)
    }
}

/// Held-out loss of the support selected on `split.train` at threshold `c_sel`.
pub fn cv_mse(
    data: &DataMatrix,
    hp: &HyperParams,
    c_sel: f64,
    split: &Split,
    config: CvConfig,
) -> Result<f64> {
    SplitEvaluator::new(data, hp, split, config)?.mse(c_sel)
}

/// Evenly spaced ascending grid `min, min + step, ..., <= max`.
pub fn threshold_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max >= min) || !min.is_finite() || !max.is_finite() {
        return Err(Error::Domain(format!(
            "invalid grid min={min} max={max} step={step}"
        )));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|k| ((min + k as f64 * step) * 1e10).round() / 1e10)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CVReport {
    pub grid: Vec<f64>,
    pub mean_mse: Vec<f64>,
    pub chosen: f64,
    pub splits: usize,
    pub seed: u64,
    pub config: CvConfig,
}

impl CVReport {
    /// `threshold,mean_mse` table.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "threshold,mean_mse")?;
        for (t, m) in self.grid.iter().zip(&self.mean_mse) {
            writeln!(out, "{t},{m}")?;
        }
        out.flush()
    }
}

/// Choose the threshold minimizing the held-out loss averaged over
/// `nsplits` random splits. Ties go to the first grid point attaining the
/// minimum.
pub fn cv_select_threshold(
    data: &DataMatrix,
    hp: &HyperParams,
    grid: &[f64],
    nsplits: usize,
    seed: u64,
    config: CvConfig,
) -> Result<CVReport> {
    if grid.is_empty() {
        return Err(Error::Domain("threshold grid is empty".into()));
    }
    if nsplits == 0 {
        return Err(Error::param("nsplits", "must be positive"));
    }
    let n = data.n();
    if n < 6 {
        return Err(Error::InvalidSampleSize {
            n,
            reason: "cross-validation needs n >= 6".into(),
        });
    }
    let per_split: Vec<Vec<f64>> = (0..nsplits as u64)
        .into_par_iter()
        .map(|s| {
            let split = Split::random(n, seed, s);
            let eval = SplitEvaluator::new(data, hp, &split, config)?;
            grid.iter().map(|&c| eval.mse(c)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut mean_mse = vec![0.0; grid.len()];
    for row in &per_split {
        for (acc, v) in mean_mse.iter_mut().zip(row) {
            *acc += v;
        }
    }
    mean_mse.iter_mut().for_each(|v| *v /= nsplits as f64);

    let mut best = 0;
    for (k, &v) in mean_mse.iter().enumerate() {
        if v < mean_mse[best] {
            best = k;
        }
    }
    Ok(CVReport {
        grid: grid.to_vec(),
        mean_mse,
        chosen: grid[best],
        splits: nsplits,
        seed,
        config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayesfactor::{default_hyperparams, TestKind};
    use crate::simulate::{cov_two_entry, sample_mvn};
    use crate::DEVIANCE_CAP;
    use approx::assert_abs_diff_eq;

    fn hp(n: usize, p: usize) -> HyperParams {
        default_hyperparams(n, p, TestKind::Support, 100.0).unwrap()
    }

    fn est(p: usize, pairs: &[(usize, usize)]) -> SupportEstimate {
        SupportEstimate {
            threshold: 0.0,
            symmetrized: true,
            pairs: pairs.to_vec(),
            p,
        }
    }

    #[test]
    fn cap_selects_nothing() {
        let d = sample_mvn(&cov_two_entry(6, 0.9).unwrap(), 40, 1).unwrap();
        let s = select_support(&d, &hp(40, 6), DEVIANCE_CAP, true).unwrap();
        assert!(s.pairs.is_empty());
    }

    #[test]
    fn collinear_pair_always_selected() {
        let x = vec![1.0, -2.0, 0.5, 3.0];
        let d = DataMatrix::from_columns(&[x.clone(), x]).unwrap();
        let h = hp(4, 2).with_gamma(1e-20).unwrap();
        for c in [-5.0, 0.0, 1e6, 1e299] {
            assert_eq!(select_support(&d, &h, c, true).unwrap().pairs, vec![(0, 1)]);
        }
    }

    #[test]
    fn confusion_examples() {
        let truth = CovarianceSpec::from_rows(&[
            vec![1.0, 0.3, 0.0],
            vec![0.3, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let c = confusion(&est(3, &[(0, 1), (0, 2)]), &truth).unwrap();
        assert_eq!(c, Confusion { tp: 1, tn: 1, fp: 1, fn_: 0 });

        let c = confusion(&est(3, &[(0, 1)]), &truth).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        assert_eq!(error_count(&c), 0);

        let c = confusion(&est(3, &[]), &truth).unwrap();
        assert_eq!((c.tp, c.fn_), (0, 1));
        assert_eq!(error_count(&c), 1);

        assert!(confusion(&est(4, &[]), &truth).is_err());
    }

    #[test]
    fn mcc_examples() {
        assert_eq!(mcc(&Confusion { tp: 2, tn: 2, fp: 0, fn_: 0 }), 1.0);
        assert_eq!(mcc(&Confusion { tp: 1, tn: 1, fp: 1, fn_: 1 }), 0.0);
        assert_abs_diff_eq!(
            mcc(&Confusion { tp: 3, tn: 4, fp: 1, fn_: 2 }),
            0.408248,
            epsilon = 1e-6
        );
        assert_eq!(mcc(&Confusion { tp: 0, tn: 5, fp: 0, fn_: 0 }), 0.0);
        assert_eq!(error_count(&Confusion { tp: 0, tn: 0, fp: 1, fn_: 2 }), 3);
    }

    #[test]
    fn mcc_label_symmetry() {
        for (tp, tn, fp, fn_) in [(3, 4, 1, 2), (10, 1, 0, 7), (5, 5, 5, 1)] {
            let a = mcc(&Confusion { tp, tn, fp, fn_ });
            let b = mcc(&Confusion { tp: tn, tn: tp, fp: fn_, fn_: fp });
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn grid_default() {
        let g = threshold_grid(-7.0, 10.0, 0.2).unwrap();
        assert_eq!(g.len(), 86);
        assert_eq!(g[0], -7.0);
        assert_eq!(g[85], 10.0);
        assert_eq!(g[1], -6.8);
        assert!(threshold_grid(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn split_shape() {
        let s = Split::random(100, 5, 3);
        assert_eq!(s.test.len(), 34);
        assert_eq!(s.train.len(), 66);
        assert_eq!(s, Split::random(100, 5, 3));
        assert_ne!(s, Split::random(100, 5, 4));
        s.validate(100).unwrap();
    }

    #[test]
    fn cv_mse_empty_selection() {
        let d = sample_mvn(&cov_two_entry(5, 0.5).unwrap(), 30, 9).unwrap();
        let split = Split::random(30, 1, 0);
        let zero = CvConfig {
            empty_loss: EmptyLoss::Zero,
            ..CvConfig::default()
        };
        let v = cv_mse(&d, &hp(30, 5), DEVIANCE_CAP, &split, zero).unwrap();
        assert_eq!(v, 0.0);

        let v = cv_mse(&d, &hp(30, 5), DEVIANCE_CAP, &split, CvConfig::default()).unwrap();
        let expected: f64 = (0..5)
            .map(|j| split.test.iter().map(|&r| d.column(j)[r].powi(2)).sum::<f64>() / 9.0)
            .sum();
        assert_abs_diff_eq!(v, expected, epsilon = 1e-12);
    }

    #[test]
    fn cv_mse_perfect_fit_contributes_zero() {
        // x_1 = x_2 on the test rows; x_3 independent noise.
        let x = vec![1.0, -2.0, 0.5, 3.0, 1.5, -0.5];
        let z = vec![0.2, 0.9, -1.1, 0.3, -0.7, 1.4];
        let mut y = x.clone();
        y[4] = 0.0;
        y[5] = 2.0;
        let d = DataMatrix::from_columns(&[x, y, z]).unwrap();
        let split = Split {
            test: vec![0, 1, 2, 3],
            train: vec![4, 5, 0],
        };
        assert!(split.validate(6).is_err());
        let split = Split {
            test: vec![0, 1],
            train: vec![2, 3, 4, 5],
        };
        let eval = SplitEvaluator::new(&d, &hp(6, 3).with_gamma(1.0).unwrap(), &split, CvConfig::default()).unwrap();
        assert_abs_diff_eq!(eval.resid[1], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eval.resid[3], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn cv_trivial_grid_and_determinism() {
        let d = sample_mvn(&cov_two_entry(8, 0.8).unwrap(), 36, 4).unwrap();
        let h = hp(36, 8);
        let r = cv_select_threshold(&d, &h, &[1.5], 5, 7, CvConfig::default()).unwrap();
        assert_eq!(r.chosen, 1.5);
        let grid = threshold_grid(-7.0, 10.0, 0.2).unwrap();
        let a = cv_select_threshold(&d, &h, &grid, 6, 11, CvConfig::default()).unwrap();
        let b = cv_select_threshold(&d, &h, &grid, 6, 11, CvConfig::default()).unwrap();
        assert_eq!(a, b);
        let min = a.mean_mse.iter().copied().fold(f64::INFINITY, f64::min);
        let first = a.mean_mse.iter().position(|&v| v == min).unwrap();
        assert_eq!(a.chosen, grid[first]);
        assert!(cv_select_threshold(&d, &h, &[], 5, 7, CvConfig::default()).is_err());
    }

    #[test]
    fn report_csv() {
        let r = CVReport {
            grid: vec![-1.0, 0.5],
            mean_mse: vec![2.0, 1.25],
            chosen: 0.5,
            splits: 3,
            seed: 1,
            config: CvConfig::default(),
        };
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "threshold,mean_mse\n-1,2\n0.5,1.25\n");
    }

    #[test]
    fn estimate_serialization() {
        let e = est(4, &[(0, 1), (2, 3)]);
        let v = serde_json::to_value(&e).unwrap();
        assert_eq!(v["pairs"], serde_json::json!([[1, 2], [3, 4]]));
        assert_eq!(v["symmetrized"], true);
        let mut buf = Vec::new();
        e.write_edge_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "i,j\n1,2\n3,4\n");
    }
}
