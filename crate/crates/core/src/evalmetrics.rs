//! ROC/AUC over replicate statistics and Monte Carlo checks of the
//! extreme-value null approximation.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::bayesfactor::HyperParams;
use crate::dataio::CovarianceSpec;
use crate::error::{Error, Result};
use crate::hyptest::diagonality_statistic;
use crate::pairstats::build_gram;
use crate::simulate::sample_mvn_replicate;

/// Empirical ROC curve. A replicate is called positive when its statistic is
/// `>=` the threshold; the first threshold is `+inf` so the curve starts at
/// `(0, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    /// `(false_positive_rate, true_positive_rate)`
    pub points: Vec<(f64, f64)>,
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

impl RocCurve {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "fpr,tpr,threshold")?;
        for (&(f, t), th) in self.points.iter().zip(&self.thresholds) {
            writeln!(out, "{f},{t},{th}")?;
        }
        out.flush()
    }
}

/// Sweep the pooled distinct statistic values from high to low. Tied null
/// and alternative values move both rates at once, which credits ties with
/// one half in the trapezoidal area.
pub fn roc_curve(null_stats: &[f64], alt_stats: &[f64]) -> Result<RocCurve> {
    if null_stats.is_empty() || alt_stats.is_empty() {
        return Err(Error::Domain("roc_curve needs nonempty inputs".into()));
    }
    if null_stats.iter().chain(alt_stats).any(|v| v.is_nan()) {
        return Err(Error::Domain("roc_curve input contains NaN".into()));
    }
    let mut null = null_stats.to_vec();
    let mut alt = alt_stats.to_vec();
    null.sort_by(|a, b| b.total_cmp(a));
    alt.sort_by(|a, b| b.total_cmp(a));
    let (m0, m1) = (null.len() as f64, alt.len() as f64);

    let mut pooled: Vec<f64> = null.iter().chain(&alt).copied().collect();
    pooled.sort_by(|a, b| b.total_cmp(a));
    pooled.dedup();

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut k0, mut k1) = (0usize, 0usize);
    for t in pooled {
        while k0 < null.len() && null[k0] >= t {
            k0 += 1;
        }
        while k1 < alt.len() && alt[k1] >= t {
            k1 += 1;
        }
        points.push((k0 as f64 / m0, k1 as f64 / m1));
        thresholds.push(t);
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) * 0.5)
        .sum();
    Ok(RocCurve {
        points,
        thresholds,
        auc,
    })
}

/// `reps` diagonality statistics `2 log B~max` from independent `N_p(0, I)`
/// samples of size `n`; replicate `r` uses stream `r` of `seed`.
pub fn mc_null_statistics(
    n: usize,
    p: usize,
    hp: &HyperParams,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if reps == 0 {
        return Err(Error::param("reps", "must be positive"));
    }
    let spec = CovarianceSpec::identity(p);
    (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let data = sample_mvn_replicate(&spec, n, seed, r)?;
            Ok(diagonality_statistic(&build_gram(&data), hp.gamma)?.0)
        })
        .collect()
}

/// Kolmogorov distance `sup |F_m - F|` between a sample and a CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("ks_distance needs a nonempty sample".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let above = (k + 1) as f64 / m - f;
        let below = f - k as f64 / m;
        d = d.max(above).max(below);
    }
    Ok(d.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayesfactor::{default_hyperparams, TestKind};
    use crate::hyptest::{gumbel_cdf, gumbel_quantile};
    use approx::assert_abs_diff_eq;

    #[test]
    fn roc_examples() {
        let r = roc_curve(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(r.auc, 1.0);
        let r = roc_curve(&[0.3, 1.0, 2.0], &[2.0, 0.3, 1.0]).unwrap();
        assert_eq!(r.auc, 0.5);
        let r = roc_curve(&[0.1, 0.4], &[0.2, 0.8]).unwrap();
        assert_abs_diff_eq!(r.auc, 0.75, epsilon = 1e-15);
        assert!(roc_curve(&[], &[1.0]).is_err());
    }

    #[test]
    fn roc_endpoints_and_monotone() {
        let r = roc_curve(&[0.5, 0.1, 0.9, 0.1], &[0.2, 0.95, 0.6]).unwrap();
        assert_eq!(r.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(r.points.last(), Some(&(1.0, 1.0)));
        for w in r.points.windows(2) {
            assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
        assert_eq!(r.points.len(), r.thresholds.len());
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("fpr,tpr,threshold\n0,0,inf\n"));
    }

    #[test]
    fn ks_examples() {
        let m = 200;
        let grid: Vec<f64> = (1..=m)
            .map(|k| gumbel_quantile(k as f64 / (m as f64 + 1.0)).unwrap())
            .collect();
        let d = ks_distance(&grid, gumbel_cdf).unwrap();
        assert!(d <= 1.0 / (m as f64 + 1.0) + 1e-12, "{d}");

        let c = 0.3;
        let d = ks_distance(&[c; 10], |x| x.clamp(0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(d, c.max(1.0 - c), epsilon = 1e-15);
        assert!(ks_distance(&[], gumbel_cdf).is_err());
    }

    #[test]
    fn mc_null_is_reproducible_and_bounded() {
        let hp = default_hyperparams(30, 10, TestKind::Diagonality, 100.0).unwrap();
        let a = mc_null_statistics(30, 10, &hp, 1, 42).unwrap();
        let b = mc_null_statistics(30, 10, &hp, 1, 42).unwrap();
        assert_eq!(a, b);
        let many = mc_null_statistics(30, 10, &hp, 20, 42).unwrap();
        assert_eq!(many[0], a[0]);
        let floor = (hp.gamma / (1.0 + hp.gamma)).ln();
        for s in many {
            assert!(s.is_finite() && s >= floor - 1e-12);
        }
    }
}
