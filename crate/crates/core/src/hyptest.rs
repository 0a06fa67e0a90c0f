//! Max-aggregated pairwise Bayes factor tests and their decisions.
//!
//! Statistics are reported on the deviance scale, `2 log B`. The one-sample
//! statistic maximizes over ordered pairs `i != j` (the factor is not
//! symmetric in its arguments); the diagonality statistic maximizes over
//! unordered pairs `i < j`. Under the diagonal null,
//! `2 log B~max - C_{n,p}` is asymptotically Gumbel-type with
//! `F(z) = exp{-(8 pi)^{-1/2} e^{-z/2}}`.

use std::f64::consts::PI;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};
use statrs::function::gamma::ln_gamma;

use crate::bayesfactor::{
    diag_unchecked, gamma_from_alpha, half_log_shrinkage, one_sample_unchecked, GammaMode,
    HyperParams, LogBF,
};
use crate::dataio::DataMatrix;
use crate::error::{Error, Result};
use crate::pairstats::{build_gram, GramCache};

/// Below this many variables the extreme-value calibration is unreliable.
pub const ASYMPTOTIC_MIN_P: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    RejectNull,
    RetainNull,
}

/// How the diagonality statistic is turned into a decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    /// Reject when the statistic exceeds this value.
    Threshold(f64),
    /// Reject at asymptotic level `alpha` using the extreme-value limit.
    AsymptoticSize(f64),
}

fn one_based<S: Serializer>(pair: &(usize, usize), s: S) -> std::result::Result<S::Ok, S::Error> {
    [pair.0 + 1, pair.1 + 1].serialize(s)
}

/// Result of a max-pairwise test.
///
/// Serializes as `{statistic, argmax:[i,j], decision, pvalue?, threshold, n,
/// p, gamma, alpha}` with one-based `argmax` indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestOutcome {
    /// Maximum of `2 log BF` over the scanned pairs.
    pub statistic: f64,
    #[serde(rename = "argmax", serialize_with = "one_based")]
    pub argmax_pair: (usize, usize),
    pub decision: Decision,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pvalue: Option<f64>,
    #[serde(rename = "threshold")]
    pub threshold_used: f64,
    pub n: usize,
    pub p: usize,
    pub gamma: f64,
    pub alpha: f64,
    /// Pairs that hit the collinearity cap.
    #[serde(skip)]
    pub collinear_pairs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PairSet {
    Ordered,
    Unordered,
}

struct Sweep {
    best: f64,
    argmax: (usize, usize),
    flagged: usize,
    scanned: usize,
}

/// Deterministic parallel max over a pair set; ties go to the
/// lexicographically smallest pair.
fn sweep<F>(p: usize, set: PairSet, score: F) -> Sweep
where
    F: Fn(usize, usize) -> LogBF + Sync,
{
    let rows: Vec<Sweep> = (0..p)
        .into_par_iter()
        .map(|i| {
            let start = match set {
                PairSet::Ordered => 0,
                PairSet::Unordered => i + 1,
            };
            let mut row = Sweep {
                best: f64::NEG_INFINITY,
                argmax: (i, i),
                flagged: 0,
                scanned: 0,
            };
            for j in (start..p).filter(|&j| j != i) {
                let bf = score(i, j);
                let dev = bf.deviance();
                row.scanned += 1;
                row.flagged += usize::from(bf.collinear_overflow);
                if dev > row.best {
                    row.best = dev;
                    row.argmax = (i, j);
                }
            }
            row
        })
        .collect();

    let mut total = Sweep {
        best: f64::NEG_INFINITY,
        argmax: (0, 0),
        flagged: 0,
        scanned: 0,
    };
    for row in rows {
        total.flagged += row.flagged;
        total.scanned += row.scanned;
        if row.scanned > 0 && row.best > total.best {
            total.best = row.best;
            total.argmax = row.argmax;
        }
    }
    total
}

fn require_pairs(data_p: usize) -> Result<()> {
    if data_p < 2 {
        return Err(Error::param("p", "at least two variables are required"));
    }
    Ok(())
}

fn finish(
    s: Sweep,
    cache: &GramCache,
    threshold: f64,
    pvalue: Option<f64>,
    hp_gamma: f64,
    hp_alpha: f64,
) -> Result<TestOutcome> {
    if s.scanned > 0 && s.flagged == s.scanned {
        return Err(Error::Collinearity);
    }
    if s.flagged > 0 {
        warn!(
            "{} numerically collinear pair(s) capped; the null is rejected",
            s.flagged
        );
    }
    Ok(TestOutcome {
        statistic: s.best,
        argmax_pair: s.argmax,
        decision: if s.best > threshold {
            Decision::RejectNull
        } else {
            Decision::RetainNull
        },
        pvalue,
        threshold_used: threshold,
        n: cache.n(),
        p: cache.p(),
        gamma: hp_gamma,
        alpha: hp_alpha,
        collinear_pairs: s.flagged,
    })
}

/// One-sample test of `Sigma = I`.
pub fn one_sample_test(data: &DataMatrix, hp: &HyperParams, threshold: f64) -> Result<TestOutcome> {
    require_pairs(data.p())?;
    one_sample_test_gram(&build_gram(data), hp, threshold)
}

pub fn one_sample_test_gram(cache: &GramCache, hp: &HyperParams, threshold: f64) -> Result<TestOutcome> {
    require_pairs(cache.p())?;
    let lga = ln_gamma(hp.a0);
    let s = sweep(cache.p(), PairSet::Ordered, |i, j| {
        one_sample_unchecked(cache, i, j, hp, lga)
    });
    finish(s, cache, threshold, None, hp.gamma, hp.alpha)
}

/// Maximum of `2 log B~10` over `i < j`.
pub fn diagonality_statistic(cache: &GramCache, gamma: f64) -> Result<(f64, (usize, usize))> {
    require_pairs(cache.p())?;
    let hls = half_log_shrinkage(gamma);
    let s = sweep(cache.p(), PairSet::Unordered, |i, j| {
        diag_unchecked(cache, i, j, gamma, hls)
    });
    if s.flagged == s.scanned {
        return Err(Error::Collinearity);
    }
    Ok((s.best, s.argmax))
}

/// Test of diagonality (`sigma_ij = 0` for all `i != j`).
pub fn diagonality_test(data: &DataMatrix, hp: &HyperParams, rule: DecisionRule) -> Result<TestOutcome> {
    require_pairs(data.p())?;
    diagonality_test_gram(&build_gram(data), hp, rule)
}

pub fn diagonality_test_gram(cache: &GramCache, hp: &HyperParams, rule: DecisionRule) -> Result<TestOutcome> {
    require_pairs(cache.p())?;
    if !(hp.gamma > 0.0) {
        return Err(Error::param("gamma", "must be positive"));
    }
    let hls = half_log_shrinkage(hp.gamma);
    let s = sweep(cache.p(), PairSet::Unordered, |i, j| {
        diag_unchecked(cache, i, j, hp.gamma, hls)
    });
    let (threshold, pvalue) = match rule {
        DecisionRule::Threshold(t) => (t, None),
        DecisionRule::AsymptoticSize(size) => {
            if !(size > 0.0 && size < 1.0) {
                return Err(Error::Domain(format!("size must lie in (0, 1), got {size}")));
            }
            if cache.p() < ASYMPTOTIC_MIN_P {
                warn!(
                    "p = {} < {ASYMPTOTIC_MIN_P}: the extreme-value calibration may be inaccurate",
                    cache.p()
                );
            }
            let c = c_np(cache.n(), cache.p(), hp.gamma)?;
            (c + gumbel_quantile(1.0 - size)?, Some(gumbel_sf(s.best - c)))
        }
    };
    finish(s, cache, threshold, pvalue, hp.gamma, hp.alpha)
}

/// Independence test for a single pair with `gamma = n^{-alpha}`.
pub fn pairwise_independence_test(
    data: &DataMatrix,
    i: usize,
    j: usize,
    alpha_exp: f64,
    threshold: f64,
) -> Result<TestOutcome> {
    let gamma = gamma_from_alpha(alpha_exp, data.n(), data.p(), GammaMode::NOnly)?;
    pairwise_independence_inner(data, i, j, gamma, alpha_exp, threshold)
}

/// As [`pairwise_independence_test`] with `gamma` given directly.
pub fn pairwise_independence_test_with_gamma(
    data: &DataMatrix,
    i: usize,
    j: usize,
    gamma: f64,
    threshold: f64,
) -> Result<TestOutcome> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::param("gamma", format!("must be positive, got {gamma}")));
    }
    let alpha = -gamma.ln() / (data.n() as f64).ln();
    pairwise_independence_inner(data, i, j, gamma, alpha, threshold)
}

fn pairwise_independence_inner(
    data: &DataMatrix,
    i: usize,
    j: usize,
    gamma: f64,
    alpha: f64,
    threshold: f64,
) -> Result<TestOutcome> {
    let cache = build_gram(data);
    cache.check_pair(i, j)?;
    let hls = half_log_shrinkage(gamma);
    let mut s = Sweep {
        best: f64::NEG_INFINITY,
        argmax: (i, j),
        flagged: 0,
        scanned: 0,
    };
    for (a, b) in [(i, j), (j, i)] {
        let bf = diag_unchecked(&cache, a, b, gamma, hls);
        s.scanned += 1;
        s.flagged += usize::from(bf.collinear_overflow);
        if bf.deviance() > s.best {
            s.best = bf.deviance();
            s.argmax = (a, b);
        }
    }
    finish(s, &cache, threshold, None, gamma, alpha)
}

/// Centering constant `ln(g/(1+g)) + 4 ln p - ln ln p` for the deviance-scale
/// maximum.
///
/// The shrinkage term enters at full weight: `2 log B~max` carries
/// `ln(g/(1+g))` and the remainder behaves like `n max rho^2`, whose
/// `4 ln p - ln ln p` centering gives the Gumbel limit. A half-weight term
/// would leave `stat - C` drifting to `-inf` as `g -> 0`.
pub fn c_np(n: usize, p: usize, gamma: f64) -> Result<f64> {
    if p <= 1 {
        return Err(Error::Domain(format!("c_np needs p >= 2, got {p}")));
    }
    if n == 0 {
        return Err(Error::Domain("c_np needs n >= 1".into()));
    }
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    let lp = (p as f64).ln();
    Ok(2.0 * half_log_shrinkage(gamma) + 4.0 * lp - lp.ln())
}

fn gumbel_rate(z: f64) -> f64 {
    (-0.5 * z).exp() / (8.0 * PI).sqrt()
}

/// Limiting null CDF `exp{-(8 pi)^{-1/2} e^{-z/2}}`.
pub fn gumbel_cdf(z: f64) -> f64 {
    (-gumbel_rate(z)).exp()
}

/// Upper tail `1 - F(z)`, accurate far into the tail.
pub fn gumbel_sf(z: f64) -> f64 {
    -(-gumbel_rate(z)).exp_m1()
}

/// Inverse of [`gumbel_cdf`]: `-2 ln(sqrt(8 pi) (-ln u))`.
pub fn gumbel_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {u}")));
    }
    Ok(-2.0 * ((8.0 * PI).sqrt() * -u.ln()).ln())
}
