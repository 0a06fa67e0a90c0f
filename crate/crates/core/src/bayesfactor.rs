//! Closed-form pairwise Bayes factors and the default hyperparameter policy.
//!
//! Both factors come from the regression of column `i` on column `j`,
//! `x_i | x_j ~ N_n(a x_j, tau^2 I)`, with the slope prior
//! `a | tau^2 ~ N(0, tau^2 / (gamma |x_j|^2))`.
//!
//! * One-sample (`H0: a = 0, tau^2 = 1`), with `tau^2 ~ IG(a0, b0)` under the
//!   alternative:
//!   `log B10 = a0 ln b0 - lnG(a0) + 1/2 ln(g/(1+g)) + lnG(n/2 + a0)
//!              + n tau_i^2 / 2 - (n/2 + a0) ln(n tau_{ij,g}^2 / 2 + b0)`.
//! * Diagonality (`H0: a = 0`), with `pi(tau^2) ~ 1/tau^2` under both:
//!   `log B10 = 1/2 ln(g/(1+g)) - n/2 ln(tau_{ij,g}^2 / tau_i^2)`.
//!
//! Everything is evaluated on the natural-log scale; `e^{n tau^2/2}` alone
//! overflows once `n` reaches the hundreds.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::pairstats::GramCache;
use crate::DEVIANCE_CAP;

/// Which procedure a set of hyperparameters is meant for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    OneSample,
    Diagonality,
    Support,
    PairwiseIndependence,
}

/// How the prior dispersion `gamma` is derived from the exponent `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    /// `gamma = max(n, p)^{-alpha}`
    MaxNp,
    /// `gamma = n^{-alpha}`
    NOnly,
}

/// Inverse-gamma scale `b0` for the one-sample factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum B0Policy {
    /// Per pair, `b0_ij = tau_{ij,gamma=0}^2 (a0 - 1)`, so the prior mean of
    /// `tau^2` is the least-squares residual variance.
    Empirical,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub a0: f64,
    /// Prior coefficient of variation of `tau^2`; `a0 = 2 + K^{-2}`.
    pub k: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub gamma_mode: GammaMode,
    pub b0: B0Policy,
}

/// `max(n,p)^{-alpha}` or `n^{-alpha}`.
pub fn gamma_from_alpha(alpha: f64, n: usize, p: usize, mode: GammaMode) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
    }
    let base = match mode {
        GammaMode::MaxNp => n.max(p),
        GammaMode::NOnly => n,
    } as f64;
    let gamma = (-alpha * base.ln()).exp();
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::param(
            "alpha",
            format!("gamma = {base}^-{alpha} = {gamma} is outside (0, 1)"),
        ));
    }
    Ok(gamma)
}

/// Recommended hyperparameters: `a0 = 2 + K^{-2}`, empirical `b0`,
/// `alpha = 8.01 (1 - 1/ln n)` for the one-sample test and
/// `4.01 (1 - 1/ln n)` otherwise.
pub fn default_hyperparams(n: usize, p: usize, test: TestKind, k: f64) -> Result<HyperParams> {
    let ln_n = (n as f64).ln();
    if !(ln_n > 1.0) {
        return Err(Error::InvalidSampleSize {
            n,
            reason: "the default alpha needs ln n > 1".into(),
        });
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::param("K", format!("must be positive, got {k}")));
    }
    let coef = match test {
        TestKind::OneSample => 8.01,
        TestKind::Diagonality | TestKind::Support | TestKind::PairwiseIndependence => 4.01,
    };
    let alpha = coef * (1.0 - 1.0 / ln_n);
    let gamma_mode = match test {
        TestKind::PairwiseIndependence => GammaMode::NOnly,
        _ => GammaMode::MaxNp,
    };
    Ok(HyperParams {
        a0: 2.0 + k.powi(-2),
        k,
        alpha,
        gamma: gamma_from_alpha(alpha, n, p, gamma_mode)?,
        gamma_mode,
        b0: B0Policy::Empirical,
    })
}

impl HyperParams {
    /// Replace `alpha` and recompute `gamma` for the given shape.
    pub fn with_alpha(mut self, alpha: f64, n: usize, p: usize) -> Result<Self> {
        self.gamma = gamma_from_alpha(alpha, n, p, self.gamma_mode)?;
        self.alpha = alpha;
        Ok(self)
    }

    /// Pin `gamma` directly. `alpha` is kept for reporting only.
    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::param("gamma", format!("must be positive, got {gamma}")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn with_a0(mut self, a0: f64) -> Result<Self> {
        if !(a0 > 0.0) || !a0.is_finite() {
            return Err(Error::param("a0", format!("must be positive, got {a0}")));
        }
        self.a0 = a0;
        Ok(self)
    }

    pub fn with_b0(mut self, b0: B0Policy) -> Self {
        self.b0 = b0;
        self
    }

    /// `1/2 ln(gamma / (1 + gamma))`, stable for tiny `gamma`.
    pub fn half_log_shrinkage(&self) -> f64 {
        half_log_shrinkage(self.gamma)
    }
}

pub fn half_log_shrinkage(gamma: f64) -> f64 {
    0.5 * (gamma.ln() - gamma.ln_1p())
}

/// A log Bayes factor for the ordered pair `(i, j)` (response `i`, covariate `j`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogBF {
    pub value: f64,
    pub pair: (usize, usize),
    /// The pair is numerically collinear; `value` holds the capped sentinel.
    pub collinear_overflow: bool,
}

impl LogBF {
    fn flagged(pair: (usize, usize)) -> Self {
        Self {
            value: DEVIANCE_CAP / 2.0,
            pair,
            collinear_overflow: true,
        }
    }

    /// `2 log BF`, the scale every decision statistic is reported on.
    pub fn deviance(&self) -> f64 {
        2.0 * self.value
    }
}

/// One-sample log Bayes factor `log B10(x_i, x_j)`.
pub fn log_bf_one_sample(cache: &GramCache, i: usize, j: usize, hp: &HyperParams) -> Result<LogBF> {
    cache.check_pair(i, j)?;
    Ok(one_sample_unchecked(cache, i, j, hp, ln_gamma(hp.a0)))
}

pub(crate) fn one_sample_unchecked(
    cache: &GramCache,
    i: usize,
    j: usize,
    hp: &HyperParams,
    ln_gamma_a0: f64,
) -> LogBF {
    let b0 = match hp.b0 {
        B0Policy::Empirical => {
            let r0 = cache.residual_unchecked(i, j, 0.0);
            if r0.near_collinear {
                return LogBF::flagged((i, j));
            }
            r0.value * (hp.a0 - 1.0)
        }
        B0Policy::Fixed(b) => b,
    };
    if !(b0 > 0.0) {
        return LogBF::flagged((i, j));
    }
    let n = cache.n() as f64;
    let a0 = hp.a0;
    let shape = 0.5 * n + a0;
    // n * tau^2 is the raw sum of squares; keep it that way to avoid a round trip.
    let ss_i = cache.norms_sq()[i];
    let rss = cache.residual_unchecked(i, j, hp.gamma).value * n;
    let value = a0 * b0.ln() - ln_gamma_a0
        + hp.half_log_shrinkage()
        + ln_gamma(shape)
        + 0.5 * ss_i
        - shape * (0.5 * rss + b0).ln();
    LogBF {
        value,
        pair: (i, j),
        collinear_overflow: false,
    }
}

/// Diagonality / independence log Bayes factor `log B~10(x_i, x_j)`.
pub fn log_bf_diag(cache: &GramCache, i: usize, j: usize, gamma: f64) -> Result<LogBF> {
    cache.check_pair(i, j)?;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::param("gamma", format!("must be positive, got {gamma}")));
    }
    Ok(diag_unchecked(cache, i, j, gamma, half_log_shrinkage(gamma)))
}

pub(crate) fn diag_unchecked(
    cache: &GramCache,
    i: usize,
    j: usize,
    gamma: f64,
    half_log_shrink: f64,
) -> LogBF {
    if cache.residual_unchecked(i, j, gamma).near_collinear {
        return LogBF::flagged((i, j));
    }
    // tau_{ij,g}^2 / tau_i^2 = 1 - rho_ij^2 / (1 + g)
    let rho_sq = cache.correlation_sq_unchecked(i, j);
    let log_ratio = (-rho_sq / (1.0 + gamma)).ln_1p();
    LogBF {
        value: half_log_shrink - 0.5 * cache.n() as f64 * log_ratio,
        pair: (i, j),
        collinear_overflow: false,
    }
}
