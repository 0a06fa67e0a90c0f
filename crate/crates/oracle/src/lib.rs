//! Slow, independent reference computations for checking `mxpbf`.
//!
//! Nothing here depends on the library under test. The Bayes factor oracles
//! integrate the regression likelihood against the prior numerically instead
//! of using any closed form.

// Quadrature tables are kept digit-for-digit as published.
#![allow(clippy::excessive_precision)]

use std::f64::consts::PI;

/// 15-point Gauss–Kronrod nodes on [-1, 1] (non-negative half).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
/// 7-point Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for k in 0..7 {
        let x = h * XGK[k];
        let s = f(c - x) + f(c + x);
        kron += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod quadrature on a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let mut intervals = vec![(a, b, gk15(&f, a, b))];
    for _ in 0..400 {
        let total: f64 = intervals.iter().map(|iv| iv.2 .0).sum();
        let err: f64 = intervals.iter().map(|iv| iv.2 .1).sum();
        if err <= rel_tol * total.abs() || err < 1e-300 {
            return total;
        }
        let (k, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .unwrap();
        let (lo, hi, _) = intervals.swap_remove(k);
        let mid = 0.5 * (lo + hi);
        intervals.push((lo, mid, gk15(&f, lo, mid)));
        intervals.push((mid, hi, gk15(&f, mid, hi)));
    }
    intervals.iter().map(|iv| iv.2 .0).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Prior on `tau^2` in the regression `x_i | x_j ~ N(a x_j, tau^2 I)`.
#[derive(Debug, Clone, Copy)]
pub enum TauPrior {
    /// Inverse gamma with shape `a0` and scale `b0`.
    InverseGamma { a0: f64, b0: f64 },
    /// Improper `1 / tau^2`.
    Jeffreys,
}

impl TauPrior {
    fn log_density(&self, t2: f64) -> f64 {
        match *self {
            TauPrior::InverseGamma { a0, b0 } => {
                a0 * b0.ln() - ln_gamma(a0) - (a0 + 1.0) * t2.ln() - b0 / t2
            }
            TauPrior::Jeffreys => -t2.ln(),
        }
    }
}

/// `log p(x_i | x_j, a, tau^2)` for the Gaussian regression.
fn log_lik(xi: &[f64], xj: &[f64], a: f64, t2: f64) -> f64 {
    let n = xi.len() as f64;
    let rss: f64 = xi.iter().zip(xj).map(|(y, x)| (y - a * x).powi(2)).sum();
    -0.5 * n * (2.0 * PI * t2).ln() - 0.5 * rss / t2
}

/// Integrate `exp(g(t))` over `t in R` after locating the peak on a grid.
fn log_integrate_line<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64, rel_tol: f64) -> f64 {
    let steps = 800;
    let mut best = (f64::NEG_INFINITY, lo);
    for k in 0..=steps {
        let t = lo + (hi - lo) * k as f64 / steps as f64;
        let v = g(t);
        if v > best.0 {
            best = (v, t);
        }
    }
    let (peak, _) = best;
    // The integrand is unimodal here; truncate where it drops by e^-60.
    let cutoff = peak - 60.0;
    let mut left = best.1;
    while left > lo && g(left) > cutoff {
        left -= 0.05;
    }
    let mut right = best.1;
    while right < hi && g(right) > cutoff {
        right += 0.05;
    }
    let val = integrate(|t| (g(t) - peak).exp(), left.max(lo), right.min(hi), rel_tol);
    peak + val.ln()
}

/// `log` of the marginal likelihood of `x_i` given `x_j` under the
/// alternative: slope prior `N(0, tau^2 / (gamma |x_j|^2))`, `tau^2` prior as
/// given, integrated over `(a, log tau^2)` by nested adaptive quadrature.
pub fn log_marginal_alt(xi: &[f64], xj: &[f64], gamma: f64, prior: TauPrior) -> f64 {
    let sj = dot(xj, xj);
    // Slope location and width for the inner integral's window only.
    let a_center = dot(xi, xj) / sj;
    let outer = |u: f64| {
        let t2 = u.exp();
        let prior_var = t2 / (gamma * sj);
        let sd = (t2 / (sj * (1.0 + gamma))).sqrt();
        let inner = |a: f64| {
            log_lik(xi, xj, a, t2) - 0.5 * (2.0 * PI * prior_var).ln() - 0.5 * a * a / prior_var
        };
        let center = a_center / (1.0 + gamma);
        let half = 40.0 * sd;
        let peak = inner(center);
        let v = integrate(|a| (inner(a) - peak).exp(), center - half, center + half, 1e-11);
        // dtau^2 = tau^2 du
        peak + v.ln() + prior.log_density(t2) + u
    };
    log_integrate_line(outer, -40.0, 40.0, 1e-10)
}

/// `log` marginal likelihood of `x_i` under `a = 0` with `tau^2` integrated
/// against `prior` (used by the diagonality factor).
pub fn log_marginal_null_free_tau(xi: &[f64], prior: TauPrior) -> f64 {
    let zeros = vec![0.0; xi.len()];
    let g = |u: f64| {
        let t2 = u.exp();
        log_lik(xi, &zeros, 0.0, t2) + prior.log_density(t2) + u
    };
    log_integrate_line(g, -40.0, 40.0, 1e-10)
}

/// `log p(x_i | a = 0, tau^2 = 1)`.
pub fn log_null_fixed(xi: &[f64]) -> f64 {
    let zeros = vec![0.0; xi.len()];
    log_lik(xi, &zeros, 0.0, 1.0)
}

/// Quadrature reference for the one-sample log Bayes factor.
pub fn log_bf_one_sample_quadrature(xi: &[f64], xj: &[f64], a0: f64, b0: f64, gamma: f64) -> f64 {
    log_marginal_alt(xi, xj, gamma, TauPrior::InverseGamma { a0, b0 }) - log_null_fixed(xi)
}

/// Quadrature reference for the diagonality log Bayes factor.
pub fn log_bf_diag_quadrature(xi: &[f64], xj: &[f64], gamma: f64) -> f64 {
    log_marginal_alt(xi, xj, gamma, TauPrior::Jeffreys)
        - log_marginal_null_free_tau(xi, TauPrior::Jeffreys)
}

/// Lanczos (g = 7, n = 9) log-gamma for positive arguments.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (k, c) in C.iter().enumerate().skip(1) {
        a += c / (x + k as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Column statistics recomputed from raw columns with plain loops.
pub mod naive {
    use super::dot;

    pub fn tau_i_sq(xi: &[f64]) -> f64 {
        dot(xi, xi) / xi.len() as f64
    }

    /// `x_i'(I - H_j/(1+gamma))x_i / n` with the hat matrix formed explicitly.
    pub fn tau_ij_gamma_sq(xi: &[f64], xj: &[f64], gamma: f64) -> f64 {
        let n = xi.len();
        let sj = dot(xj, xj);
        let mut quad = 0.0;
        for a in 0..n {
            for b in 0..n {
                let h = xj[a] * xj[b] / sj;
                let m = if a == b { 1.0 } else { 0.0 } - h / (1.0 + gamma);
                quad += xi[a] * m * xi[b];
            }
        }
        quad / n as f64
    }

    pub fn correlation_sq(xi: &[f64], xj: &[f64]) -> f64 {
        let g = dot(xi, xj);
        g * g / (dot(xi, xi) * dot(xj, xj))
    }
}

/// Mann–Whitney estimate of `P(alt > null) + P(alt = null)/2` by counting
/// every pair.
pub fn mann_whitney_auc(null: &[f64], alt: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &a in alt {
        for &b in null {
            if a > b {
                wins += 1.0;
            } else if a == b {
                wins += 0.5;
            }
        }
    }
    wins / (null.len() * alt.len()) as f64
}

/// Solve `f(x) = target` for increasing `f` on `[lo, hi]` by bisection.
pub fn bisect<F: Fn(f64) -> f64>(f: F, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sum of squared residuals of `y` on `x` (no intercept) over `rows`, with
/// the slope fitted on `fit_rows`, divided by `rows.len() - 1`.
pub fn heldout_residual(y: &[f64], x: &[f64], rows: &[usize], fit_rows: &[usize]) -> f64 {
    let sxy: f64 = fit_rows.iter().map(|&r| x[r] * y[r]).sum();
    let sxx: f64 = fit_rows.iter().map(|&r| x[r] * x[r]).sum();
    let beta = sxy / sxx;
    let rss: f64 = rows.iter().map(|&r| (y[r] - beta * x[r]).powi(2)).sum();
    rss / (rows.len() as f64 - 1.0)
}
