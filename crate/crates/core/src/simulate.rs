//! Covariance models used in the simulation studies, positive-definite
//! repair, and seeded multivariate normal sampling.
//!
//! Randomness comes from ChaCha8 with one stream per replicate, keyed by
//! `(seed, replicate)`, so a replicate's draws never depend on which thread
//! produced them or in what order.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataio::{min_eigenvalue, CovarianceSpec, DataMatrix};
use crate::error::{Error, Result};

/// Diagonal shift added beyond `-lambda_min` when repairing a matrix.
pub const DEFAULT_PD_EPS: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovKind {
    Identity,
    CompoundSymmetry,
    TwoEntry,
    BandedSetting1,
    BandedSetting2,
}

/// A realized covariance model plus how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovModel {
    pub kind: CovKind,
    pub p: usize,
    pub rho: Option<f64>,
    pub repaired: bool,
    /// Smallest eigenvalue of the matrix before any repair.
    pub min_eig_before: f64,
    #[serde(skip)]
    pub spec: CovarianceSpec,
}

impl CovModel {
    /// Build any supported model. `rho` is required for compound symmetry and
    /// the two-entry model and ignored otherwise.
    pub fn build(kind: CovKind, p: usize, rho: Option<f64>) -> Result<Self> {
        let need_rho = || rho.ok_or_else(|| Error::param("rho", "required for this model"));
        let plain = |spec: CovarianceSpec, rho: Option<f64>| CovModel {
            kind,
            p,
            rho,
            repaired: false,
            min_eig_before: spec.min_eigenvalue(),
            spec,
        };
        match kind {
            CovKind::Identity => {
                if p == 0 {
                    return Err(Error::param("p", "must be positive"));
                }
                Ok(plain(CovarianceSpec::identity(p), None))
            }
            CovKind::CompoundSymmetry => {
                let r = need_rho()?;
                Ok(plain(cov_compound_symmetry(p, r)?, Some(r)))
            }
            CovKind::TwoEntry => {
                let r = need_rho()?;
                Ok(plain(cov_two_entry(p, r)?, Some(r)))
            }
            CovKind::BandedSetting1 => cov_banded_setting1(p),
            CovKind::BandedSetting2 => cov_banded_setting2(p),
        }
    }
}

/// Unit diagonal with constant off-diagonal `rho`.
pub fn cov_compound_symmetry(p: usize, rho: f64) -> Result<CovarianceSpec> {
    if p == 0 {
        return Err(Error::param("p", "must be positive"));
    }
    let lower = if p > 1 { -1.0 / (p as f64 - 1.0) } else { f64::NEG_INFINITY };
    if !(rho > lower && rho < 1.0) {
        return Err(Error::param(
            "rho",
            format!("compound symmetry needs {lower} < rho < 1, got {rho}"),
        ));
    }
    CovarianceSpec::new(DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho }))
}

/// Identity except `sigma_12 = sigma_21 = rho`.
pub fn cov_two_entry(p: usize, rho: f64) -> Result<CovarianceSpec> {
    if p < 2 {
        return Err(Error::param("p", "two-entry model needs p >= 2"));
    }
    if !(rho.abs() < 1.0) {
        return Err(Error::param("rho", format!("needs |rho| < 1, got {rho}")));
    }
    let mut m = DMatrix::identity(p, p);
    m[(0, 1)] = rho;
    m[(1, 0)] = rho;
    CovarianceSpec::new(m)
}

fn taper(d: usize, width: f64) -> f64 {
    2.0 * (1.0 - d as f64 / width).max(0.0)
}

/// Raw banded matrix of the first support-recovery setting, before repair.
/// Indices in the rule are one-based; `(i v j) <= p/2` compares integers.
pub fn banded_setting1_raw(p: usize) -> DMatrix<f64> {
    let half = p / 2;
    DMatrix::from_fn(p, p, |r, c| {
        let (i, j) = (r + 1, c + 1);
        if i == j {
            return 1.0;
        }
        let d = i.abs_diff(j);
        if d <= 5 && i.max(j) <= half {
            taper(d, 10.0)
        } else {
            0.0
        }
    })
}

/// Raw banded matrix of the second setting: the rule is stated for `i < j`
/// and mirrored.
pub fn banded_setting2_raw(p: usize) -> DMatrix<f64> {
    let half = p / 2;
    DMatrix::from_fn(p, p, |r, c| {
        if r == c {
            return 1.0;
        }
        let (i, j) = (r.min(c) + 1, r.max(c) + 1);
        let d = j - i;
        let mut v = 0.0;
        if d <= 5 && i <= half {
            v += taper(d, 10.0);
        }
        if d <= 10 && i > half {
            v += taper(d, 20.0);
        }
        v
    })
}

pub fn cov_banded_setting1(p: usize) -> Result<CovModel> {
    if p < 2 {
        return Err(Error::param("p", "needs p >= 2"));
    }
    banded(CovKind::BandedSetting1, p, banded_setting1_raw(p))
}

pub fn cov_banded_setting2(p: usize) -> Result<CovModel> {
    if p < 4 {
        return Err(Error::param("p", "needs p >= 4"));
    }
    banded(CovKind::BandedSetting2, p, banded_setting2_raw(p))
}

fn banded(kind: CovKind, p: usize, raw: DMatrix<f64>) -> Result<CovModel> {
    let rep = ensure_pd(raw, DEFAULT_PD_EPS)?;
    Ok(CovModel {
        kind,
        p,
        rho: None,
        repaired: rep.repaired,
        min_eig_before: rep.min_eig_before,
        spec: rep.spec,
    })
}

/// Outcome of [`ensure_pd`].
#[derive(Debug, Clone, PartialEq)]
pub struct PdRepair {
    pub spec: CovarianceSpec,
    pub min_eig_before: f64,
    pub repaired: bool,
}

/// Return `raw` unchanged when it is positive definite; otherwise add
/// `eps - lambda_min(raw)` to every diagonal entry, so the result has
/// smallest eigenvalue `eps`.
pub fn ensure_pd(raw: DMatrix<f64>, eps: f64) -> Result<PdRepair> {
    if !(eps > 0.0) {
        return Err(Error::param("eps", format!("must be positive, got {eps}")));
    }
    if !raw.is_square() {
        return Err(Error::DimensionMismatch {
            expected: raw.nrows(),
            found: raw.ncols(),
        });
    }
    let lmin = min_eigenvalue(&raw);
    if lmin > 0.0 {
        if let Ok(spec) = CovarianceSpec::new(raw.clone()) {
            return Ok(PdRepair {
                spec,
                min_eig_before: lmin,
                repaired: false,
            });
        }
    }
    let mut m = raw;
    let shift = eps - lmin.min(0.0);
    for k in 0..m.nrows() {
        m[(k, k)] += shift;
    }
    Ok(PdRepair {
        spec: CovarianceSpec::new(m)?,
        min_eig_before: lmin,
        repaired: true,
    })
}

/// RNG for replicate `replicate` of master seed `seed`.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// `n` i.i.d. draws from `N_p(0, spec)`; equivalent to replicate 0 of `seed`.
pub fn sample_mvn(spec: &CovarianceSpec, n: usize, seed: u64) -> Result<DataMatrix> {
    sample_mvn_replicate(spec, n, seed, 0)
}

pub fn sample_mvn_replicate(
    spec: &CovarianceSpec,
    n: usize,
    seed: u64,
    replicate: u64,
) -> Result<DataMatrix> {
    sample_mvn_with(spec, n, &mut replicate_rng(seed, replicate))
}

/// Draw rows `L z` with `L` the lower Cholesky factor and `z` standard normal.
pub fn sample_mvn_with<R: rand::Rng + ?Sized>(
    spec: &CovarianceSpec,
    n: usize,
    rng: &mut R,
) -> Result<DataMatrix> {
    let p = spec.p();
    let chol = spec
        .entries()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidCovariance("Cholesky factorization failed".into()))?;
    let l = chol.l();
    let mut out = DMatrix::<f64>::zeros(n, p);
    let mut z = DVector::<f64>::zeros(p);
    for row in 0..n {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let x = &l * &z;
        for j in 0..p {
            out[(row, j)] = x[j];
        }
    }
    DataMatrix::new(out)
}

/// Sample covariance about zero, `X'X / n`.
pub fn sample_covariance(data: &DataMatrix) -> DMatrix<f64> {
    let x = data.values();
    x.transpose() * x / data.n() as f64
}
