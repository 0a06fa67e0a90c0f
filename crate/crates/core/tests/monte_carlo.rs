//! Reduced-scale simulation checks of the large-sample behaviour.

use mxpbf::evalmetrics::{ks_distance, mc_null_statistics};
use mxpbf::hyptest::{c_np, diagonality_test, gumbel_cdf, gumbel_quantile, one_sample_test};
use mxpbf::simulate::{cov_banded_setting1, cov_two_entry, sample_mvn_replicate};
use mxpbf::support::{confusion, error_count, select_support};
use mxpbf::{default_hyperparams, CovarianceSpec, Decision, DecisionRule, TestKind};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[test]
fn asymptotic_size_is_near_nominal() {
    let (n, p) = (200, 100);
    let hp = default_hyperparams(n, p, TestKind::Diagonality, 100.0).unwrap();
    let stats = mc_null_statistics(n, p, &hp, 500, 101).unwrap();
    let c = c_np(n, p, hp.gamma).unwrap();
    let cut = c + gumbel_quantile(0.95).unwrap();
    let size = stats.iter().filter(|&&s| s > cut).count() as f64 / 500.0;
    assert!((size - 0.05).abs() <= 0.04, "size {size}");

    let centred: Vec<f64> = stats.iter().map(|s| s - c).collect();
    assert!(ks_distance(&centred, gumbel_cdf).unwrap() <= 0.08);
    // the limit is 2W - ln(8 pi) for a standard Gumbel W
    let limit_mean = 2.0 * 0.577_215_664_901_532_9 - (8.0 * std::f64::consts::PI).ln();
    let mean = centred.iter().sum::<f64>() / 500.0;
    assert!((mean - limit_mean).abs() <= 0.5, "{mean} vs {limit_mean}");
}

#[test]
fn diagonality_detects_sparse_alternative() {
    let (n, p) = (100, 200);
    let spec = cov_two_entry(p, 0.8).unwrap();
    let hp = default_hyperparams(n, p, TestKind::Diagonality, 100.0).unwrap();
    let rejections = (0..100u64)
        .filter(|&r| {
            let data = sample_mvn_replicate(&spec, n, 202, r).unwrap();
            diagonality_test(&data, &hp, DecisionRule::Threshold(0.0)).unwrap().decision
                == Decision::RejectNull
        })
        .count();
    assert!(rejections >= 95, "{rejections}/100");
}

#[test]
fn null_one_sample_statistic_drifts_down() {
    let p = 100;
    let spec = CovarianceSpec::identity(p);
    let med = |n: usize| {
        let hp = default_hyperparams(n, p, TestKind::OneSample, 100.0).unwrap();
        median(
            (0..25u64)
                .map(|r| {
                    let data = sample_mvn_replicate(&spec, n, 303, r).unwrap();
                    one_sample_test(&data, &hp, 0.0).unwrap().statistic
                })
                .collect(),
        )
    };
    let (small, large) = (med(100), med(400));
    assert!(large < small, "{large} !< {small}");
}

#[test]
fn support_errors_shrink_with_n() {
    let model = cov_banded_setting1(100).unwrap();
    let mean_errors = |n: usize| {
        let hp = default_hyperparams(n, 100, TestKind::Support, 100.0).unwrap();
        (0..10u64)
            .map(|r| {
                let data = sample_mvn_replicate(&model.spec, n, 404, r).unwrap();
                let est = select_support(&data, &hp, 0.0, true).unwrap();
                error_count(&confusion(&est, &model.spec).unwrap()) as f64
            })
            .sum::<f64>()
            / 10.0
    };
    assert!(mean_errors(100) < mean_errors(50));
}
