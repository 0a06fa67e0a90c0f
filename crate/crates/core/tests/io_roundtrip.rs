use std::fs;
use std::io::Write;

use mxpbf::dataio::{center_columns, load_matrix, transform_null, write_matrix};
use mxpbf::simulate::{cov_compound_symmetry, sample_covariance, sample_mvn};
use mxpbf::{CovarianceSpec, DataMatrix, Error, TableFormat};
use proptest::prelude::*;
use tempfile::tempdir;

#[test]
fn file_round_trip_is_exact() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("x.csv");
    fs::write(&path, "a,b,c\n1.5,-2,3e-7\n0.1,0.2,0.3\n-7.25,1e10,2\n").unwrap();
    let first = load_matrix(&path, TableFormat::Csv).unwrap();
    assert_eq!((first.n(), first.p()), (3, 3));
    assert_eq!(first.values()[(0, 2)], 3e-7);

    let out = dir.path().join("y.tsv");
    let header: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    write_matrix(&first, fs::File::create(&out).unwrap(), TableFormat::Tsv, Some(&header)).unwrap();
    let second = load_matrix(&out, TableFormat::Tsv).unwrap();
    assert_eq!(first.values(), second.values());
}

#[test]
fn load_errors_carry_positions() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    let mut f = fs::File::create(&path).unwrap();
    writeln!(f, "1,2\n3,x\n5,6").unwrap();
    match load_matrix(&path, TableFormat::Csv) {
        Err(Error::MalformedInput { line, field, .. }) => assert_eq!((line, field), (2, 2)),
        other => panic!("unexpected {other:?}"),
    }

    fs::write(&path, "1,4\n1,5\n1,6\n").unwrap();
    assert!(matches!(
        load_matrix(&path, TableFormat::Csv),
        Err(Error::DegenerateData { column: 0 })
    ));

    let missing = dir.path().join("nope.csv");
    assert!(matches!(load_matrix(&missing, TableFormat::Csv), Err(Error::Io { .. })));
}

#[test]
fn covariance_round_trip() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("sigma.csv");
    let spec = cov_compound_symmetry(4, 0.3).unwrap();
    spec.write(fs::File::create(&path).unwrap(), TableFormat::Csv).unwrap();
    let back = CovarianceSpec::load(&path, TableFormat::Csv).unwrap();
    assert_eq!(spec, back);
}

#[test]
fn whitening_recovers_identity() {
    let sigma = CovarianceSpec::from_rows(&[
        vec![2.0, 0.6, -0.3],
        vec![0.6, 1.0, 0.2],
        vec![-0.3, 0.2, 0.5],
    ])
    .unwrap();
    let data = sample_mvn(&sigma, 10_000, 31).unwrap();
    let s = sample_covariance(&transform_null(&data, &sigma).unwrap());
    let worst = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .map(|(i, j)| (s[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.1, "{worst}");
}

proptest! {
    #[test]
    fn write_then_parse_is_identity(cells in prop::collection::vec(-1e6..1e6f64, 12)) {
        let rows: Vec<Vec<f64>> = cells.chunks(3).map(|c| c.to_vec()).collect();
        let data = DataMatrix::from_rows(&rows).unwrap();
        let mut buf = Vec::new();
        write_matrix(&data, &mut buf, TableFormat::Csv, None).unwrap();
        let parsed = mxpbf::dataio::parse_table(buf.as_slice(), TableFormat::Csv).unwrap();
        prop_assert_eq!(parsed, rows);
    }

    #[test]
    fn centering_is_idempotent(cells in prop::collection::vec(-50.0..50.0f64, 20)) {
        let data = DataMatrix::from_columns(&[cells[..10].to_vec(), cells[10..].to_vec()]).unwrap();
        let once = center_columns(&data);
        let twice = center_columns(&once);
        for (a, b) in once.values().iter().zip(twice.values().iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        prop_assert!(twice.is_centered());
    }
}
