//! Loading, validating, centering and null-transforming observation matrices.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Delimited text layout accepted by [`load_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Tsv,
}

impl TableFormat {
    pub fn delimiter(self) -> u8 {
        match self {
            TableFormat::Csv => b',',
            TableFormat::Tsv => b'\t',
        }
    }

    /// Guess from the file extension; anything other than `.tsv`/`.tab` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("tsv") || ext.eq_ignore_ascii_case("tab") => {
                TableFormat::Tsv
            }
            _ => TableFormat::Csv,
        }
    }
}

/// An `n x p` observation matrix: rows are observations, columns variables.
///
/// Construction rejects non-finite cells and all-zero columns, since every
/// downstream Bayes factor divides by a column norm. Constant columns are
/// additionally rejected by [`load_matrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    centered: bool,
}

impl DataMatrix {
    /// Wrap an `n x p` matrix. Requires `n >= 2`, `p >= 1`, finite entries and
    /// no all-zero column.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let (n, p) = values.shape();
        if n < 2 {
            return Err(Error::InvalidSampleSize {
                n,
                reason: "at least two observations are required".into(),
            });
        }
        if p == 0 {
            return Err(Error::param("p", "matrix has no columns"));
        }
        for (j, col) in values.column_iter().enumerate() {
            if let Some(k) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::MalformedInput {
                    line: k + 1,
                    field: j + 1,
                    message: "non-finite value".into(),
                });
            }
            if col.iter().all(|&v| v == 0.0) {
                return Err(Error::DegenerateData { column: j });
            }
        }
        Ok(Self {
            values,
            centered: false,
        })
    }

    /// Build from row-major observations.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        for (k, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::MalformedInput {
                    line: k + 1,
                    field: r.len().min(p) + 1,
                    message: format!("expected {p} fields, found {}", r.len()),
                });
            }
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    /// Build from column vectors.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let p = cols.len();
        let n = cols.first().map_or(0, Vec::len);
        if let Some(j) = cols.iter().position(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: cols[j].len(),
            });
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| cols[j][i]))
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Contiguous view of column `j` (storage is column-major).
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.values.as_slice()[j * n..(j + 1) * n]
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    /// Subset of observations, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let n = self.n();
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad,
            });
        }
        let sub = DMatrix::from_fn(rows.len(), self.p(), |i, j| self.values[(rows[i], j)]);
        let mut out = Self::new(sub)?;
        out.centered = false;
        Ok(out)
    }

    /// Subset of variables, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let p = self.p();
        if let Some(&bad) = cols.iter().find(|&&c| c >= p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: bad,
            });
        }
        let sub = DMatrix::from_fn(self.n(), cols.len(), |i, j| self.values[(i, cols[j])]);
        Ok(Self {
            values: sub,
            centered: self.centered,
        })
    }
}

/// Symmetric `p x p` covariance matrix, positive definite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec {
    entries: DMatrix<f64>,
}

impl CovarianceSpec {
    /// Validate symmetry (exact) and positive definiteness (Cholesky).
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (r, c) = entries.shape();
        if r != c {
            return Err(Error::DimensionMismatch {
                expected: r,
                found: c,
            });
        }
        if r == 0 {
            return Err(Error::InvalidCovariance("empty matrix".into()));
        }
        for i in 0..r {
            for j in (i + 1)..r {
                if entries[(i, j)] != entries[(j, i)] {
                    return Err(Error::InvalidCovariance(format!(
                        "not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCovariance("non-finite entry".into()));
        }
        if entries.clone().cholesky().is_none() {
            return Err(Error::InvalidCovariance("not positive definite".into()));
        }
        Ok(Self { entries })
    }

    pub fn identity(p: usize) -> Self {
        Self {
            entries: DMatrix::identity(p, p),
        }
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        let p = d.len();
        Self::new(DMatrix::from_fn(p, p, |i, j| if i == j { d[i] } else { 0.0 }))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: r.len(),
            });
        }
        Self::new(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
    }

    pub fn p(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.entries)
    }

    /// Load a full covariance matrix from a delimited table.
    pub fn load(path: &Path, format: TableFormat) -> Result<Self> {
        let rows = read_table(path, format)?;
        Self::from_rows(&rows)
    }

    pub fn write<W: Write>(&self, out: W, format: TableFormat) -> std::io::Result<()> {
        write_delimited(&self.entries, out, format, None)
    }
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parse a rectangular numeric table. A first line whose first token is not
/// numeric is treated as a header and skipped.
pub fn parse_table<R: Read>(input: R, format: TableFormat) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(format.delimiter())
        .trim(csv::Trim::All)
        .from_reader(input);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (k, rec) in reader.records().enumerate() {
        let line = k + 1;
        let rec = rec.map_err(|e| Error::MalformedInput {
            line,
            field: 0,
            message: e.to_string(),
        })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if k == 0 && rec.get(0).is_some_and(|t| t.parse::<f64>().is_err()) {
            continue;
        }
        let expected = *width.get_or_insert(rec.len());
        if rec.len() != expected {
            return Err(Error::MalformedInput {
                line,
                field: rec.len().min(expected) + 1,
                message: format!("expected {expected} fields, found {}", rec.len()),
            });
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(f, tok)| match tok.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::MalformedInput {
                    line,
                    field: f + 1,
                    message: format!("cannot parse {tok:?} as a finite number"),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::MalformedInput {
            line: 1,
            field: 1,
            message: "no data rows".into(),
        });
    }
    Ok(rows)
}

fn read_table(path: &Path, format: TableFormat) -> Result<Vec<Vec<f64>>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    parse_table(std::io::BufReader::new(file), format)
}

/// Read an observation matrix. The result is not centered. Columns with zero
/// sample variance are rejected.
pub fn load_matrix(path: &Path, format: TableFormat) -> Result<DataMatrix> {
    let data = DataMatrix::from_rows(&read_table(path, format)?)?;
    reject_constant_columns(&data)?;
    Ok(data)
}

/// Error on the first column whose entries are all equal.
pub fn reject_constant_columns(data: &DataMatrix) -> Result<()> {
    for j in 0..data.p() {
        let col = data.column(j);
        if col.iter().all(|&v| v == col[0]) {
            return Err(Error::DegenerateData { column: j });
        }
    }
    Ok(())
}

/// Write observations row by row. Values use the shortest representation
/// that parses back to the same `f64`.
pub fn write_matrix<W: Write>(
    data: &DataMatrix,
    out: W,
    format: TableFormat,
    header: Option<&[String]>,
) -> std::io::Result<()> {
    write_delimited(&data.values, out, format, header)
}

fn write_delimited<W: Write>(
    m: &DMatrix<f64>,
    mut out: W,
    format: TableFormat,
    header: Option<&[String]>,
) -> std::io::Result<()> {
    let sep = format.delimiter() as char;
    let mut line = String::new();
    if let Some(h) = header {
        writeln!(out, "{}", h.join(&sep.to_string()))?;
    }
    for i in 0..m.nrows() {
        line.clear();
        for j in 0..m.ncols() {
            if j > 0 {
                line.push(sep);
            }
            line.push_str(&m[(i, j)].to_string());
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()
}

/// Subtract each column's mean. Idempotent up to rounding.
pub fn center_columns(data: &DataMatrix) -> DataMatrix {
    let mut values = data.values.clone();
    let n = values.nrows() as f64;
    for mut col in values.column_iter_mut() {
        let mean = col.iter().sum::<f64>() / n;
        col.iter_mut().for_each(|v| *v -= mean);
    }
    DataMatrix {
        values,
        centered: true,
    }
}

/// Map each observation `x` to `sigma0^{-1/2} x`, using the inverse of the
/// symmetric square root. Testing `Sigma = sigma0` on the input is testing
/// `Sigma = I` on the output.
pub fn transform_null(data: &DataMatrix, sigma0: &CovarianceSpec) -> Result<DataMatrix> {
    if sigma0.p() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            found: sigma0.p(),
        });
    }
    let eig = SymmetricEigen::new(sigma0.entries.clone());
    if let Some(&bad) = eig.eigenvalues.iter().find(|&&l| !(l > 0.0)) {
        return Err(Error::InvalidCovariance(format!(
            "eigenvalue {bad} is not positive"
        )));
    }
    let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    let q = &eig.eigenvectors;
    let w = q * DMatrix::from_diagonal(&inv_sqrt) * q.transpose();
    // Rows are observations, so X -> X W^T, and W is symmetric.
    let values = &data.values * &w;
    let mut out = DataMatrix::new(values)?;
    out.centered = data.centered;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn parse(s: &str) -> Result<DataMatrix> {
        let d = DataMatrix::from_rows(&parse_table(s.as_bytes(), TableFormat::Csv)?)?;
        reject_constant_columns(&d)?;
        Ok(d)
    }

    #[test]
    fn parses_small_csv() {
        let d = parse("1,0\n0,1\n1,1").unwrap();
        assert_eq!((d.n(), d.p()), (3, 2));
        assert!(!d.is_centered());
        assert_eq!(d.column(1), &[0.0, 1.0, 1.0]);
    }

    #[test]
    fn header_is_skipped() {
        let d = parse("a,b\n1,0\n0,1\n1,1\n").unwrap();
        assert_eq!((d.n(), d.p()), (3, 2));
    }

    #[test]
    fn tsv_is_supported() {
        let rows = parse_table("1\t2\n3\t5\n".as_bytes(), TableFormat::Tsv).unwrap();
        assert_eq!(rows, vec![vec![1.0, 2.0], vec![3.0, 5.0]]);
    }

    #[test]
    fn constant_column_is_degenerate() {
        let err = parse("1,5.0\n2,5.0\n3,5.0").unwrap_err();
        assert!(matches!(err, Error::DegenerateData { column: 1 }), "{err}");
    }

    #[test]
    fn zero_column_rejected_at_construction() {
        let err = DataMatrix::from_columns(&[vec![1., 2.], vec![0., 0.]]).unwrap_err();
        assert!(matches!(err, Error::DegenerateData { column: 1 }));
        // constant but nonzero columns are fine outside of file loading
        assert!(DataMatrix::from_columns(&[vec![1., 1.], vec![0., 3.]]).is_ok());
    }

    #[test]
    fn ragged_rows_are_malformed() {
        let err = parse("1,2,3\n4,5\n").unwrap_err();
        assert!(
            matches!(err, Error::MalformedInput { line: 2, field: 3, .. }),
            "{err}"
        );
    }

    #[test]
    fn missing_cell_is_malformed() {
        let err = parse("1,2\n3,\n4,6").unwrap_err();
        assert!(matches!(err, Error::MalformedInput { line: 2, field: 2, .. }), "{err}");
    }

    #[test]
    fn centering() {
        let d = DataMatrix::from_columns(&[vec![1., 2., 3.]]).unwrap();
        assert_eq!(center_columns(&d).column(0), &[-1.0, 0.0, 1.0]);

        let d = DataMatrix::from_columns(&[vec![-1., 1.]]).unwrap();
        assert_eq!(center_columns(&d).column(0), &[-1.0, 1.0]);

        let d = DataMatrix::from_columns(&[vec![10., 20., 40., 50.]]).unwrap();
        let c = center_columns(&d);
        assert!(c.is_centered());
        assert_eq!(c.column(0), &[-20.0, -10.0, 10.0, 20.0]);
    }

    #[test]
    fn null_transform_examples() {
        let d = DataMatrix::from_rows(&[vec![2.0, 3.0], vec![1.0, -1.0]]).unwrap();

        let same = transform_null(&d, &CovarianceSpec::identity(2)).unwrap();
        for (a, b) in same.values().iter().zip(d.values().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }

        let scaled = transform_null(&d, &CovarianceSpec::diagonal(&[4.0, 9.0]).unwrap()).unwrap();
        assert_abs_diff_eq!(scaled.values()[(0, 0)], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(scaled.values()[(0, 1)], 1.0, epsilon = 1e-14);

        // (1,1)/sqrt2 is an eigenvector of [[2,1],[1,2]] with eigenvalue 3.
        let d = DataMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let s0 = CovarianceSpec::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let t = transform_null(&d, &s0).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(t.values()[(0, 0)], r, epsilon = 1e-14);
        assert_abs_diff_eq!(t.values()[(0, 1)], r, epsilon = 1e-14);
    }

    #[test]
    fn non_pd_sigma0_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            CovarianceSpec::new(m),
            Err(Error::InvalidCovariance(_))
        ));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let d = DataMatrix::from_rows(&[vec![2.0, 3.0], vec![1.0, -1.0]]).unwrap();
        let err = transform_null(&d, &CovarianceSpec::identity(3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn asymmetric_covariance_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.2, 1.0]);
        assert!(CovarianceSpec::new(m).is_err());
    }
}
