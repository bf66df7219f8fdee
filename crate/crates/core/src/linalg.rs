//! Small dense linear-algebra helpers shared by the solvers.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;

use crate::error::{Error, Result};

/// Condition-number ceiling above which a Gram matrix is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Inverse of a symmetric positive-definite matrix via its eigendecomposition.
///
/// Fails with `SingularGram` when the smallest eigenvalue is not positive or
/// the condition number exceeds `max_cond`.
pub fn spd_inverse(m: &DMatrix<f64>, max_cond: f64) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let sym = symmetrize(m);
    let eig = sym.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) || !max.is_finite() {
        return Err(Error::SingularGram {
            cond: f64::INFINITY,
        });
    }
    let cond = max / min;
    if cond > max_cond {
        return Err(Error::SingularGram { cond });
    }
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    let inv = &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose();
    Ok(symmetrize(&inv))
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// True when `m` is symmetric (to `1e-10` relative) with a positive smallest eigenvalue.
pub fn is_spd(m: &DMatrix<f64>) -> bool {
    if !m.is_square() || m.nrows() == 0 {
        return false;
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > 1e-10 * scale {
        return false;
    }
    symmetrize(m).symmetric_eigen().eigenvalues.min() > 0.0
}

/// Upper-triangular `T` with `TᵀT = M` (transpose of the Cholesky factor).
pub fn upper_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = symmetrize(m).cholesky().ok_or(Error::NonSpdCoupling)?;
    Ok(chol.l().transpose())
}

/// Exact determinant of an integer matrix.
///
/// Fraction-free Bareiss elimination on `i128`, falling back to big integers
/// when an intermediate minor overflows.
pub fn integer_determinant(a: &DMatrix<i64>) -> BigInt {
    assert!(a.is_square(), "determinant of a non-square matrix");
    match bareiss_i128(a) {
        Some(d) => BigInt::from(d),
        None => bareiss_big(a),
    }
}

fn bareiss_i128(a: &DMatrix<i64>) -> Option<i128> {
    let n = a.nrows();
    if n == 0 {
        return Some(1);
    }
    let mut m: Vec<Vec<i128>> = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)] as i128).collect())
        .collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if m[k][k] == 0 {
            // singular: the big-integer path reports zero
            let swap = (k + 1..n).find(|&i| m[i][k] != 0)?;
            m.swap(k, swap);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = m[i][j]
                    .checked_mul(m[k][k])?
                    .checked_sub(m[i][k].checked_mul(m[k][j])?)?;
                m[i][j] = v / prev;
            }
        }
        prev = m[k][k];
    }
    Some(sign * m[n - 1][n - 1])
}

fn bareiss_big(a: &DMatrix<i64>) -> BigInt {
    let n = a.nrows();
    let mut m: Vec<Vec<BigInt>> = (0..n)
        .map(|i| (0..n).map(|j| BigInt::from(a[(i, j)])).collect())
        .collect();
    let zero = BigInt::from(0);
    let mut sign = 1i32;
    let mut prev = BigInt::from(1);
    for k in 0..n.saturating_sub(1) {
        if m[k][k] == zero {
            match (k + 1..n).find(|&i| m[i][k] != zero) {
                Some(swap) => {
                    m.swap(k, swap);
                    sign = -sign;
                }
                None => return zero,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                m[i][j] = v / &prev;
            }
        }
        prev = m[k][k].clone();
    }
    if n == 0 {
        return BigInt::from(1);
    }
    if sign < 0 {
        -m[n - 1][n - 1].clone()
    } else {
        m[n - 1][n - 1].clone()
    }
}

/// Parses a whitespace-separated matrix, one row per line. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| Error::Config {
                    location: format!("line {}", lineno + 1),
                    message: format!("cannot parse '{tok}' as a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Config {
                    location: format!("line {}", lineno + 1),
                    message: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Config {
            location: "input".into(),
            message: "matrix file contains no rows".into(),
        });
    }
    let ncols = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_matrix(&text)
}

/// Formats a matrix in the same whitespace-separated layout `parse_matrix` reads.
pub fn format_matrix<T: std::fmt::Display + nalgebra::Scalar>(m: &DMatrix<T>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn ones(k: usize) -> DVector<f64> {
    DVector::from_element(k, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spd_inverse_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0]));
        let inv = spd_inverse(&m, MAX_CONDITION).unwrap();
        assert!((inv[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((inv[(1, 1)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn spd_inverse_rejects_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            spd_inverse(&m, MAX_CONDITION),
            Err(Error::SingularGram { .. })
        ));
    }

    #[test]
    fn upper_factor_reconstructs() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let t = upper_factor(&m).unwrap();
        assert!((t.transpose() * &t - &m).amax() < 1e-12);
        assert_eq!(t[(1, 0)], 0.0);
    }

    #[test]
    fn integer_determinant_small_cases() {
        let a = DMatrix::from_row_slice(2, 2, &[1i64, -1, 0, 1]);
        assert_eq!(integer_determinant(&a), BigInt::from(1));
        let b = DMatrix::from_row_slice(3, 3, &[0i64, 1, 0, 1, 0, 0, 0, 0, 1]);
        assert_eq!(integer_determinant(&b), BigInt::from(-1));
        let c = DMatrix::from_row_slice(2, 2, &[2i64, 4, 1, 2]);
        assert_eq!(integer_determinant(&c), BigInt::from(0));
    }

    #[test]
    fn integer_determinant_big_fallback_agrees() {
        let a = DMatrix::from_fn(4, 4, |i, j| {
            ((i * 7 + j * 3) % 5) as i64 - 2 + (i == j) as i64 * 3
        });
        let small = bareiss_i128(&a).unwrap();
        assert_eq!(bareiss_big(&a), BigInt::from(small));
    }

    #[test]
    fn parse_matrix_roundtrip_and_errors() {
        let m = parse_matrix("# comment\n1 2\n3 4\n\n").unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(parse_matrix(&format_matrix(&m)).unwrap(), m);
        assert!(parse_matrix("1 2\n3").is_err());
        assert!(parse_matrix("1 x").is_err());
        assert!(parse_matrix("").is_err());
    }
}
