//! Hilbert projective metric on the positive cone and the `Γ` projection onto
//! the unit-product surface.

use nalgebra::DVector;

use super::power::PowerVector;
use crate::error::{Error, Result};

fn check_positive(x: &[f64], what: &str) -> Result<()> {
    if x.is_empty() || x.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::NonPositiveInput(format!("{what}: {x:?}")));
    }
    Ok(())
}

/// `log(max(x ⊘ y) / min(x ⊘ y))`, evaluated on log-ratios.
pub fn hilbert_metric(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "hilbert_metric on vectors of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    check_positive(x, "x")?;
    check_positive(y, "y")?;
    Ok(hilbert_unchecked(x, y))
}

pub(crate) fn hilbert_unchecked(x: &[f64], y: &[f64]) -> f64 {
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for (a, b) in x.iter().zip(y) {
        let r = a.ln() - b.ln();
        hi = hi.max(r);
        lo = lo.min(r);
    }
    (hi - lo).max(0.0)
}

/// Scales `x` onto `∏ d_i = 1`: the unique point of the ray through `x`
/// on that surface. Computed in the log domain.
pub fn gamma_normalize(x: &[f64]) -> Result<PowerVector> {
    check_positive(x, "gamma_normalize")?;
    Ok(gamma_unchecked(x))
}

pub(crate) fn gamma_unchecked(x: &[f64]) -> PowerVector {
    let logs: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    PowerVector::from_normalized(DVector::from_iterator(
        x.len(),
        logs.iter().map(|l| (l - mean).exp()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_examples() {
        assert_eq!(hilbert_metric(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), 0.0);
        let v = hilbert_metric(&[1.0, 2.0], &[2.0, 1.0]).unwrap();
        assert!((v - 4f64.ln()).abs() < 1e-12);
        assert!((v - 1.386294).abs() < 1e-6);
        assert_eq!(hilbert_metric(&[1.0; 3], &[1.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn metric_rejects_nonpositive() {
        assert!(matches!(
            hilbert_metric(&[1.0, 0.0], &[1.0, 1.0]),
            Err(Error::NonPositiveInput(_))
        ));
        assert!(hilbert_metric(&[1.0, -1.0], &[1.0, 1.0]).is_err());
        assert!(hilbert_metric(&[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn gamma_examples() {
        let d = gamma_normalize(&[4.0, 1.0]).unwrap();
        assert!((d.as_slice()[0] - 2.0).abs() < 1e-15);
        assert!((d.as_slice()[1] - 0.5).abs() < 1e-15);
        assert_eq!(gamma_normalize(&[1.0; 4]).unwrap().as_slice(), &[1.0; 4]);
        for c in [1e-3, 0.7, 5.0, 1e4] {
            let d = gamma_normalize(&[c, c, c]).unwrap();
            assert!(d.as_slice().iter().all(|&v| (v - 1.0).abs() < 1e-14));
        }
        assert!(gamma_normalize(&[1.0, 0.0]).is_err());
    }
}
