use nalgebra::DVector;

use crate::error::{Error, Result};

/// Tolerance on `|∏ d_i − 1|` accepted for a power vector.
pub const PRODUCT_TOL: f64 = 1e-9;

/// Diagonal of the power-scaling matrix `D`: strictly positive with unit product.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerVector(DVector<f64>);

impl PowerVector {
    pub fn new(d: DVector<f64>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::InvalidArgument(
                "power vector must be non-empty".into(),
            ));
        }
        if d.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::NonPositiveInput(format!(
                "power vector {:?}",
                d.as_slice()
            )));
        }
        let prod = d.iter().product::<f64>();
        if (prod - 1.0).abs() > PRODUCT_TOL {
            return Err(Error::InvalidArgument(format!(
                "power vector product is {prod}, expected 1"
            )));
        }
        Ok(PowerVector(d))
    }

    pub fn from_slice(d: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(d))
    }

    /// The equal-power point `d = 1`.
    pub fn ones(k: usize) -> Self {
        PowerVector(DVector::from_element(k, 1.0))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn product(&self) -> f64 {
        self.0.iter().product()
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    /// Wraps a vector already known to be positive with unit product.
    pub(crate) fn from_normalized(d: DVector<f64>) -> Self {
        debug_assert!(d.iter().all(|&v| v > 0.0));
        PowerVector(d)
    }
}

impl AsRef<[f64]> for PowerVector {
    fn as_ref(&self) -> &[f64] {
        self.as_slice()
    }
}
