use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseKind {
    Continuous,
    Binary,
}

/// Design matrix plus response: the unit every estimator consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    kind: ResponseKind,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, kind: ResponseKind) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::dims(format!(
                "design has {} rows but response has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite values"));
        }
        if kind == ResponseKind::Binary && y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid("binary response must be 0 or 1"));
        }
        Ok(Self { x, y, kind })
    }

    pub fn continuous(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        Self::new(x, y, ResponseKind::Continuous)
    }

    pub fn binary(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        Self::new(x, y, ResponseKind::Binary)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn kind(&self) -> ResponseKind {
        self.kind
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of columns in the design.
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// `XᵀX`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.x.tr_mul(&self.x)
    }

    /// `Xᵀy`.
    pub fn xty(&self) -> DVector<f64> {
        self.x.tr_mul(&self.y)
    }

    /// Copy of the dataset with a leading column of ones.
    pub fn with_intercept(&self) -> Self {
        let n = self.n();
        let x = self.x.clone().insert_column(0, 1.0);
        debug_assert_eq!(x.nrows(), n);
        Self {
            x,
            y: self.y.clone(),
            kind: self.kind,
        }
    }

    /// Estimator entry points need `p < N`.
    pub(crate) fn require_overdetermined(&self) -> Result<()> {
        if self.p() == 0 {
            return Err(Error::invalid("design has no columns"));
        }
        if self.p() >= self.n() {
            return Err(Error::invalid(format!(
                "need more observations than columns (N = {}, p = {})",
                self.n(),
                self.p()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_binary_labels() {
        let x = DMatrix::from_element(2, 1, 1.0);
        let y = DVector::from_vec(vec![0.0, 0.5]);
        assert!(Dataset::binary(x, y).is_err());
    }

    #[test]
    fn intercept_is_prepended() {
        let x = DMatrix::from_row_slice(2, 1, &[3.0, 4.0]);
        let d = Dataset::continuous(x, DVector::from_vec(vec![1.0, 2.0])).unwrap();
        let d1 = d.with_intercept();
        assert_eq!(d1.p(), 2);
        assert_eq!(d1.x()[(0, 0)], 1.0);
        assert_eq!(d1.x()[(1, 1)], 4.0);
    }
}
