//! Per-sample score vectors produced by scorers and propagation.

use crate::error::{Error, Result};

/// Scores for a batch of samples after `iteration` propagation steps.
///
/// `iteration == 0` marks raw scorer output. Values are finite by
/// construction: every constructor rejects NaN and infinities.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    values: Vec<f64>,
    iteration: usize,
}

impl ScoreVector {
    pub fn new(values: Vec<f64>, iteration: usize) -> Result<Self> {
        for (index, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteScore { index });
            }
        }
        Ok(ScoreVector { values, iteration })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest absolute componentwise difference to `other`.
    pub fn max_abs_diff(&self, other: &ScoreVector) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}
