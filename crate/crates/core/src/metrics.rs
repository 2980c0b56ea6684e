//! Accuracy and consistency metrics: squared errors, NEES, RMSE and ANEES.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::model::GaussianState;

/// Runs whose NEES exceeds this at any step are counted as divergent.
pub const DIVERGENCE_NEES: f64 = 1e6;

/// Divisor used when averaging over the time steps of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Divide by the number of summed terms, `T + 1`.
    #[default]
    TermCount,
    /// Divide by the final time index `T`.
    Horizon,
}

impl Normalization {
    pub fn divisor(self, terms: usize) -> f64 {
        match self {
            Normalization::TermCount => terms as f64,
            Normalization::Horizon => terms.saturating_sub(1).max(1) as f64,
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Per-step errors of one estimated track.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    /// `squared_errors[k][i]` is `(x_k[i] − x̂_k[i])²`.
    pub squared_errors: Vec<Vec<f64>>,
    pub nees: Vec<f64>,
}

/// Normalized estimation error squared, `eᵀP⁻¹e`; infinite for a singular `P`.
pub fn nees(truth: &DVector<f64>, estimate: &GaussianState) -> f64 {
    let e = truth - &estimate.mean;
    match estimate.covariance.clone().cholesky() {
        Some(ch) => e.dot(&ch.solve(&e)),
        None => f64::INFINITY,
    }
}

/// Squared errors and NEES of `estimates` against `truth`, step by step.
pub fn evaluate_track(truth: &[DVector<f64>], estimates: &[GaussianState]) -> RunMetrics {
    let mut squared_errors = Vec::with_capacity(estimates.len());
    let mut values = Vec::with_capacity(estimates.len());
    for (x, est) in truth.iter().zip(estimates) {
        squared_errors.push((x - &est.mean).iter().map(|e| e * e).collect());
        values.push(nees(x, est));
    }
    RunMetrics {
        squared_errors,
        nees: values,
    }
}

impl RunMetrics {
    pub fn steps(&self) -> usize {
        self.nees.len()
    }

    /// Per-component `sqrt(Σ_k e²/d)`.
    pub fn rmse(&self, normalization: Normalization) -> Vec<f64> {
        let dim = self.squared_errors.first().map_or(0, Vec::len);
        let d = normalization.divisor(self.steps());
        (0..dim)
            .map(|i| {
                let mut acc = CompensatedSum::default();
                for row in &self.squared_errors {
                    acc.add(row[i]);
                }
                (acc.total() / d).sqrt()
            })
            .collect()
    }

    pub fn anees(&self, normalization: Normalization) -> f64 {
        let mut acc = CompensatedSum::default();
        for &v in &self.nees {
            acc.add(v);
        }
        acc.total() / normalization.divisor(self.steps())
    }

    pub fn is_divergent(&self) -> bool {
        self.nees.iter().any(|v| !v.is_finite() || *v > DIVERGENCE_NEES)
            || self
                .squared_errors
                .iter()
                .flatten()
                .any(|v| !v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn nees_of_known_error() {
        let est = GaussianState::new(
            DVector::from_vec(vec![0.0, 0.0]),
            DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0])),
        )
        .unwrap();
        let x = DVector::from_vec(vec![2.0, 3.0]);
        assert!((nees(&x, &est) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn normalization_conventions() {
        let m = RunMetrics {
            squared_errors: vec![vec![1.0], vec![3.0], vec![5.0]],
            nees: vec![2.0, 4.0, 6.0],
        };
        assert!((m.anees(Normalization::TermCount) - 4.0).abs() < 1e-15);
        assert!((m.anees(Normalization::Horizon) - 6.0).abs() < 1e-15);
        assert!((m.rmse(Normalization::TermCount)[0] - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn divergence_rule() {
        let mut m = RunMetrics {
            squared_errors: vec![vec![1.0]],
            nees: vec![2e6],
        };
        assert!(m.is_divergent());
        m.nees[0] = f64::NAN;
        assert!(m.is_divergent());
        m.nees[0] = 3.0;
        assert!(!m.is_divergent());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::default();
        for v in [1.0, 1e100, 1.0, -1e100] {
            acc.add(v);
        }
        assert_eq!(acc.total(), 2.0);
    }
}
