//! Gaussian states and the additive-noise state-space model interface.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::linalg;

/// Conditional mean and covariance at time index `timestamp`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub timestamp: usize,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        Self::at(mean, covariance, 0)
    }

    pub fn at(mean: DVector<f64>, covariance: DMatrix<f64>, timestamp: usize) -> Result<Self> {
        check_dim("covariance rows", mean.len(), covariance.nrows())?;
        check_dim("covariance cols", mean.len(), covariance.ncols())?;
        Ok(Self {
            mean,
            covariance,
            timestamp,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Lower-triangular covariance factor.
    pub fn factor(&self) -> Result<DMatrix<f64>> {
        linalg::factor_spd(&self.covariance)
    }
}

/// Additive-noise model `x' = f_k(x) + w`, `z = h_k(x) + v`.
///
/// Jacobians are optional; they are only used by the extended filter.
pub trait StateSpaceModel: Sync {
    fn state_dim(&self) -> usize;
    fn measurement_dim(&self) -> usize;
    fn transition(&self, k: usize, x: &DVector<f64>) -> DVector<f64>;
    fn measure(&self, k: usize, x: &DVector<f64>) -> DVector<f64>;
    fn process_noise(&self, k: usize) -> DMatrix<f64>;
    fn measurement_noise(&self, k: usize) -> DMatrix<f64>;

    /// Measurement components that are angles and wrap on `(−π, π]`.
    fn angular_measurement_dims(&self) -> &[usize] {
        &[]
    }

    fn transition_jacobian(&self, _k: usize, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    fn measurement_jacobian(&self, _k: usize, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

/// `x' = F·x + w`, `z = H·x + v` with constant matrices.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub transition: DMatrix<f64>,
    pub observation: DMatrix<f64>,
    pub process_noise: DMatrix<f64>,
    pub measurement_noise: DMatrix<f64>,
}

impl LinearModel {
    pub fn new(
        transition: DMatrix<f64>,
        observation: DMatrix<f64>,
        process_noise: DMatrix<f64>,
        measurement_noise: DMatrix<f64>,
    ) -> Result<Self> {
        let n = transition.nrows();
        check_dim("transition cols", n, transition.ncols())?;
        check_dim("observation cols", n, observation.ncols())?;
        check_dim("process noise", n, process_noise.nrows())?;
        check_dim("measurement noise", observation.nrows(), measurement_noise.nrows())?;
        Ok(Self {
            transition,
            observation,
            process_noise,
            measurement_noise,
        })
    }
}

impl StateSpaceModel for LinearModel {
    fn state_dim(&self) -> usize {
        self.transition.nrows()
    }

    fn measurement_dim(&self) -> usize {
        self.observation.nrows()
    }

    fn transition(&self, _k: usize, x: &DVector<f64>) -> DVector<f64> {
        &self.transition * x
    }

    fn measure(&self, _k: usize, x: &DVector<f64>) -> DVector<f64> {
        &self.observation * x
    }

    fn process_noise(&self, _k: usize) -> DMatrix<f64> {
        self.process_noise.clone()
    }

    fn measurement_noise(&self, _k: usize) -> DMatrix<f64> {
        self.measurement_noise.clone()
    }

    fn transition_jacobian(&self, _k: usize, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.transition.clone())
    }

    fn measurement_jacobian(&self, _k: usize, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.observation.clone())
    }
}

/// Maps an angle onto `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Wraps the listed components of `v` in place.
pub fn wrap_components(v: &mut DVector<f64>, dims: &[usize]) {
    for &i in dims {
        v[i] = wrap_angle(v[i]);
    }
}

/// Moves each listed component of `v` to the branch nearest `reference`.
///
/// Applied to measurement images before moment accumulation so that points
/// straddling the ±π cut average correctly.
pub fn unwrap_components(v: &mut DVector<f64>, reference: &DVector<f64>, dims: &[usize]) {
    for &i in dims {
        v[i] = reference[i] + wrap_angle(v[i] - reference[i]);
    }
}
