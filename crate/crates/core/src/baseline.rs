//! Comparison filters: exact Kalman filter with its RTS smoother, the extended
//! Kalman filter and the scaled unscented Kalman filter.
//!
//! The extended and unscented predictors return a [`PredictionResult`] with the
//! cross-covariance filled in, so [`crate::gaussian::smooth`] works for them too.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gaussian::PredictionResult;
use crate::linalg::{factor_psd, right_divide_spd, symmetrize};
use crate::model::{unwrap_components, wrap_angle, wrap_components, GaussianState, StateSpaceModel};

pub fn kf_predict(state: &GaussianState, f: &DMatrix<f64>, q: &DMatrix<f64>) -> GaussianState {
    GaussianState {
        mean: f * &state.mean,
        covariance: symmetrize(&(f * &state.covariance * f.transpose() + q)),
        timestamp: state.timestamp + 1,
    }
}

pub fn kf_update(
    state: &GaussianState,
    z: &DVector<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<GaussianState> {
    check_dim("measurement dimension", h.nrows(), z.len())?;
    let s = h * &state.covariance * h.transpose() + r;
    let pxz = &state.covariance * h.transpose();
    let gain = right_divide_spd(&pxz, &s).ok_or(Error::InnovationCovSingular)?;
    Ok(GaussianState {
        mean: &state.mean + &gain * (z - h * &state.mean),
        covariance: symmetrize(&(&state.covariance - &gain * s * gain.transpose())),
        timestamp: state.timestamp,
    })
}

/// Predict then update.
pub fn kf_step(
    state: &GaussianState,
    z: &DVector<f64>,
    f: &DMatrix<f64>,
    h: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<GaussianState> {
    kf_update(&kf_predict(state, f, q), z, h, r)
}

/// Classical RTS smoother; `predicted[m]` is the prediction made from `filtered[m]`.
pub fn rts_smooth(
    filtered: &[GaussianState],
    predicted: &[GaussianState],
    f: &DMatrix<f64>,
) -> Result<Vec<GaussianState>> {
    let mut out = filtered.to_vec();
    if filtered.is_empty() {
        return Err(Error::EmptyInput("filtered sequence"));
    }
    for m in (0..filtered.len() - 1).rev() {
        let pred = predicted
            .get(m)
            .ok_or(Error::MissingCrossCov { step: m })?;
        let gain = right_divide_spd(&(&filtered[m].covariance * f.transpose()), &pred.covariance)
            .ok_or(Error::PredictedCovSingular { step: m })?;
        let next = &out[m + 1];
        out[m] = GaussianState {
            mean: &filtered[m].mean + &gain * (&next.mean - &pred.mean),
            covariance: symmetrize(
                &(&filtered[m].covariance
                    - &gain * (&pred.covariance - &next.covariance) * gain.transpose()),
            ),
            timestamp: filtered[m].timestamp,
        };
    }
    Ok(out)
}

/// Where the extended filter takes its Jacobians from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JacobianMode {
    /// Model-provided; fails when the model has none.
    Analytic,
    Numeric,
    /// Model-provided when available, numeric otherwise.
    #[default]
    Auto,
}

/// Central-difference Jacobian with step `max(1e-6, 1e-6·|xᵢ|)`.
///
/// Differences of the listed angular output components are wrapped.
pub fn numeric_jacobian<G>(g: G, x: &DVector<f64>, angular: &[usize]) -> DMatrix<f64>
where
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x.len();
    let mut columns = Vec::with_capacity(n);
    for i in 0..n {
        let step = (1e-6 * x[i].abs()).max(1e-6);
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus[i] += step;
        minus[i] -= step;
        let mut d = g(&plus) - g(&minus);
        for &a in angular {
            d[a] = wrap_angle(d[a]);
        }
        columns.push(d / (2.0 * step));
    }
    DMatrix::from_columns(&columns)
}

fn jacobian(
    analytic: Option<DMatrix<f64>>,
    numeric: impl FnOnce() -> DMatrix<f64>,
    mode: JacobianMode,
    which: &'static str,
) -> Result<DMatrix<f64>> {
    let j = match (mode, analytic) {
        (JacobianMode::Analytic, None) => return Err(Error::JacobianUnavailable(which)),
        (JacobianMode::Analytic | JacobianMode::Auto, Some(j)) => j,
        (JacobianMode::Numeric, _) | (JacobianMode::Auto, None) => numeric(),
    };
    if j.iter().all(|v| v.is_finite()) {
        Ok(j)
    } else {
        Err(Error::JacobianUnavailable(which))
    }
}

pub fn ekf_predict(
    state: &GaussianState,
    model: &dyn StateSpaceModel,
    mode: JacobianMode,
) -> Result<PredictionResult> {
    let k = state.timestamp;
    let fj = jacobian(
        model.transition_jacobian(k, &state.mean),
        || numeric_jacobian(|x| model.transition(k, x), &state.mean, &[]),
        mode,
        "transition",
    )?;
    let cross = &state.covariance * fj.transpose();
    Ok(PredictionResult {
        predicted: GaussianState {
            mean: model.transition(k, &state.mean),
            covariance: symmetrize(&(&fj * &cross + model.process_noise(k))),
            timestamp: k + 1,
        },
        cross_cov: Some(cross),
        iterations: 0,
        factor_fallbacks: 0,
    })
}

pub fn ekf_update(
    state: &GaussianState,
    z: &DVector<f64>,
    model: &dyn StateSpaceModel,
    mode: JacobianMode,
) -> Result<GaussianState> {
    check_dim("measurement dimension", model.measurement_dim(), z.len())?;
    let k = state.timestamp;
    let angular = model.angular_measurement_dims();
    let hj = jacobian(
        model.measurement_jacobian(k, &state.mean),
        || numeric_jacobian(|x| model.measure(k, x), &state.mean, angular),
        mode,
        "measurement",
    )?;
    let pxz = &state.covariance * hj.transpose();
    let s = &hj * &pxz + model.measurement_noise(k);
    let gain = right_divide_spd(&pxz, &s).ok_or(Error::InnovationCovSingular)?;
    let mut innovation = z - model.measure(k, &state.mean);
    wrap_components(&mut innovation, angular);
    Ok(GaussianState {
        mean: &state.mean + &gain * innovation,
        covariance: symmetrize(&(&state.covariance - &gain * s * gain.transpose())),
        timestamp: k,
    })
}

pub fn ekf_step(
    state: &GaussianState,
    z: &DVector<f64>,
    model: &dyn StateSpaceModel,
    mode: JacobianMode,
) -> Result<GaussianState> {
    ekf_update(&ekf_predict(state, model, mode)?.predicted, z, model, mode)
}

/// Scaling of the unscented transform, `λ = α²(n + κ) − n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UkfParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl UkfParams {
    /// `α = 0.5`, `β = 2`, `κ = 3 − n`.
    pub fn default_for(n: usize) -> Self {
        Self {
            alpha: 0.5,
            beta: 2.0,
            kappa: 3.0 - n as f64,
        }
    }

    pub fn lambda(&self, n: usize) -> f64 {
        self.alpha * self.alpha * (n as f64 + self.kappa) - n as f64
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "UKF alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        let n_plus_lambda = n as f64 + self.lambda(n);
        if !(n_plus_lambda > 0.0) {
            return Err(Error::InvalidScaling { n_plus_lambda });
        }
        Ok(())
    }
}

struct SigmaPoints {
    points: Vec<DVector<f64>>,
    mean_weights: Vec<f64>,
    cov_weights: Vec<f64>,
}

fn sigma_points(state: &GaussianState, params: &UkfParams) -> Result<SigmaPoints> {
    let n = state.dim();
    params.validate(n)?;
    let lambda = params.lambda(n);
    let scale = (n as f64 + lambda).sqrt();
    let (factor, _) = factor_psd(&state.covariance)?;
    let spread = factor * scale;
    let mut points = Vec::with_capacity(2 * n + 1);
    points.push(state.mean.clone());
    for i in 0..n {
        points.push(&state.mean + spread.column(i));
    }
    for i in 0..n {
        points.push(&state.mean - spread.column(i));
    }
    let w = 1.0 / (2.0 * (n as f64 + lambda));
    let mut mean_weights = vec![w; 2 * n + 1];
    mean_weights[0] = lambda / (n as f64 + lambda);
    let mut cov_weights = mean_weights.clone();
    cov_weights[0] += 1.0 - params.alpha * params.alpha + params.beta;
    Ok(SigmaPoints {
        points,
        mean_weights,
        cov_weights,
    })
}

fn weighted_mean(values: &[DVector<f64>], weights: &[f64]) -> DVector<f64> {
    values
        .iter()
        .zip(weights)
        .fold(DVector::zeros(values[0].len()), |acc, (v, &w)| acc + v * w)
}

fn weighted_cross(
    a: &[DVector<f64>],
    a_mean: &DVector<f64>,
    b: &[DVector<f64>],
    b_mean: &DVector<f64>,
    weights: &[f64],
) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a_mean.len(), b_mean.len());
    for ((ai, bi), &w) in a.iter().zip(b).zip(weights) {
        m.ger(w, &(ai - a_mean), &(bi - b_mean), 1.0);
    }
    m
}

pub fn ukf_predict(
    state: &GaussianState,
    model: &dyn StateSpaceModel,
    params: &UkfParams,
) -> Result<PredictionResult> {
    let k = state.timestamp;
    let sp = sigma_points(state, params)?;
    let images: Vec<DVector<f64>> = sp.points.iter().map(|x| model.transition(k, x)).collect();
    let mean = weighted_mean(&images, &sp.mean_weights);
    let cov = weighted_cross(&images, &mean, &images, &mean, &sp.cov_weights);
    let cross = weighted_cross(&sp.points, &state.mean, &images, &mean, &sp.cov_weights);
    Ok(PredictionResult {
        predicted: GaussianState {
            mean,
            covariance: symmetrize(&(cov + model.process_noise(k))),
            timestamp: k + 1,
        },
        cross_cov: Some(cross),
        iterations: 0,
        factor_fallbacks: 0,
    })
}

pub fn ukf_update(
    state: &GaussianState,
    z: &DVector<f64>,
    model: &dyn StateSpaceModel,
    params: &UkfParams,
) -> Result<GaussianState> {
    check_dim("measurement dimension", model.measurement_dim(), z.len())?;
    let k = state.timestamp;
    let angular = model.angular_measurement_dims();
    let sp = sigma_points(state, params)?;
    let reference = model.measure(k, &state.mean);
    let images: Vec<DVector<f64>> = sp
        .points
        .iter()
        .map(|x| {
            let mut y = model.measure(k, x);
            unwrap_components(&mut y, &reference, angular);
            y
        })
        .collect();
    let z_hat = weighted_mean(&images, &sp.mean_weights);
    let pzz = symmetrize(
        &(weighted_cross(&images, &z_hat, &images, &z_hat, &sp.cov_weights)
            + model.measurement_noise(k)),
    );
    let pxz = weighted_cross(&sp.points, &state.mean, &images, &z_hat, &sp.cov_weights);
    let gain = right_divide_spd(&pxz, &pzz).ok_or(Error::InnovationCovSingular)?;
    let mut innovation = z - z_hat;
    wrap_components(&mut innovation, angular);
    Ok(GaussianState {
        mean: &state.mean + &gain * innovation,
        covariance: symmetrize(&(&state.covariance - &gain * pzz * gain.transpose())),
        timestamp: k,
    })
}

pub fn ukf_step(
    state: &GaussianState,
    z: &DVector<f64>,
    model: &dyn StateSpaceModel,
    params: &UkfParams,
) -> Result<GaussianState> {
    ukf_update(&ukf_predict(state, model, params)?.predicted, z, model, params)
}
