//! Full-covariance SIR estimators: multi-step predictor, filter update and
//! Rauch–Tung–Striebel smoother.
//!
//! One SIR pass per step evaluates the model map once per point and forms the
//! raw moments `E[y]`, `E[y·yᵀ]` and `E[x·yᵀ]`; central moments follow by
//! subtracting the outer product of the means.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{factor_psd, right_divide_spd, symmetrize};
use crate::model::{unwrap_components, wrap_components, GaussianState, StateSpaceModel};
use crate::rng::RngStream;
use crate::sir::{integrate_with_factor, transform_points, FnIntegrand, SirConfig};

/// How the measurement moments are computed in [`update`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MomentPath {
    /// One batched pass for `ẑ`, `M^zz`, `M^xz`.
    #[default]
    Raw,
    /// Three separate rule runs for `ẑ`, `P^zz` and `P^xz`, each replaying the same stream.
    Dedicated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UpdateOptions {
    /// Adds the error covariance of the `ẑ` integral to `P^zz`.
    pub inflate_mean_error: bool,
    pub moment_path: MomentPath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    pub predicted: GaussianState,
    /// `E[(x_k − x̂_k)(x_{k+1} − x̂_{k+1})ᵀ]` of the last step, when requested.
    pub cross_cov: Option<DMatrix<f64>>,
    pub iterations: usize,
    /// Number of times a covariance needed the eigenvalue-clipped factor.
    pub factor_fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateResult {
    pub filtered: GaussianState,
    pub innovation: DVector<f64>,
    pub gain: DMatrix<f64>,
    pub predicted_measurement: DVector<f64>,
    pub innovation_cov: DMatrix<f64>,
    pub cross_cov: DMatrix<f64>,
    pub iterations: usize,
    pub factor_fallbacks: usize,
}

/// `steps`-ahead prediction by repeated one-step SIR prediction.
pub fn predict(
    state: &GaussianState,
    model: &dyn StateSpaceModel,
    steps: usize,
    config: &SirConfig,
    rng: &mut RngStream,
    want_cross_cov: bool,
) -> Result<PredictionResult> {
    if steps == 0 {
        return Err(Error::InvalidConfig("prediction needs at least one step".into()));
    }
    check_dim("state dimension", model.state_dim(), state.dim())?;
    let mut current = state.clone();
    let mut cross_cov = None;
    let mut iterations = 0;
    let mut fallbacks = 0;
    for step in 0..steps {
        let last = step + 1 == steps;
        let k = current.timestamp;
        let (factor, fell_back) = factor_psd(&current.covariance)?;
        fallbacks += fell_back as usize;

        let tp = transform_points(&current.mean, &factor, config, rng, |x| {
            model.transition(k, x)
        })?;
        let mean = tp.mean_vector();
        let second = tp.raw_moment(&tp.images, &tp.images);
        let covariance =
            symmetrize(&(second - &mean * mean.transpose() + model.process_noise(k)));
        if last && want_cross_cov {
            let mixed = tp.raw_moment(&tp.set.points, &tp.images);
            cross_cov = Some(mixed - &current.mean * mean.transpose());
        }
        iterations = tp.mean.iterations;
        current = GaussianState {
            mean,
            covariance,
            timestamp: k + 1,
        };
    }
    Ok(PredictionResult {
        predicted: current,
        cross_cov,
        iterations,
        factor_fallbacks: fallbacks,
    })
}

/// Measurement update with SIR-computed measurement moments.
pub fn update(
    predicted: &GaussianState,
    z: &DVector<f64>,
    model: &dyn StateSpaceModel,
    config: &SirConfig,
    rng: &mut RngStream,
    options: UpdateOptions,
) -> Result<UpdateResult> {
    let nx = model.state_dim();
    let nz = model.measurement_dim();
    check_dim("state dimension", nx, predicted.dim())?;
    check_dim("measurement dimension", nz, z.len())?;
    let k = predicted.timestamp;
    let angular = model.angular_measurement_dims();
    let (factor, fell_back) = factor_psd(&predicted.covariance)?;
    let x_hat = &predicted.mean;
    let reference = model.measure(k, x_hat);
    let measure = |x: &DVector<f64>| {
        let mut y = model.measure(k, x);
        unwrap_components(&mut y, &reference, angular);
        y
    };
    let r = model.measurement_noise(k);

    let (z_hat, mut pzz, pxz, mean_error, iterations) = match options.moment_path {
        MomentPath::Raw => {
            let tp = transform_points(x_hat, &factor, config, rng, measure)?;
            let z_hat = tp.mean_vector();
            let mzz = tp.raw_moment(&tp.images, &tp.images);
            let mxz = tp.raw_moment(&tp.set.points, &tp.images);
            let pzz = mzz - &z_hat * z_hat.transpose() + &r;
            let pxz = mxz - x_hat * z_hat.transpose();
            (z_hat, pzz, pxz, tp.mean.error_cov, tp.mean.iterations)
        }
        MomentPath::Dedicated => {
            let start = rng.clone();
            let mut stream = start.clone();
            let g_mean = FnIntegrand::new(nz, 1, |x: &DVector<f64>| {
                let y = measure(x);
                DMatrix::from_column_slice(nz, 1, y.as_slice())
            });
            let z_est = integrate_with_factor(&g_mean, x_hat, &factor, config, &mut stream)?;
            let z_hat = DVector::from_column_slice(z_est.value.as_slice());

            let mut stream = start.clone();
            let g_zz = FnIntegrand::new(nz, nz, |x: &DVector<f64>| {
                let d = measure(x) - &z_hat;
                &d * d.transpose()
            });
            let pzz_est = integrate_with_factor(&g_zz, x_hat, &factor, config, &mut stream)?;

            let mut stream = start;
            let g_xz = FnIntegrand::new(nx, nz, |x: &DVector<f64>| {
                (x - x_hat) * (measure(x) - &z_hat).transpose()
            });
            let pxz_est = integrate_with_factor(&g_xz, x_hat, &factor, config, &mut stream)?;
            *rng = stream;
            (
                z_hat,
                pzz_est.value + &r,
                pxz_est.value,
                z_est.error_cov,
                z_est.iterations,
            )
        }
    };
    if options.inflate_mean_error {
        pzz += &mean_error;
    }
    let pzz = symmetrize(&pzz);
    let gain = right_divide_spd(&pxz, &pzz).ok_or(Error::InnovationCovSingular)?;

    let mut innovation = z - &z_hat;
    wrap_components(&mut innovation, angular);
    let mean = x_hat + &gain * &innovation;
    let covariance = symmetrize(&(&predicted.covariance - &gain * &pzz * gain.transpose()));
    let mut predicted_measurement = z_hat;
    wrap_components(&mut predicted_measurement, angular);

    Ok(UpdateResult {
        filtered: GaussianState {
            mean,
            covariance,
            timestamp: k,
        },
        innovation,
        gain,
        predicted_measurement,
        innovation_cov: pzz,
        cross_cov: pxz,
        iterations,
        factor_fallbacks: fell_back as usize,
    })
}

/// Backward smoothing pass.
///
/// `predictions[m]` must be the one-step prediction made from `filtered[m]`,
/// carrying the cross-covariance between the two time steps.
pub fn smooth(
    filtered: &[GaussianState],
    predictions: &[PredictionResult],
) -> Result<Vec<GaussianState>> {
    let last = match filtered.len() {
        0 => return Err(Error::EmptyInput("filtered sequence")),
        n => n - 1,
    };
    let mut out = filtered.to_vec();
    for m in (0..last).rev() {
        let pred = predictions.get(m).ok_or(Error::MissingCrossCov { step: m })?;
        let cross = pred
            .cross_cov
            .as_ref()
            .ok_or(Error::MissingCrossCov { step: m })?;
        let p_pred = &pred.predicted.covariance;
        let gain =
            right_divide_spd(cross, p_pred).ok_or(Error::PredictedCovSingular { step: m })?;
        let next = &out[m + 1];
        let mean = &filtered[m].mean + &gain * (&next.mean - &pred.predicted.mean);
        let covariance = symmetrize(
            &(&filtered[m].covariance - &gain * (p_pred - &next.covariance) * gain.transpose()),
        );
        out[m] = GaussianState {
            mean,
            covariance,
            timestamp: filtered[m].timestamp,
        };
    }
    Ok(out)
}
