//! Square-root SIR predictor, filter and smoother.
//!
//! Covariances are carried as lower-triangular factors. Each step stacks the
//! weighted point deviations next to the noise factors and triangularizes the
//! result. Point weights can be negative (the averaged central weight is
//! `mean(1 − n/ρ²)`), so a deviation matrix carries a sign per column:
//! positive columns go into the triangularization, negative columns are
//! removed afterwards by rank-one downdates of the factor.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::gaussian::UpdateOptions;
use crate::linalg::{cholesky_downdate, compress, factor_psd, right_divide_factor};
use crate::model::{unwrap_components, wrap_components, GaussianState, StateSpaceModel};
use crate::rng::RngStream;
use crate::sir::{transform_points, SirConfig, TransformedPoints};

#[derive(Debug, Clone, PartialEq)]
pub struct SqrtGaussianState {
    pub mean: DVector<f64>,
    pub factor: DMatrix<f64>,
    pub timestamp: usize,
}

impl SqrtGaussianState {
    pub fn from_gaussian(state: &GaussianState) -> Result<Self> {
        let (factor, _) = factor_psd(&state.covariance)?;
        Ok(Self {
            mean: state.mean.clone(),
            factor,
            timestamp: state.timestamp,
        })
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.factor * self.factor.transpose()
    }

    pub fn to_gaussian(&self) -> GaussianState {
        GaussianState {
            mean: self.mean.clone(),
            covariance: self.covariance(),
            timestamp: self.timestamp,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Columns `√|Ωᵢ|·(yᵢ − c)` with the sign of `Ωᵢ` kept separately.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDeviationMatrix {
    pub columns: DMatrix<f64>,
    pub signs: Vec<f64>,
}

impl WeightedDeviationMatrix {
    pub fn from_points(values: &[DVector<f64>], center: &DVector<f64>, weights: &[f64]) -> Self {
        let rows = center.len();
        let mut columns = DMatrix::zeros(rows, values.len());
        let mut signs = Vec::with_capacity(values.len());
        for (j, (v, &w)) in values.iter().zip(weights).enumerate() {
            columns.set_column(j, &((v - center) * w.abs().sqrt()));
            signs.push(if w < 0.0 { -1.0 } else { 1.0 });
        }
        Self { columns, signs }
    }

    /// `Σᵢ sᵢ·aᵢ·aᵢᵀ`.
    pub fn signed_gram(&self) -> DMatrix<f64> {
        self.signed_cross(self)
    }

    /// `Σᵢ sᵢ·aᵢ·bᵢᵀ` for two matrices built on the same point set.
    pub fn signed_cross(&self, other: &Self) -> DMatrix<f64> {
        let mut scaled = self.columns.clone();
        for (j, &s) in self.signs.iter().enumerate() {
            if s < 0.0 {
                scaled.column_mut(j).neg_mut();
            }
        }
        scaled * other.columns.transpose()
    }

    /// Column-wise `A − M·B`, keeping the shared signs.
    fn combine(&self, gain: &DMatrix<f64>, other: &Self) -> Self {
        Self {
            columns: &self.columns - gain * &other.columns,
            signs: self.signs.clone(),
        }
    }
}

/// Triangular factor of `Σ sᵢ·aᵢ·aᵢᵀ + Σ_blocks B·Bᵀ`.
fn signed_factor(dev: &WeightedDeviationMatrix, extra: &[&DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let rows = dev.columns.nrows();
    let positive: Vec<usize> = (0..dev.signs.len()).filter(|&j| dev.signs[j] > 0.0).collect();
    let width = positive.len() + extra.iter().map(|b| b.ncols()).sum::<usize>();
    let mut stacked = DMatrix::zeros(rows, width);
    let mut col = 0;
    for &j in &positive {
        stacked.set_column(col, &dev.columns.column(j));
        col += 1;
    }
    for block in extra {
        stacked.columns_mut(col, block.ncols()).copy_from(*block);
        col += block.ncols();
    }
    let mut factor = compress(&stacked)?;
    for j in (0..dev.signs.len()).filter(|&j| dev.signs[j] < 0.0) {
        factor = cholesky_downdate(&factor, &dev.columns.column(j).into_owned())?;
    }
    Ok(factor)
}

/// Forward-pass data the square-root smoother needs for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct SmootherData {
    /// Deviations of the prediction points from the filtered mean.
    pub prior_deviations: WeightedDeviationMatrix,
    /// Deviations of the transformed points from the predicted mean.
    pub predicted_deviations: WeightedDeviationMatrix,
    pub noise_factor: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqrtPrediction {
    pub predicted: SqrtGaussianState,
    /// Last step's deviation matrices, when requested.
    pub smoother_data: Option<SmootherData>,
    pub iterations: usize,
}

impl SqrtPrediction {
    /// `E[(x_k − x̂_k)(x_{k+1} − x̂_{k+1})ᵀ]` from the stored deviations.
    pub fn cross_cov(&self) -> Option<DMatrix<f64>> {
        self.smoother_data
            .as_ref()
            .map(|d| d.prior_deviations.signed_cross(&d.predicted_deviations))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqrtUpdate {
    pub filtered: SqrtGaussianState,
    pub innovation: DVector<f64>,
    pub gain: DMatrix<f64>,
    pub predicted_measurement: DVector<f64>,
    /// Factor of the innovation covariance.
    pub innovation_factor: DMatrix<f64>,
    pub cross_cov: DMatrix<f64>,
    pub iterations: usize,
}

/// `steps`-ahead prediction propagating the covariance factor.
pub fn predict_sqrt(
    state: &SqrtGaussianState,
    model: &dyn StateSpaceModel,
    steps: usize,
    config: &SirConfig,
    rng: &mut RngStream,
    want_smoother_data: bool,
) -> Result<SqrtPrediction> {
    if steps == 0 {
        return Err(Error::InvalidConfig("prediction needs at least one step".into()));
    }
    check_dim("state dimension", model.state_dim(), state.dim())?;
    let mut current = state.clone();
    let mut smoother_data = None;
    let mut iterations = 0;
    for step in 0..steps {
        let k = current.timestamp;
        let tp = transform_points(&current.mean, &current.factor, config, rng, |x| {
            model.transition(k, x)
        })?;
        let mean = tp.mean_vector();
        let predicted_dev = WeightedDeviationMatrix::from_points(&tp.images, &mean, &tp.set.weights);
        let (noise_factor, _) = factor_psd(&model.process_noise(k))?;
        let factor = signed_factor(&predicted_dev, &[&noise_factor])?;
        if step + 1 == steps && want_smoother_data {
            smoother_data = Some(SmootherData {
                prior_deviations: WeightedDeviationMatrix::from_points(
                    &tp.set.points,
                    &current.mean,
                    &tp.set.weights,
                ),
                predicted_deviations: predicted_dev,
                noise_factor,
            });
        }
        iterations = tp.mean.iterations;
        current = SqrtGaussianState {
            mean,
            factor,
            timestamp: k + 1,
        };
    }
    Ok(SqrtPrediction {
        predicted: current,
        smoother_data,
        iterations,
    })
}

/// Square-root measurement update.
///
/// Only [`UpdateOptions::inflate_mean_error`] applies; the moments always come
/// from one shared point set.
pub fn update_sqrt(
    predicted: &SqrtGaussianState,
    z: &DVector<f64>,
    model: &dyn StateSpaceModel,
    config: &SirConfig,
    rng: &mut RngStream,
    options: UpdateOptions,
) -> Result<SqrtUpdate> {
    let nx = model.state_dim();
    check_dim("state dimension", nx, predicted.dim())?;
    check_dim("measurement dimension", model.measurement_dim(), z.len())?;
    let k = predicted.timestamp;
    let angular = model.angular_measurement_dims();
    let x_hat = &predicted.mean;
    let reference = model.measure(k, x_hat);
    let tp: TransformedPoints = transform_points(x_hat, &predicted.factor, config, rng, |x| {
        let mut y = model.measure(k, x);
        unwrap_components(&mut y, &reference, angular);
        y
    })?;
    let z_hat = tp.mean_vector();
    let x_dev = WeightedDeviationMatrix::from_points(&tp.set.points, x_hat, &tp.set.weights);
    let z_dev = WeightedDeviationMatrix::from_points(&tp.images, &z_hat, &tp.set.weights);
    let (noise_factor, _) = factor_psd(&model.measurement_noise(k))?;
    let mut extra = vec![noise_factor.clone()];
    if options.inflate_mean_error {
        extra.push(factor_psd(&tp.mean.error_cov)?.0);
    }
    let extra_refs: Vec<&DMatrix<f64>> = extra.iter().collect();
    let innovation_factor =
        signed_factor(&z_dev, &extra_refs).map_err(|_| Error::InnovationCovSingular)?;

    let cross_cov = x_dev.signed_cross(&z_dev);
    let gain =
        right_divide_factor(&cross_cov, &innovation_factor).ok_or(Error::InnovationCovSingular)?;

    let mut innovation = z - &z_hat;
    wrap_components(&mut innovation, angular);
    let mean = x_hat + &gain * &innovation;

    let gained: Vec<DMatrix<f64>> = extra.iter().map(|b| &gain * b).collect();
    let gained_refs: Vec<&DMatrix<f64>> = gained.iter().collect();
    let factor = signed_factor(&x_dev.combine(&gain, &z_dev), &gained_refs)?;

    let mut predicted_measurement = z_hat;
    wrap_components(&mut predicted_measurement, angular);
    Ok(SqrtUpdate {
        filtered: SqrtGaussianState {
            mean,
            factor,
            timestamp: k,
        },
        innovation,
        gain,
        predicted_measurement,
        innovation_factor,
        cross_cov,
        iterations: tp.mean.iterations,
    })
}

/// Backward square-root smoothing pass.
///
/// `predictions[m]` must be the prediction from `filtered[m]` with its
/// smoother data stored.
pub fn smooth_sqrt(
    filtered: &[SqrtGaussianState],
    predictions: &[SqrtPrediction],
) -> Result<Vec<SqrtGaussianState>> {
    let last = match filtered.len() {
        0 => return Err(Error::EmptyInput("filtered sequence")),
        n => n - 1,
    };
    let mut out = filtered.to_vec();
    for m in (0..last).rev() {
        let pred = predictions
            .get(m)
            .ok_or(Error::MissingForwardData { step: m })?;
        let data = pred
            .smoother_data
            .as_ref()
            .ok_or(Error::MissingForwardData { step: m })?;
        let cross = data.prior_deviations.signed_cross(&data.predicted_deviations);
        let gain = right_divide_factor(&cross, &pred.predicted.factor)
            .ok_or(Error::PredictedCovSingular { step: m })?;
        let next = &out[m + 1];
        let mean = &filtered[m].mean + &gain * (&next.mean - &pred.predicted.mean);
        let lq = &gain * &data.noise_factor;
        let ls = &gain * &next.factor;
        let factor = signed_factor(
            &data
                .prior_deviations
                .combine(&gain, &data.predicted_deviations),
            &[&lq, &ls],
        )?;
        out[m] = SqrtGaussianState {
            mean,
            factor,
            timestamp: filtered[m].timestamp,
        };
    }
    Ok(out)
}

/// Regenerates the smoother data by replaying each step's prediction from the
/// stream state it originally used.
pub fn rebuild_smoother_data(
    filtered: &[SqrtGaussianState],
    model: &dyn StateSpaceModel,
    config: &SirConfig,
    streams: &[RngStream],
) -> Result<Vec<SqrtPrediction>> {
    let steps = filtered.len().saturating_sub(1);
    (0..steps)
        .map(|m| {
            let mut rng = streams
                .get(m)
                .cloned()
                .ok_or(Error::MissingForwardData { step: m })?;
            predict_sqrt(&filtered[m], model, 1, config, &mut rng, true)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::relative_error;
    use crate::model::LinearModel;

    fn model(q_scale: f64) -> LinearModel {
        let f = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let h = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let q = DMatrix::from_row_slice(2, 2, &[1.0 / 3.0, 0.5, 0.5, 1.0]) * q_scale;
        LinearModel::new(f, h, q, DMatrix::from_element(1, 1, 0.5)).unwrap()
    }

    fn prior() -> SqrtGaussianState {
        SqrtGaussianState::from_gaussian(
            &GaussianState::new(
                DVector::from_vec(vec![1.0, 0.5]),
                DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
            )
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn signed_gram_matches_weighted_scatter() {
        let pts = vec![
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![1.0, 2.0]),
            DVector::from_vec(vec![-1.0, 0.5]),
        ];
        let w = [-0.5, 0.75, 0.75];
        let c = DVector::from_vec(vec![0.1, 0.2]);
        let dev = WeightedDeviationMatrix::from_points(&pts, &c, &w);
        let direct = pts.iter().zip(&w).fold(DMatrix::zeros(2, 2), |acc, (p, &wi)| {
            let d = p - &c;
            acc + &d * d.transpose() * wi
        });
        assert!((dev.signed_gram() - direct).amax() < 1e-14);
        assert_eq!(dev.signs, vec![-1.0, 1.0, 1.0]);
    }

    #[test]
    fn noise_free_linear_prediction_is_triangularized_product() {
        let m = model(0.0);
        let x = prior();
        let mut rng = RngStream::new(30, 0);
        let out = predict_sqrt(&x, &m, 1, &SirConfig::default(), &mut rng, false).unwrap();
        let expected = crate::linalg::triangularize(&(&m.transition * &x.factor)).unwrap();
        assert!((&out.predicted.factor - expected).amax() < 1e-10);
        let s = &out.predicted.factor;
        assert!((0..2).all(|i| s[(i, i)] >= 0.0) && s[(0, 1)] == 0.0);
    }

    #[test]
    fn linear_prediction_reconstructs_exact_covariance() {
        let m = model(0.1);
        let x = prior();
        let mut rng = RngStream::new(31, 0);
        let out = predict_sqrt(&x, &m, 1, &SirConfig::default(), &mut rng, true).unwrap();
        let p = &m.transition * x.covariance() * m.transition.transpose() + &m.process_noise;
        assert!(relative_error(&out.predicted.covariance(), &p) < 1e-9);
        let cross = out.cross_cov().unwrap();
        assert!((cross - x.covariance() * m.transition.transpose()).amax() < 1e-10);
    }

    #[test]
    fn zero_innovation_keeps_mean() {
        let m = model(0.1);
        let x = prior();
        let mut rng = RngStream::new(32, 0);
        let z = &m.observation * &x.mean;
        let out = update_sqrt(&x, &z, &m, &SirConfig::default(), &mut rng, Default::default()).unwrap();
        assert!((&out.filtered.mean - &x.mean).amax() < 1e-12);
    }

    #[test]
    fn smoother_needs_forward_data() {
        let m = model(0.1);
        let x = prior();
        let mut rng = RngStream::new(33, 0);
        let pred = predict_sqrt(&x, &m, 1, &SirConfig::default(), &mut rng, false).unwrap();
        let filtered = vec![x, pred.predicted.clone()];
        assert_eq!(
            smooth_sqrt(&filtered, &[pred]),
            Err(Error::MissingForwardData { step: 0 })
        );
    }

    #[test]
    fn rebuilt_smoother_data_matches_stored() {
        let m = model(0.1);
        let x = prior();
        let cfg = SirConfig::default();
        let stream = RngStream::new(34, 0);
        let mut rng = stream.clone();
        let stored = predict_sqrt(&x, &m, 1, &cfg, &mut rng, true).unwrap();
        let rebuilt = rebuild_smoother_data(
            &[x, stored.predicted.clone()],
            &m,
            &cfg,
            &[stream],
        )
        .unwrap();
        assert_eq!(rebuilt[0], stored);
    }
}
