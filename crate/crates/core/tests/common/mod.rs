#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use sif_core::baseline::{kf_predict, kf_update, rts_smooth};
use sif_core::gaussian::{self, PredictionResult, UpdateOptions};
use sif_core::sqrt::{predict_sqrt, smooth_sqrt, update_sqrt, SqrtGaussianState, SqrtPrediction};
use sif_core::{GaussianState, LinearModel, RngStream, SirConfig, StateSpaceModel};

pub fn normal_vector(n: usize, rng: &mut RngStream) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.standard_normal())
}

pub fn normal_matrix(r: usize, c: usize, rng: &mut RngStream) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.standard_normal())
}

/// `A·Aᵀ/n + shift·I`.
pub fn random_spd(n: usize, shift: f64, rng: &mut RngStream) -> DMatrix<f64> {
    let a = normal_matrix(n, n, rng);
    &a * a.transpose() / n as f64 + DMatrix::identity(n, n) * shift
}

pub fn random_gaussian(n: usize, rng: &mut RngStream) -> GaussianState {
    let mean = normal_vector(n, rng);
    let cov = random_spd(n, 0.2, rng);
    GaussianState::new(mean, cov).unwrap()
}

/// Stable random linear model: transition scaled to spectral radius below 1.
pub fn random_linear_model(nx: usize, nz: usize, rng: &mut RngStream) -> LinearModel {
    let f = DMatrix::identity(nx, nx) + normal_matrix(nx, nx, rng) * 0.15;
    let h = normal_matrix(nz, nx, rng);
    let q = random_spd(nx, 0.05, rng) * 0.1;
    let r = random_spd(nz, 0.1, rng) * 0.5;
    LinearModel::new(f, h, q, r).unwrap()
}

pub fn simulate_linear(
    model: &LinearModel,
    prior: &GaussianState,
    steps: usize,
    rng: &mut RngStream,
) -> Vec<DVector<f64>> {
    let p = prior.covariance.clone().cholesky().unwrap().l();
    let q = model.process_noise.clone().cholesky().unwrap().l();
    let r = model.measurement_noise.clone().cholesky().unwrap().l();
    let mut x = &prior.mean + &p * normal_vector(prior.dim(), rng);
    let mut zs = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        if k > 0 {
            x = &model.transition * &x + &q * normal_vector(x.len(), rng);
        }
        zs.push(&model.observation * &x + &r * normal_vector(model.observation.nrows(), rng));
    }
    zs
}

pub struct KfRun {
    pub filtered: Vec<GaussianState>,
    pub predicted: Vec<GaussianState>,
}

/// Textbook Kalman filter: update at k = 0, then predict/update.
pub fn kalman(model: &LinearModel, prior: &GaussianState, zs: &[DVector<f64>]) -> KfRun {
    let mut filtered: Vec<GaussianState> = Vec::new();
    let mut predicted = Vec::new();
    for (k, z) in zs.iter().enumerate() {
        let pred = if k == 0 {
            prior.clone()
        } else {
            let p = kf_predict(&filtered[k - 1], &model.transition, &model.process_noise);
            predicted.push(p.clone());
            p
        };
        filtered.push(
            kf_update(&pred, z, &model.observation, &model.measurement_noise).unwrap(),
        );
    }
    KfRun { filtered, predicted }
}

pub fn kalman_smoothed(model: &LinearModel, run: &KfRun) -> Vec<GaussianState> {
    rts_smooth(&run.filtered, &run.predicted, &model.transition).unwrap()
}

pub struct FullRun {
    pub filtered: Vec<GaussianState>,
    pub predictions: Vec<PredictionResult>,
}

pub fn sif_full(
    model: &dyn StateSpaceModel,
    prior: &GaussianState,
    zs: &[DVector<f64>],
    config: &SirConfig,
    rng: &mut RngStream,
) -> FullRun {
    let mut filtered: Vec<GaussianState> = Vec::new();
    let mut predictions = Vec::new();
    for (k, z) in zs.iter().enumerate() {
        let pred = if k == 0 {
            prior.clone()
        } else {
            let p = gaussian::predict(&filtered[k - 1], model, 1, config, rng, true).unwrap();
            let s = p.predicted.clone();
            predictions.push(p);
            s
        };
        filtered.push(
            gaussian::update(&pred, z, model, config, rng, UpdateOptions::default())
                .unwrap()
                .filtered,
        );
    }
    FullRun { filtered, predictions }
}

pub struct SqrtRun {
    pub filtered: Vec<SqrtGaussianState>,
    pub predictions: Vec<SqrtPrediction>,
}

pub fn sif_sqrt(
    model: &dyn StateSpaceModel,
    prior: &GaussianState,
    zs: &[DVector<f64>],
    config: &SirConfig,
    rng: &mut RngStream,
) -> SqrtRun {
    let mut filtered: Vec<SqrtGaussianState> = Vec::new();
    let mut predictions = Vec::new();
    let start = SqrtGaussianState::from_gaussian(prior).unwrap();
    for (k, z) in zs.iter().enumerate() {
        let pred = if k == 0 {
            start.clone()
        } else {
            let p = predict_sqrt(&filtered[k - 1], model, 1, config, rng, true).unwrap();
            let s = p.predicted.clone();
            predictions.push(p);
            s
        };
        filtered.push(
            update_sqrt(&pred, z, model, config, rng, UpdateOptions::default())
                .unwrap()
                .filtered,
        );
    }
    SqrtRun { filtered, predictions }
}

pub fn sqrt_smoothed(run: &SqrtRun) -> Vec<GaussianState> {
    smooth_sqrt(&run.filtered, &run.predictions)
        .unwrap()
        .iter()
        .map(SqrtGaussianState::to_gaussian)
        .collect()
}

pub fn max_abs_state_diff(a: &GaussianState, b: &GaussianState) -> f64 {
    (&a.mean - &b.mean).amax().max((&a.covariance - &b.covariance).amax())
}

/// `‖A − B‖_F / ‖B‖_F`.
pub fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Gaussian moment `E[∏ x_{idx}]` for up to three indices (Isserlis).
pub fn gaussian_monomial_moment(idx: &[usize], m: &DVector<f64>, p: &DMatrix<f64>) -> f64 {
    match *idx {
        [] => 1.0,
        [i] => m[i],
        [i, j] => m[i] * m[j] + p[(i, j)],
        [i, j, k] => {
            m[i] * m[j] * m[k] + m[i] * p[(j, k)] + m[j] * p[(i, k)] + m[k] * p[(i, j)]
        }
        _ => panic!("degree above three"),
    }
}

/// All multisets of `0..n` with size at most 3.
pub fn monomials_up_to_degree_three(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for i in 0..n {
        out.push(vec![i]);
        for j in i..n {
            out.push(vec![i, j]);
            for k in j..n {
                out.push(vec![i, j, k]);
            }
        }
    }
    out
}

/// Magnitude scale of a monomial under `N(m, P)`.
pub fn monomial_scale(idx: &[usize], m: &DVector<f64>, p: &DMatrix<f64>) -> f64 {
    idx.iter().map(|&i| m[i].abs() + p[(i, i)].sqrt()).product()
}
