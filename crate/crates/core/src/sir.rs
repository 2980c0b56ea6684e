//! Degree-3 stochastic integration rule.
//!
//! Each iteration draws a Haar rotation `C` and a radius `ρ ~ Chi(n + 2)` and
//! places `2n` points at `x̂ ± ρ·S·C·eᵢ` around the fixed central point `x̂`.
//! The weights are `1 − n/ρ²` for the centre and `1/(2ρ²)` elsewhere, which
//! integrates every polynomial of total degree ≤ 3 exactly for any draw.
//! Iteration results are averaged recursively; the spread of the iteration
//! results gives an estimate `Σ_N` of the error covariance of the average.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{random_orthogonal, sample_chi};
use crate::model::GaussianState;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SirDegree {
    #[default]
    Three,
}

/// Stopping control for the rule.
///
/// The loop always runs at least once and stops at `max_iterations`, or as soon
/// as `tr(Σ_N) < error_tolerance` for `N ≥ 2`. The default tolerance of zero
/// always runs the full `max_iterations`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirConfig {
    pub max_iterations: usize,
    pub error_tolerance: f64,
    #[serde(default)]
    pub degree: SirDegree,
}

impl Default for SirConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            error_tolerance: 0.0,
            degree: SirDegree::Three,
        }
    }
}

impl SirConfig {
    pub fn with_max_iterations(max_iterations: usize) -> Self {
        Self {
            max_iterations,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "SIR max_iterations must be at least 1".into(),
            ));
        }
        if !(self.error_tolerance >= 0.0) {
            return Err(Error::InvalidConfig(
                "SIR error_tolerance must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Points and weights of one iteration; index 0 is the central point, then
/// the `n` negative and the `n` positive directions.
#[derive(Debug, Clone, PartialEq)]
pub struct SirIterationPoints {
    pub points: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
    pub rotation: DMatrix<f64>,
    pub radius: f64,
}

/// Flat point set of `N` concatenated iterations, `2nN + 1` points.
///
/// The central point comes first with the averaged central weight; the rest
/// are iteration-major with weights divided by `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SirPointSet {
    pub points: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
    pub iterations: usize,
}

impl SirPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `Σᵢ Ωᵢ·g(Ξᵢ)`.
    pub fn weighted_sum<F>(&self, g: F) -> DVector<f64>
    where
        F: Fn(&DVector<f64>) -> DVector<f64>,
    {
        let mut acc: Option<DVector<f64>> = None;
        for (p, &w) in self.points.iter().zip(&self.weights) {
            let v = g(p) * w;
            acc = Some(match acc {
                Some(a) => a + v,
                None => v,
            });
        }
        acc.unwrap_or_else(|| DVector::zeros(0))
    }
}

/// Integral value `Î_N`, its error covariance `Σ_N` over the column-major
/// flattened value, the iteration count and the number of points used.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralEstimate {
    pub value: DMatrix<f64>,
    pub error_cov: DMatrix<f64>,
    pub iterations: usize,
    pub total_points: usize,
}

/// A function integrated against a Gaussian. Values are matrices of a fixed
/// shape; vectors use a single column.
pub trait Integrand {
    fn shape(&self) -> (usize, usize);
    fn eval(&self, x: &DVector<f64>) -> std::result::Result<DMatrix<f64>, String>;
}

/// Integrand backed by a closure.
pub struct FnIntegrand<F> {
    rows: usize,
    cols: usize,
    f: F,
}

impl<F> FnIntegrand<F>
where
    F: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    pub fn new(rows: usize, cols: usize, f: F) -> Self {
        Self { rows, cols, f }
    }
}

impl<F> Integrand for FnIntegrand<F>
where
    F: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn eval(&self, x: &DVector<f64>) -> std::result::Result<DMatrix<f64>, String> {
        Ok((self.f)(x))
    }
}

/// Vector-valued integrand of length `len`.
pub fn vector_integrand<G>(
    len: usize,
    g: G,
) -> FnIntegrand<impl Fn(&DVector<f64>) -> DMatrix<f64>>
where
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    FnIntegrand::new(len, 1, move |x| {
        let v = g(x);
        DMatrix::from_column_slice(v.len(), 1, v.as_slice())
    })
}

/// Scalar integrand.
pub fn scalar_integrand<G>(g: G) -> FnIntegrand<impl Fn(&DVector<f64>) -> DMatrix<f64>>
where
    G: Fn(&DVector<f64>) -> f64,
{
    FnIntegrand::new(1, 1, move |x| DMatrix::from_element(1, 1, g(x)))
}

/// Draws one iteration of points around `mean` using the factor `S` of the covariance.
pub fn generate_iteration(
    mean: &DVector<f64>,
    factor: &DMatrix<f64>,
    rng: &mut RngStream,
) -> Result<SirIterationPoints> {
    let n = mean.len();
    check_dim("SIR factor rows", n, factor.nrows())?;
    check_dim("SIR factor cols", n, factor.ncols())?;
    let rotation = random_orthogonal(n, rng)?;
    let radius = sample_chi(n + 2, rng)?;
    let directions = factor * &rotation * radius;

    let mut points = Vec::with_capacity(2 * n + 1);
    points.push(mean.clone());
    for i in 0..n {
        points.push(mean - directions.column(i));
    }
    for i in 0..n {
        points.push(mean + directions.column(i));
    }
    let r2 = radius * radius;
    let mut weights = vec![1.0 / (2.0 * r2); 2 * n + 1];
    weights[0] = 1.0 - n as f64 / r2;
    Ok(SirIterationPoints {
        points,
        weights,
        rotation,
        radius,
    })
}

/// Concatenates `N` iterations into one flat weighted point set.
pub fn concatenate(iterations: &[SirIterationPoints]) -> Result<SirPointSet> {
    let first = iterations.first().ok_or(Error::EmptyInput("SIR iterations"))?;
    let count = first.points.len();
    let dim = first.points[0].len();
    for it in iterations {
        check_dim("SIR iteration point count", count, it.points.len())?;
        check_dim("SIR iteration weight count", count, it.weights.len())?;
        check_dim("SIR point dimension", dim, it.points[0].len())?;
    }
    let n_iter = iterations.len() as f64;
    let mut points = Vec::with_capacity((count - 1) * iterations.len() + 1);
    let mut weights = Vec::with_capacity(points.capacity());
    points.push(first.points[0].clone());
    weights.push(iterations.iter().map(|it| it.weights[0]).sum::<f64>() / n_iter);
    for it in iterations {
        for (p, &w) in it.points.iter().zip(&it.weights).skip(1) {
            points.push(p.clone());
            weights.push(w / n_iter);
        }
    }
    Ok(SirPointSet {
        points,
        weights,
        iterations: iterations.len(),
    })
}

/// Recursive average of iteration results with its error covariance.
#[derive(Debug, Clone)]
pub(crate) struct RunningIntegral {
    value: DVector<f64>,
    error_cov: DMatrix<f64>,
    n: usize,
}

impl RunningIntegral {
    pub(crate) fn new(len: usize) -> Self {
        Self {
            value: DVector::zeros(len),
            error_cov: DMatrix::zeros(len, len),
            n: 0,
        }
    }

    pub(crate) fn push(&mut self, iteration_value: &DVector<f64>) {
        self.n += 1;
        let n = self.n as f64;
        let d = iteration_value - &self.value;
        self.value += &d / n;
        // Σ₁ = 0: one iteration carries no spread information.
        if self.n >= 2 {
            self.error_cov *= (n - 2.0) / n;
            self.error_cov += &d * d.transpose() / (n * n);
        }
    }

    pub(crate) fn trace(&self) -> f64 {
        self.error_cov.trace()
    }

    pub(crate) fn value(&self) -> &DVector<f64> {
        &self.value
    }

    pub(crate) fn into_estimate(self, shape: (usize, usize), points_per_iteration: usize) -> IntegralEstimate {
        IntegralEstimate {
            value: DMatrix::from_column_slice(shape.0, shape.1, self.value.as_slice()),
            error_cov: self.error_cov,
            iterations: self.n,
            total_points: self.n * points_per_iteration,
        }
    }
}

/// Runs the iteration loop. `per_iteration` consumes each draw and returns
/// the trace that drives the stopping rule. Returns the iteration count.
pub(crate) fn run_rule<F>(
    mean: &DVector<f64>,
    factor: &DMatrix<f64>,
    config: &SirConfig,
    rng: &mut RngStream,
    mut per_iteration: F,
) -> Result<usize>
where
    F: FnMut(SirIterationPoints) -> Result<f64>,
{
    config.validate()?;
    let mut n = 0;
    loop {
        n += 1;
        let points = generate_iteration(mean, factor, rng)?;
        let trace = per_iteration(points)?;
        if n >= config.max_iterations || (n >= 2 && trace < config.error_tolerance) {
            return Ok(n);
        }
    }
}

fn eval_flat(g: &dyn Integrand, x: &DVector<f64>) -> Result<DVector<f64>> {
    let (rows, cols) = g.shape();
    let value = g.eval(x).map_err(|reason| Error::IntegrandFailure {
        point: x.iter().cloned().collect(),
        reason,
    })?;
    if value.shape() != (rows, cols) {
        return Err(Error::IntegrandFailure {
            point: x.iter().cloned().collect(),
            reason: format!(
                "declared shape {rows}x{cols}, returned {}x{}",
                value.nrows(),
                value.ncols()
            ),
        });
    }
    if !value.iter().all(|v| v.is_finite()) {
        return Err(Error::IntegrandFailure {
            point: x.iter().cloned().collect(),
            reason: "non-finite value".into(),
        });
    }
    Ok(DVector::from_column_slice(value.as_slice()))
}

/// Integrates `g` against `N(mean, S·Sᵀ)`.
pub fn integrate_with_factor(
    g: &dyn Integrand,
    mean: &DVector<f64>,
    factor: &DMatrix<f64>,
    config: &SirConfig,
    rng: &mut RngStream,
) -> Result<IntegralEstimate> {
    let mut out = integrate_batch_with_factor(&[g], mean, factor, config, rng)?;
    Ok(out.remove(0))
}

/// Integrates `g` against the Gaussian.
pub fn integrate(
    g: &dyn Integrand,
    gaussian: &GaussianState,
    config: &SirConfig,
    rng: &mut RngStream,
) -> Result<IntegralEstimate> {
    integrate_with_factor(g, &gaussian.mean, &gaussian.factor()?, config, rng)
}

/// Integrates every integrand on the same points; stopping follows the first.
pub fn integrate_batch(
    gs: &[&dyn Integrand],
    gaussian: &GaussianState,
    config: &SirConfig,
    rng: &mut RngStream,
) -> Result<Vec<IntegralEstimate>> {
    integrate_batch_with_factor(gs, &gaussian.mean, &gaussian.factor()?, config, rng)
}

pub fn integrate_batch_with_factor(
    gs: &[&dyn Integrand],
    mean: &DVector<f64>,
    factor: &DMatrix<f64>,
    config: &SirConfig,
    rng: &mut RngStream,
) -> Result<Vec<IntegralEstimate>> {
    if gs.is_empty() {
        return Err(Error::EmptyInput("integrand batch"));
    }
    let central: Vec<DVector<f64>> = gs
        .iter()
        .map(|g| eval_flat(*g, mean))
        .collect::<Result<_>>()?;
    let mut running: Vec<RunningIntegral> =
        central.iter().map(|c| RunningIntegral::new(c.len())).collect();

    run_rule(mean, factor, config, rng, |it| {
        for ((g, c), acc) in gs.iter().zip(&central).zip(running.iter_mut()) {
            let mut sum = c * it.weights[0];
            for (p, &w) in it.points.iter().zip(&it.weights).skip(1) {
                sum += eval_flat(*g, p)? * w;
            }
            acc.push(&sum);
        }
        Ok(running[0].trace())
    })?;

    let per_iteration = 2 * mean.len() + 1;
    Ok(gs
        .iter()
        .zip(running)
        .map(|(g, acc)| acc.into_estimate(g.shape(), per_iteration))
        .collect())
}

/// Images of a vector map on the concatenated point set, plus the SIR
/// estimate of the map's mean.
#[derive(Debug, Clone)]
pub(crate) struct TransformedPoints {
    pub set: SirPointSet,
    pub images: Vec<DVector<f64>>,
    pub mean: IntegralEstimate,
}

impl TransformedPoints {
    /// `Σ Ωᵢ·aᵢ·bᵢᵀ` over two per-point sequences.
    pub(crate) fn raw_moment(&self, a: &[DVector<f64>], b: &[DVector<f64>]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(a[0].len(), b[0].len());
        for ((ai, bi), &w) in a.iter().zip(b).zip(&self.set.weights) {
            m.ger(w, ai, bi, 1.0);
        }
        m
    }

    pub(crate) fn mean_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(self.mean.value.as_slice())
    }
}

/// Runs the rule once for a vector map, evaluating the map once per point.
/// The mean integral of the map drives the stopping rule.
pub(crate) fn transform_points<F>(
    mean: &DVector<f64>,
    factor: &DMatrix<f64>,
    config: &SirConfig,
    rng: &mut RngStream,
    map: F,
) -> Result<TransformedPoints>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let eval = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let y = map(x);
        if y.iter().all(|v| v.is_finite()) {
            Ok(y)
        } else {
            Err(Error::IntegrandFailure {
                point: x.iter().cloned().collect(),
                reason: "non-finite value".into(),
            })
        }
    };
    let central = eval(mean)?;
    let mut running = RunningIntegral::new(central.len());
    let mut iterations = Vec::new();
    let mut images = vec![central.clone()];

    run_rule(mean, factor, config, rng, |it| {
        let mut sum = &central * it.weights[0];
        for (p, &w) in it.points.iter().zip(&it.weights).skip(1) {
            let y = eval(p)?;
            sum += &y * w;
            images.push(y);
        }
        running.push(&sum);
        iterations.push(it);
        Ok(running.trace())
    })?;

    let set = concatenate(&iterations)?;
    let len = running.value().len();
    let mean = running.into_estimate((len, 1), 2 * mean.len() + 1);
    Ok(TransformedPoints { set, images, mean })
}
