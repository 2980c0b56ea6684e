//! Bearing-range tracking benchmark.
//!
//! A constant-velocity target with state `[x, ẋ, y, ẏ]` is observed by a radar
//! measuring bearing and range. Every Monte-Carlo run draws a fresh truth and
//! measurement sequence and runs each selected filter on the same data.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{
    ekf_predict, ekf_update, kf_predict, kf_update, rts_smooth, ukf_predict, ukf_update,
    JacobianMode, UkfParams,
};
use crate::error::{Error, Result};
use crate::gaussian::{self, PredictionResult, UpdateOptions};
use crate::linalg::factor_psd;
use crate::metrics::{evaluate_track, CompensatedSum, Normalization, RunMetrics};
use crate::model::{wrap_components, GaussianState, StateSpaceModel};
use crate::rng::RngStream;
use crate::sir::SirConfig;
use crate::sqrt::{predict_sqrt, smooth_sqrt, update_sqrt, SqrtGaussianState, SqrtPrediction};

const TRUTH_TAG: u64 = 0x7472_7574_68;
const FILTER_TAG: u64 = 0x6669_6c74_6572;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementKind {
    #[default]
    BearingRange,
    /// Direct observation of the full state; used to validate the metrics.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub sampling_period: f64,
    /// Last time index; the track has `horizon + 1` states.
    pub horizon: usize,
    pub q1: f64,
    pub q2: f64,
    /// Bearing noise variance in rad².
    pub bearing_variance: f64,
    pub range_variance: f64,
    pub radar_position: [f64; 2],
    pub initial_mean: [f64; 4],
    pub initial_covariance_diag: [f64; 4],
    pub measurement: MeasurementKind,
    /// Per-component noise variance of the linear measurement variant.
    pub linear_measurement_variance: f64,
    /// Draw the true initial state from the prior instead of fixing it at the prior mean.
    pub random_initial_truth: bool,
    pub mc_runs: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            sampling_period: 1.0,
            horizon: 20,
            q1: 0.05,
            q2: 0.05,
            bearing_variance: 0.2 * PI / 180.0,
            range_variance: 1.0,
            radar_position: [50.0, 0.0],
            initial_mean: [50.0, 1.0, 1.0, 1.0],
            initial_covariance_diag: [1.5, 0.5, 1.5, 0.5],
            measurement: MeasurementKind::BearingRange,
            linear_measurement_variance: 1.0,
            random_initial_truth: true,
            mc_runs: 10_000,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn transition_matrix(&self) -> DMatrix<f64> {
        let t = self.sampling_period;
        DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, t, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, t, //
                0.0, 0.0, 0.0, 1.0,
            ],
        )
    }

    pub fn process_noise(&self) -> DMatrix<f64> {
        let t = self.sampling_period;
        let block = |q: f64| [q * t.powi(3) / 3.0, q * t.powi(2) / 2.0, q * t];
        let [a1, b1, c1] = block(self.q1);
        let [a2, b2, c2] = block(self.q2);
        DMatrix::from_row_slice(
            4,
            4,
            &[
                a1, b1, 0.0, 0.0, //
                b1, c1, 0.0, 0.0, //
                0.0, 0.0, a2, b2, //
                0.0, 0.0, b2, c2,
            ],
        )
    }

    pub fn measurement_noise(&self) -> DMatrix<f64> {
        match self.measurement {
            MeasurementKind::BearingRange => DMatrix::from_diagonal(&DVector::from_vec(vec![
                self.bearing_variance,
                self.range_variance,
            ])),
            MeasurementKind::Linear => DMatrix::identity(4, 4) * self.linear_measurement_variance,
        }
    }

    pub fn initial_state(&self) -> GaussianState {
        GaussianState {
            mean: DVector::from_row_slice(&self.initial_mean),
            covariance: DMatrix::from_diagonal(&DVector::from_row_slice(
                &self.initial_covariance_diag,
            )),
            timestamp: 0,
        }
    }

    pub fn model(&self) -> ScenarioModel {
        ScenarioModel {
            transition: self.transition_matrix(),
            process_noise: self.process_noise(),
            measurement_noise: self.measurement_noise(),
            radar: self.radar_position,
            kind: self.measurement,
            range_clamps: AtomicUsize::new(0),
        }
    }

    /// Every violated invariant, as human-readable messages.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.sampling_period > 0.0) {
            out.push(format!("sampling_period must be positive, got {}", self.sampling_period));
        }
        if self.horizon == 0 {
            out.push("horizon must be at least 1".into());
        }
        for (name, v) in [
            ("q1", self.q1),
            ("q2", self.q2),
            ("bearing_variance", self.bearing_variance),
            ("range_variance", self.range_variance),
            ("linear_measurement_variance", self.linear_measurement_variance),
        ] {
            if !(v >= 0.0) {
                out.push(format!("{name} must be nonnegative, got {v}"));
            }
        }
        if self.initial_covariance_diag.iter().any(|&v| !(v > 0.0)) {
            out.push("initial_covariance_diag entries must be positive".into());
        }
        if self.mc_runs == 0 {
            out.push("mc_runs must be at least 1".into());
        }
        out
    }
}

/// Constant-velocity motion with bearing-range (or direct linear) measurements.
#[derive(Debug)]
pub struct ScenarioModel {
    transition: DMatrix<f64>,
    process_noise: DMatrix<f64>,
    measurement_noise: DMatrix<f64>,
    radar: [f64; 2],
    kind: MeasurementKind,
    range_clamps: AtomicUsize,
}

/// Smallest range used in the bearing-range Jacobian.
pub const MIN_RANGE: f64 = 1e-9;

impl ScenarioModel {
    pub fn kind(&self) -> MeasurementKind {
        self.kind
    }

    pub fn transition_matrix(&self) -> &DMatrix<f64> {
        &self.transition
    }

    /// Observation matrix of the linear variant.
    pub fn observation_matrix(&self) -> Option<DMatrix<f64>> {
        match self.kind {
            MeasurementKind::Linear => Some(DMatrix::identity(4, 4)),
            MeasurementKind::BearingRange => None,
        }
    }

    /// How often the Jacobian hit the minimum-range clamp.
    pub fn range_clamp_count(&self) -> usize {
        self.range_clamps.load(Ordering::Relaxed)
    }
}

impl StateSpaceModel for ScenarioModel {
    fn state_dim(&self) -> usize {
        4
    }

    fn measurement_dim(&self) -> usize {
        match self.kind {
            MeasurementKind::BearingRange => 2,
            MeasurementKind::Linear => 4,
        }
    }

    fn transition(&self, _k: usize, x: &DVector<f64>) -> DVector<f64> {
        &self.transition * x
    }

    fn measure(&self, _k: usize, x: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            MeasurementKind::BearingRange => {
                let dx = x[0] - self.radar[0];
                let dy = x[2] - self.radar[1];
                DVector::from_vec(vec![dy.atan2(dx), dx.hypot(dy)])
            }
            MeasurementKind::Linear => x.clone(),
        }
    }

    fn process_noise(&self, _k: usize) -> DMatrix<f64> {
        self.process_noise.clone()
    }

    fn measurement_noise(&self, _k: usize) -> DMatrix<f64> {
        self.measurement_noise.clone()
    }

    fn angular_measurement_dims(&self) -> &[usize] {
        match self.kind {
            MeasurementKind::BearingRange => &[0],
            MeasurementKind::Linear => &[],
        }
    }

    fn transition_jacobian(&self, _k: usize, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.transition.clone())
    }

    fn measurement_jacobian(&self, _k: usize, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        match self.kind {
            MeasurementKind::BearingRange => {
                let dx = x[0] - self.radar[0];
                let dy = x[2] - self.radar[1];
                let mut r = dx.hypot(dy);
                if r < MIN_RANGE {
                    self.range_clamps.fetch_add(1, Ordering::Relaxed);
                    r = MIN_RANGE;
                }
                let r2 = r * r;
                Some(DMatrix::from_row_slice(
                    2,
                    4,
                    &[
                        -dy / r2, 0.0, dx / r2, 0.0, //
                        dx / r, 0.0, dy / r, 0.0,
                    ],
                ))
            }
            MeasurementKind::Linear => Some(DMatrix::identity(4, 4)),
        }
    }
}

/// Truth, measurements and the estimates of each filter for one run.
#[derive(Debug, Clone, Default)]
pub struct TrackRecord {
    pub truth: Vec<DVector<f64>>,
    pub measurements: Vec<DVector<f64>>,
    pub estimates: Vec<(FilterKind, FilterTrack)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterTrack {
    pub filtered: Vec<GaussianState>,
    pub predicted: Vec<GaussianState>,
    pub smoothed: Option<Vec<GaussianState>>,
}

fn sample_gaussian(mean: &DVector<f64>, factor: &DMatrix<f64>, rng: &mut RngStream) -> DVector<f64> {
    let w = DVector::from_fn(mean.len(), |_, _| rng.standard_normal());
    mean + factor * w
}

/// Draws a truth trajectory and its measurements.
pub fn simulate_truth(config: &ScenarioConfig, rng: &mut RngStream) -> Result<TrackRecord> {
    let model = config.model();
    let prior = config.initial_state();
    let (q_factor, _) = factor_psd(&model.process_noise)?;
    let (r_factor, _) = factor_psd(&model.measurement_noise)?;
    let mut x = if config.random_initial_truth {
        let (p_factor, _) = factor_psd(&prior.covariance)?;
        sample_gaussian(&prior.mean, &p_factor, rng)
    } else {
        prior.mean.clone()
    };
    let zero_state = DVector::zeros(4);
    let zero_meas = DVector::zeros(model.measurement_dim());
    let mut truth = Vec::with_capacity(config.horizon + 1);
    let mut measurements = Vec::with_capacity(config.horizon + 1);
    for k in 0..=config.horizon {
        if k > 0 {
            x = model.transition(k - 1, &x) + sample_gaussian(&zero_state, &q_factor, rng);
        }
        let mut z = model.measure(k, &x) + sample_gaussian(&zero_meas, &r_factor, rng);
        wrap_components(&mut z, model.angular_measurement_dims());
        truth.push(x.clone());
        measurements.push(z);
    }
    Ok(TrackRecord {
        truth,
        measurements,
        estimates: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    Kf,
    Ekf,
    Ukf,
    Sif,
    SifSqrt,
}

impl FilterKind {
    pub const ALL: [FilterKind; 5] = [
        FilterKind::Kf,
        FilterKind::Ekf,
        FilterKind::Ukf,
        FilterKind::Sif,
        FilterKind::SifSqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Kf => "kf",
            FilterKind::Ekf => "ekf",
            FilterKind::Ukf => "ukf",
            FilterKind::Sif => "sif",
            FilterKind::SifSqrt => "sif-sqrt",
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FilterKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown filter '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSettings {
    pub sir: SirConfig,
    pub ukf: UkfParams,
    pub inflate_mean_error: bool,
    pub jacobian: JacobianMode,
    pub smooth: bool,
}

impl Default for FilterSettings {
    fn default() -> Self {
        Self {
            sir: SirConfig::default(),
            ukf: UkfParams::default_for(4),
            inflate_mean_error: false,
            jacobian: JacobianMode::Auto,
            smooth: false,
        }
    }
}

/// Runs one filter over a measurement sequence starting from `prior` at `k = 0`.
pub fn run_filter(
    kind: FilterKind,
    model: &ScenarioModel,
    prior: &GaussianState,
    measurements: &[DVector<f64>],
    settings: &FilterSettings,
    rng: &mut RngStream,
) -> Result<FilterTrack> {
    if measurements.is_empty() {
        return Err(Error::EmptyInput("measurement sequence"));
    }
    let options = UpdateOptions {
        inflate_mean_error: settings.inflate_mean_error,
        ..UpdateOptions::default()
    };
    if kind == FilterKind::SifSqrt {
        return run_sqrt(model, prior, measurements, settings, options, rng);
    }

    let observation = model.observation_matrix();
    if kind == FilterKind::Kf && observation.is_none() {
        return Err(Error::InvalidConfig(
            "the kf filter requires the linear measurement variant".into(),
        ));
    }
    let f = model.transition_matrix();
    let q = model.process_noise(0);
    let r = model.measurement_noise(0);

    let mut filtered: Vec<GaussianState> = Vec::with_capacity(measurements.len());
    let mut predicted = Vec::with_capacity(measurements.len());
    let mut predictions: Vec<PredictionResult> = Vec::with_capacity(measurements.len());
    for (k, z) in measurements.iter().enumerate() {
        let prediction = if k == 0 {
            prior.clone()
        } else {
            let from = &filtered[k - 1];
            let p = match kind {
                FilterKind::Kf => PredictionResult {
                    predicted: kf_predict(from, f, &q),
                    cross_cov: Some(&from.covariance * f.transpose()),
                    iterations: 0,
                    factor_fallbacks: 0,
                },
                FilterKind::Ekf => ekf_predict(from, model, settings.jacobian)?,
                FilterKind::Ukf => ukf_predict(from, model, &settings.ukf)?,
                FilterKind::Sif => gaussian::predict(from, model, 1, &settings.sir, rng, settings.smooth)?,
                FilterKind::SifSqrt => unreachable!(),
            };
            let state = p.predicted.clone();
            predictions.push(p);
            state
        };
        let posterior = match kind {
            FilterKind::Kf => kf_update(&prediction, z, observation.as_ref().unwrap(), &r)?,
            FilterKind::Ekf => ekf_update(&prediction, z, model, settings.jacobian)?,
            FilterKind::Ukf => ukf_update(&prediction, z, model, &settings.ukf)?,
            FilterKind::Sif => {
                gaussian::update(&prediction, z, model, &settings.sir, rng, options)?.filtered
            }
            FilterKind::SifSqrt => unreachable!(),
        };
        predicted.push(prediction);
        filtered.push(posterior);
    }
    let smoothed = if settings.smooth {
        Some(match kind {
            FilterKind::Kf => {
                let preds: Vec<GaussianState> =
                    predictions.iter().map(|p| p.predicted.clone()).collect();
                rts_smooth(&filtered, &preds, f)?
            }
            _ => gaussian::smooth(&filtered, &predictions)?,
        })
    } else {
        None
    };
    Ok(FilterTrack {
        filtered,
        predicted,
        smoothed,
    })
}

fn run_sqrt(
    model: &ScenarioModel,
    prior: &GaussianState,
    measurements: &[DVector<f64>],
    settings: &FilterSettings,
    options: UpdateOptions,
    rng: &mut RngStream,
) -> Result<FilterTrack> {
    let mut filtered: Vec<SqrtGaussianState> = Vec::with_capacity(measurements.len());
    let mut predicted = Vec::with_capacity(measurements.len());
    let mut predictions: Vec<SqrtPrediction> = Vec::with_capacity(measurements.len());
    let start = SqrtGaussianState::from_gaussian(prior)?;
    for (k, z) in measurements.iter().enumerate() {
        let prediction = if k == 0 {
            start.clone()
        } else {
            let p = predict_sqrt(&filtered[k - 1], model, 1, &settings.sir, rng, settings.smooth)?;
            let state = p.predicted.clone();
            predictions.push(p);
            state
        };
        let posterior = update_sqrt(&prediction, z, model, &settings.sir, rng, options)?.filtered;
        predicted.push(prediction);
        filtered.push(posterior);
    }
    let smoothed = if settings.smooth {
        Some(
            smooth_sqrt(&filtered, &predictions)?
                .iter()
                .map(SqrtGaussianState::to_gaussian)
                .collect(),
        )
    } else {
        None
    };
    Ok(FilterTrack {
        filtered: filtered.iter().map(SqrtGaussianState::to_gaussian).collect(),
        predicted: predicted.iter().map(SqrtGaussianState::to_gaussian).collect(),
        smoothed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloOptions {
    pub filters: Vec<FilterKind>,
    pub settings: FilterSettings,
    pub normalization: Normalization,
    /// Keep every run's per-step metrics (needed for the per-run CSV).
    pub keep_runs: bool,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        Self {
            filters: vec![FilterKind::Ekf, FilterKind::Ukf, FilterKind::Sif],
            settings: FilterSettings::default(),
            normalization: Normalization::TermCount,
            keep_runs: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedMetrics {
    pub rmse: Vec<f64>,
    pub anees: f64,
}

/// Aggregated metrics of one filter over all non-divergent runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub filter: FilterKind,
    pub rmse: Vec<f64>,
    pub anees: f64,
    pub divergence_count: usize,
    pub runs_used: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub smoothed: Option<SmoothedMetrics>,
    /// Total time spent in the filter; excluded from serialized output.
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Per-step metrics of one filter in one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_index: usize,
    pub filter: FilterKind,
    /// `None` when the run diverged or the filter failed.
    pub filtered: Option<RunMetrics>,
    pub smoothed: Option<RunMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloOutcome {
    pub reports: Vec<MetricsReport>,
    pub runs: Vec<RunRecord>,
}

struct FilterRun {
    filtered: Option<RunMetrics>,
    smoothed: Option<RunMetrics>,
    elapsed: Duration,
}

fn single_run(
    config: &ScenarioConfig,
    options: &MonteCarloOptions,
    run_index: usize,
) -> Result<Vec<FilterRun>> {
    let base = RngStream::new(config.seed, run_index as u64);
    let mut truth_rng = base.fork(TRUTH_TAG);
    let record = simulate_truth(config, &mut truth_rng)?;
    let model = config.model();
    let prior = config.initial_state();
    Ok(options
        .filters
        .iter()
        .map(|&kind| {
            let mut rng = base.fork(FILTER_TAG);
            let start = Instant::now();
            let track = run_filter(kind, &model, &prior, &record.measurements, &options.settings, &mut rng);
            let elapsed = start.elapsed();
            let (filtered, smoothed) = match track {
                Ok(track) => {
                    let f = evaluate_track(&record.truth, &track.filtered);
                    let s = track.smoothed.map(|s| evaluate_track(&record.truth, &s));
                    if f.is_divergent() {
                        (None, None)
                    } else {
                        (Some(f), s.filter(|s| !s.is_divergent()))
                    }
                }
                Err(_) => (None, None),
            };
            FilterRun {
                filtered,
                smoothed,
                elapsed,
            }
        })
        .collect())
}

/// Runs `config.mc_runs` independent runs in parallel on the current rayon pool.
///
/// Run `i` derives all randomness from `(config.seed, i)`, and aggregation
/// follows run order, so the result does not depend on the thread count.
pub fn run_monte_carlo(
    config: &ScenarioConfig,
    options: &MonteCarloOptions,
) -> Result<MonteCarloOutcome> {
    let issues = config.diagnostics();
    if !issues.is_empty() {
        return Err(Error::InvalidConfig(issues.join("; ")));
    }
    if options.filters.is_empty() {
        return Err(Error::InvalidConfig("no filter selected".into()));
    }
    options.settings.sir.validate()?;
    if options.filters.contains(&FilterKind::Ukf) {
        options.settings.ukf.validate(4)?;
    }
    if options.filters.contains(&FilterKind::Kf) && config.measurement != MeasurementKind::Linear {
        return Err(Error::InvalidConfig(
            "the kf filter requires the linear measurement variant".into(),
        ));
    }

    let per_run: Vec<Vec<FilterRun>> = (0..config.mc_runs)
        .into_par_iter()
        .map(|i| single_run(config, options, i))
        .collect::<Result<_>>()?;

    let norm = options.normalization;
    let mut reports = Vec::with_capacity(options.filters.len());
    for (fi, &kind) in options.filters.iter().enumerate() {
        let mut rmse = vec![CompensatedSum::default(); 4];
        let mut anees = CompensatedSum::default();
        let mut s_rmse = vec![CompensatedSum::default(); 4];
        let mut s_anees = CompensatedSum::default();
        let mut used = 0;
        let mut s_used = 0;
        let mut wall = Duration::ZERO;
        for run in &per_run {
            let r = &run[fi];
            wall += r.elapsed;
            if let Some(m) = &r.filtered {
                used += 1;
                for (acc, v) in rmse.iter_mut().zip(m.rmse(norm)) {
                    acc.add(v);
                }
                anees.add(m.anees(norm));
            }
            if let Some(m) = &r.smoothed {
                s_used += 1;
                for (acc, v) in s_rmse.iter_mut().zip(m.rmse(norm)) {
                    acc.add(v);
                }
                s_anees.add(m.anees(norm));
            }
        }
        let mean = |acc: &CompensatedSum, n: usize| {
            if n == 0 {
                f64::NAN
            } else {
                acc.total() / n as f64
            }
        };
        reports.push(MetricsReport {
            filter: kind,
            rmse: rmse.iter().map(|a| mean(a, used)).collect(),
            anees: mean(&anees, used),
            divergence_count: config.mc_runs - used,
            runs_used: used,
            smoothed: options.settings.smooth.then(|| SmoothedMetrics {
                rmse: s_rmse.iter().map(|a| mean(a, s_used)).collect(),
                anees: mean(&s_anees, s_used),
            }),
            wall_time: wall,
        });
    }

    let runs = if options.keep_runs {
        per_run
            .into_iter()
            .enumerate()
            .flat_map(|(i, runs)| {
                options
                    .filters
                    .iter()
                    .zip(runs)
                    .map(move |(&filter, r)| RunRecord {
                        run_index: i,
                        filter,
                        filtered: r.filtered,
                        smoothed: r.smoothed,
                    })
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(MonteCarloOutcome { reports, runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_free_kinematics() {
        let config = ScenarioConfig {
            q1: 0.0,
            q2: 0.0,
            bearing_variance: 0.0,
            range_variance: 0.0,
            initial_mean: [50.0, 1.0, 1.0, 1.0],
            random_initial_truth: false,
            ..ScenarioConfig::default()
        };
        let mut rng = RngStream::new(1, 0);
        let rec = simulate_truth(&config, &mut rng).unwrap();
        assert_eq!(rec.truth.len(), 21);
        assert!((rec.truth[5][0] - 55.0).abs() < 1e-12);
        assert!((rec.truth[5][2] - 6.0).abs() < 1e-12);
        assert!((rec.measurements[5][0] - 6f64.atan2(5.0)).abs() < 1e-12);
        assert!((rec.measurements[5][1] - 61f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn default_constants() {
        let c = ScenarioConfig::default();
        let q = c.process_noise();
        assert!((q[(0, 0)] - 0.05 / 3.0).abs() < 1e-15);
        assert!((q[(0, 1)] - 0.025).abs() < 1e-15);
        assert!((q[(3, 3)] - 0.05).abs() < 1e-15);
        assert!((c.measurement_noise()[(0, 0)] - 0.2 * PI / 180.0).abs() < 1e-15);
        assert_eq!(c.radar_position, [50.0, 0.0]);
        assert_eq!(c.horizon, 20);
        assert!(c.diagnostics().is_empty());
    }

    #[test]
    fn filter_names_round_trip() {
        for k in FilterKind::ALL {
            assert_eq!(k.name().parse::<FilterKind>().unwrap(), k);
        }
        assert!("pf".parse::<FilterKind>().is_err());
    }

    #[test]
    fn kf_requires_linear_variant() {
        let config = ScenarioConfig {
            mc_runs: 1,
            ..ScenarioConfig::default()
        };
        let options = MonteCarloOptions {
            filters: vec![FilterKind::Kf],
            ..MonteCarloOptions::default()
        };
        assert!(matches!(
            run_monte_carlo(&config, &options),
            Err(Error::InvalidConfig(_))
        ));
    }
}
