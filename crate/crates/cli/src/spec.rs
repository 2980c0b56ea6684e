use std::path::{Path, PathBuf};

use serde::Deserialize;
use sif_core::baseline::{JacobianMode, UkfParams};
use sif_core::metrics::Normalization;
use sif_core::scenario::{FilterKind, FilterSettings, MeasurementKind, MonteCarloOptions, ScenarioConfig};
use sif_core::SirConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SirSection {
    pub max_iterations: Option<usize>,
    pub error_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UkfSection {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

/// Contents of a TOML config file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub filters: Option<Vec<FilterKind>>,
    pub smooth: Option<bool>,
    pub inflate_mean_error: Option<bool>,
    pub jacobian: Option<JacobianMode>,
    pub normalization: Option<Normalization>,
    pub threads: Option<usize>,
    pub scenario: ScenarioConfig,
    pub sir: SirSection,
    pub ukf: UkfSection,
    pub output: OutputSection,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("cannot parse {}: {e}", path.display()))
    }
}

/// Fully resolved description of one benchmark invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub scenario: ScenarioConfig,
    pub filters: Vec<FilterKind>,
    pub smooth: bool,
    pub sir: SirConfig,
    pub ukf: UkfParams,
    pub inflate_mean_error: bool,
    pub jacobian: JacobianMode,
    pub normalization: Normalization,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub threads: Option<usize>,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self::from_file(ConfigFile::default())
    }
}

impl RunSpec {
    pub fn from_file(file: ConfigFile) -> Self {
        let defaults = UkfParams::default_for(4);
        let sir_defaults = SirConfig::default();
        Self {
            scenario: file.scenario,
            filters: file
                .filters
                .unwrap_or_else(|| vec![FilterKind::Ekf, FilterKind::Ukf, FilterKind::Sif]),
            smooth: file.smooth.unwrap_or(false),
            sir: SirConfig {
                max_iterations: file.sir.max_iterations.unwrap_or(sir_defaults.max_iterations),
                error_tolerance: file.sir.error_tolerance.unwrap_or(sir_defaults.error_tolerance),
                ..sir_defaults
            },
            ukf: UkfParams {
                alpha: file.ukf.alpha.unwrap_or(defaults.alpha),
                beta: file.ukf.beta.unwrap_or(defaults.beta),
                kappa: file.ukf.kappa.unwrap_or(defaults.kappa),
            },
            inflate_mean_error: file.inflate_mean_error.unwrap_or(false),
            jacobian: file.jacobian.unwrap_or_default(),
            normalization: file.normalization.unwrap_or_default(),
            out: file.output.dir,
            format: file.output.format.unwrap_or_default(),
            threads: file.threads,
        }
    }

    /// Swaps the full SIF for its square-root form, adding it if absent.
    pub fn use_sqrt(&mut self) {
        let mut swapped = false;
        for f in &mut self.filters {
            if *f == FilterKind::Sif {
                *f = FilterKind::SifSqrt;
                swapped = true;
            }
        }
        if !swapped && !self.filters.contains(&FilterKind::SifSqrt) {
            self.filters.push(FilterKind::SifSqrt);
        }
    }

    pub fn settings(&self) -> FilterSettings {
        FilterSettings {
            sir: self.sir,
            ukf: self.ukf,
            inflate_mean_error: self.inflate_mean_error,
            jacobian: self.jacobian,
            smooth: self.smooth,
        }
    }

    pub fn monte_carlo_options(&self) -> MonteCarloOptions {
        MonteCarloOptions {
            filters: self.filters.clone(),
            settings: self.settings(),
            normalization: self.normalization,
            keep_runs: self.format == OutputFormat::Csv,
        }
    }

    /// Every invariant violation, without running anything.
    pub fn validate(&self) -> Vec<String> {
        let mut out = self.scenario.diagnostics();
        if self.filters.is_empty() {
            out.push("at least one filter must be selected".into());
        }
        let mut seen = Vec::new();
        for f in &self.filters {
            if seen.contains(f) {
                out.push(format!("filter '{f}' is selected more than once"));
            }
            seen.push(*f);
        }
        if self.filters.contains(&FilterKind::Kf)
            && self.scenario.measurement != MeasurementKind::Linear
        {
            out.push("the kf filter requires scenario.measurement = \"linear\"".into());
        }
        if self.sir.max_iterations == 0 {
            out.push("SIR max_iterations must be at least 1".into());
        }
        if !(self.sir.error_tolerance >= 0.0) {
            out.push(format!(
                "SIR error_tolerance must be nonnegative, got {}",
                self.sir.error_tolerance
            ));
        }
        if let Err(e) = self.ukf.validate(4) {
            out.push(e.to_string());
        }
        if self.threads == Some(0) {
            out.push("threads must be at least 1".into());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_is_valid_and_matches_scenario_constants() {
        let spec = RunSpec::default();
        assert!(spec.validate().is_empty());
        assert_eq!(spec.scenario, ScenarioConfig::default());
        assert_eq!(spec.sir.max_iterations, 10);
        assert_eq!(spec.ukf, UkfParams::default_for(4));
    }

    #[test]
    fn zero_runs_gives_one_diagnostic() {
        let mut spec = RunSpec::default();
        spec.scenario.mc_runs = 0;
        assert_eq!(spec.validate().len(), 1);
    }

    #[test]
    fn degenerate_ukf_scaling_is_reported() {
        let mut spec = RunSpec::default();
        spec.ukf.kappa = -4.0;
        let d = spec.validate();
        assert_eq!(d.len(), 1);
        assert!(d[0].contains("scaling"), "{d:?}");
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let file: ConfigFile = toml::from_str(
            "filters = [\"sif-sqrt\"]\n[scenario]\nmc_runs = 5\n[ukf]\nkappa = 0.0\n",
        )
        .unwrap();
        let spec = RunSpec::from_file(file);
        assert_eq!(spec.filters, vec![FilterKind::SifSqrt]);
        assert_eq!(spec.scenario.mc_runs, 5);
        assert_eq!(spec.scenario.horizon, 20);
        assert_eq!(spec.ukf.alpha, 0.5);
        assert_eq!(spec.ukf.kappa, 0.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ConfigFile>("nmax = 3\n").is_err());
    }

    #[test]
    fn sqrt_swaps_sif() {
        let mut spec = RunSpec::default();
        spec.use_sqrt();
        assert_eq!(spec.filters, vec![FilterKind::Ekf, FilterKind::Ukf, FilterKind::SifSqrt]);
    }
}
