//! `sif`: Monte-Carlo benchmark of the stochastic integration filter against
//! EKF, UKF and KF on the bearing-range tracking scenario.

mod spec;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sif_core::metrics::Normalization;
use sif_core::report::{render_json, render_table, write_runs_csv, Summary};
use sif_core::scenario::{run_monte_carlo, FilterKind, MeasurementKind};
use sif_core::Error;

use spec::{ConfigFile, OutputFormat, RunSpec};

#[derive(Debug, Parser)]
#[command(name = "sif", version, about = "Stochastic integration filter benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the Monte-Carlo benchmark and report RMSE / ANEES per filter.
    Run(SpecArgs),
    /// Check a configuration and list every problem without running.
    Validate(SpecArgs),
}

#[derive(Debug, Args)]
struct SpecArgs {
    /// TOML configuration file; omitted keys keep the benchmark scenario defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated subset of kf, ekf, ukf, sif, sif-sqrt.
    #[arg(long, value_delimiter = ',', value_parser = parse_filter)]
    filters: Option<Vec<FilterKind>>,
    #[arg(long)]
    mc_runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also run the smoother and report its metrics.
    #[arg(long)]
    smooth: bool,
    /// Use the square-root form of the SIF.
    #[arg(long)]
    sqrt: bool,
    /// Maximum number of SIR iterations.
    #[arg(long)]
    nmax: Option<usize>,
    /// SIR stopping tolerance on the trace of the integration error covariance.
    #[arg(long)]
    eps_min: Option<f64>,
    #[arg(long)]
    ukf_alpha: Option<f64>,
    #[arg(long)]
    ukf_beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    ukf_kappa: Option<f64>,
    /// Add the SIR mean-integration error to the innovation covariance.
    #[arg(long)]
    inflate: bool,
    /// bearing-range (default) or linear.
    #[arg(long, value_parser = parse_measurement)]
    measurement: Option<MeasurementKind>,
    /// Average over T instead of T + 1 time steps.
    #[arg(long)]
    horizon_normalization: bool,
    /// Directory for summary.txt, summary.json and (with --format csv) runs.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_filter(s: &str) -> Result<FilterKind, Error> {
    s.parse()
}

fn parse_measurement(s: &str) -> Result<MeasurementKind, String> {
    match s {
        "bearing-range" => Ok(MeasurementKind::BearingRange),
        "linear" => Ok(MeasurementKind::Linear),
        other => Err(format!("unknown measurement '{other}'")),
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl SpecArgs {
    fn resolve(&self) -> Result<RunSpec, Failure> {
        let file = match &self.config {
            Some(path) => ConfigFile::load(path).map_err(Failure::Config)?,
            None => ConfigFile::default(),
        };
        let mut spec = RunSpec::from_file(file);
        if let Some(filters) = &self.filters {
            spec.filters = filters.clone();
        }
        if self.sqrt {
            spec.use_sqrt();
        }
        if let Some(v) = self.mc_runs {
            spec.scenario.mc_runs = v;
        }
        if let Some(v) = self.seed {
            spec.scenario.seed = v;
        }
        if let Some(v) = self.measurement {
            spec.scenario.measurement = v;
        }
        spec.smooth |= self.smooth;
        spec.inflate_mean_error |= self.inflate;
        if let Some(v) = self.nmax {
            spec.sir.max_iterations = v;
        }
        if let Some(v) = self.eps_min {
            spec.sir.error_tolerance = v;
        }
        if let Some(v) = self.ukf_alpha {
            spec.ukf.alpha = v;
        }
        if let Some(v) = self.ukf_beta {
            spec.ukf.beta = v;
        }
        if let Some(v) = self.ukf_kappa {
            spec.ukf.kappa = v;
        }
        if self.horizon_normalization {
            spec.normalization = Normalization::Horizon;
        }
        if self.out.is_some() {
            spec.out = self.out.clone();
        }
        if let Some(v) = self.format {
            spec.format = v;
        }
        if self.threads.is_some() {
            spec.threads = self.threads;
        }
        Ok(spec)
    }
}

fn run(spec: &RunSpec) -> Result<(), Failure> {
    let diagnostics = spec.validate();
    if !diagnostics.is_empty() {
        return Err(Failure::Config(diagnostics.join("\n")));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = spec.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Failure::Runtime(format!("cannot start worker threads: {e}")))?;
    let options = spec.monte_carlo_options();
    let outcome = pool
        .install(|| run_monte_carlo(&spec.scenario, &options))
        .map_err(|e| match e {
            Error::InvalidConfig(_) | Error::InvalidScaling { .. } => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        })?;

    let summary = Summary {
        scenario: spec.scenario.clone(),
        settings: spec.settings(),
        normalization: spec.normalization,
        reports: outcome.reports.clone(),
    };
    let runtime = |e: String| Failure::Runtime(e);
    let table = render_table(&summary.reports);
    let json = render_json(&summary).map_err(|e| runtime(e.to_string()))?;
    let io_err = |e: io::Error| Failure::Runtime(e.to_string());

    match &spec.out {
        Some(dir) => {
            fs::create_dir_all(dir)
                .map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))?;
            fs::write(dir.join("summary.txt"), &table).map_err(io_err)?;
            fs::write(dir.join("summary.json"), format!("{json}\n")).map_err(io_err)?;
            if spec.format == OutputFormat::Csv {
                let file = fs::File::create(dir.join("runs.csv")).map_err(io_err)?;
                write_runs_csv(&outcome, io::BufWriter::new(file))
                    .map_err(|e| runtime(e.to_string()))?;
            }
            print!("{table}");
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            match spec.format {
                OutputFormat::Text => write!(lock, "{table}").map_err(io_err)?,
                OutputFormat::Json => writeln!(lock, "{json}").map_err(io_err)?,
                OutputFormat::Csv => {
                    write_runs_csv(&outcome, &mut lock).map_err(|e| runtime(e.to_string()))?
                }
            }
        }
    }
    for r in &outcome.reports {
        eprintln!(
            "{}: {} runs used, {} diverged, {:.2} s",
            r.filter,
            r.runs_used,
            r.divergence_count,
            r.wall_time.as_secs_f64()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Run(args) => args.resolve().and_then(|spec| run(&spec)),
        Command::Validate(args) => args.resolve().and_then(|spec| {
            let diagnostics = spec.validate();
            if diagnostics.is_empty() {
                println!("ok");
                Ok(())
            } else {
                for d in &diagnostics {
                    println!("{d}");
                }
                Err(Failure::Config(format!("{} problem(s) found", diagnostics.len())))
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
