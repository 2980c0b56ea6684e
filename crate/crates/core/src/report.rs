//! Text, JSON and CSV renderings of Monte-Carlo results.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Normalization;
use crate::scenario::{FilterSettings, MetricsReport, MonteCarloOutcome, ScenarioConfig};

/// Everything needed to reproduce and read a benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: ScenarioConfig,
    pub settings: FilterSettings,
    pub normalization: Normalization,
    pub reports: Vec<MetricsReport>,
}

fn table_block(out: &mut String, reports: &[MetricsReport], rows: impl Fn(&MetricsReport) -> Option<(Vec<f64>, f64)>) {
    let _ = write!(out, "{:<10}", "");
    for r in reports {
        let _ = write!(out, "{:>12}", r.filter.name().to_uppercase());
    }
    out.push('\n');
    let values: Vec<Option<(Vec<f64>, f64)>> = reports.iter().map(&rows).collect();
    let dim = values.iter().flatten().map(|(rmse, _)| rmse.len()).max().unwrap_or(0);
    let cell = |v: Option<f64>| match v {
        Some(v) => format!("{v:>12.4}"),
        None => format!("{:>12}", "-"),
    };
    for i in 0..dim {
        let _ = write!(out, "{:<10}", format!("RMSE x{}", i + 1));
        for v in &values {
            out.push_str(&cell(v.as_ref().and_then(|(rmse, _)| rmse.get(i).copied())));
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<10}", "ANEES");
    for v in &values {
        out.push_str(&cell(v.as_ref().map(|(_, a)| *a)));
    }
    out.push('\n');
}

/// One column per filter, RMSE rows per state component and an ANEES row, 4 decimals.
pub fn render_table(reports: &[MetricsReport]) -> String {
    let mut out = String::new();
    table_block(&mut out, reports, |r| Some((r.rmse.clone(), r.anees)));
    let _ = write!(out, "{:<10}", "diverged");
    for r in reports {
        let _ = write!(out, "{:>12}", r.divergence_count);
    }
    out.push('\n');
    if reports.iter().any(|r| r.smoothed.is_some()) {
        out.push_str("\nsmoothed\n");
        table_block(&mut out, reports, |r| {
            r.smoothed.as_ref().map(|s| (s.rmse.clone(), s.anees))
        });
    }
    out
}

pub fn render_json(summary: &Summary) -> Result<String> {
    serde_json::to_string_pretty(summary).map_err(|e| Error::Output(e.to_string()))
}

/// One row per run, filter, step and estimate kind:
/// `run_index,filter,kind,step,se_x1..se_xn,nees`. Divergent runs are omitted.
pub fn write_runs_csv<W: Write>(outcome: &MonteCarloOutcome, writer: W) -> Result<()> {
    let io = |e: csv::Error| Error::Output(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    let dim = outcome
        .runs
        .iter()
        .find_map(|r| r.filtered.as_ref())
        .and_then(|m| m.squared_errors.first())
        .map_or(4, Vec::len);
    let mut header = vec!["run_index".to_string(), "filter".into(), "kind".into(), "step".into()];
    header.extend((1..=dim).map(|i| format!("se_x{i}")));
    header.push("nees".into());
    w.write_record(&header).map_err(io)?;
    for run in &outcome.runs {
        for (kind, metrics) in [("filtered", &run.filtered), ("smoothed", &run.smoothed)] {
            let Some(m) = metrics else { continue };
            for (step, (se, nees)) in m.squared_errors.iter().zip(&m.nees).enumerate() {
                let mut record = vec![
                    run.run_index.to_string(),
                    run.filter.to_string(),
                    kind.to_string(),
                    step.to_string(),
                ];
                record.extend(se.iter().map(f64::to_string));
                record.push(nees.to_string());
                w.write_record(&record).map_err(io)?;
            }
        }
    }
    w.flush().map_err(|e| Error::Output(e.to_string()))
}
