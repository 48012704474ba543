use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::runners::{ExperimentReport, ScalingRow};
use super::ExperimentError;
use crate::pricing::{payoff, provisioning_cost};

pub const TRACE_COLUMNS: [&str; 8] = [
    "request_index",
    "iteration",
    "provider_id",
    "omega",
    "bid",
    "cost",
    "payoff",
    "is_winner",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        })
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown format {other:?} (expected csv or json)")),
        }
    }
}

/// Shortest decimal that round-trips the value rounded to 9 significant digits.
pub fn sig9(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{value:.8e}").parse().expect("valid float");
    format!("{rounded}")
}

fn opt(value: Option<f64>) -> String {
    value.map(sig9).unwrap_or_default()
}

/// One row per (request, iteration, provider), in that order.
pub fn write_trace_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<(), ExperimentError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(TRACE_COLUMNS)?;
    for played in &report.outcomes {
        for record in &played.outcome.trace {
            for entry in &record.profile.entries {
                let winner = record.winner_id == Some(entry.provider_id);
                let ctx = played
                    .players
                    .iter()
                    .find(|p| p.provider_id == entry.provider_id)
                    .map(|p| p.ctx)
                    .expect("trace entry without player");
                let cost = entry.omega.map(|w| provisioning_cost(w, &ctx));
                let earned = match (entry.bid, cost) {
                    (Some(b), Some(c)) => payoff(winner, b, c),
                    _ => 0.0,
                };
                writer.write_record([
                    played.request_index.to_string(),
                    record.iteration.to_string(),
                    entry.provider_id.to_string(),
                    opt(entry.omega),
                    opt(entry.bid),
                    opt(cost),
                    sig9(earned),
                    winner.to_string(),
                ])?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn write_report<W: Write>(
    report: &ExperimentReport,
    format: ReportFormat,
    mut out: W,
) -> Result<(), ExperimentError> {
    match format {
        ReportFormat::Csv => write_trace_csv(report, out),
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, report)?;
            writeln!(out)?;
            Ok(())
        }
    }
}

/// Writes `report` to `path`, or to standard output when `path` is `-`.
pub fn export_report(
    report: &ExperimentReport,
    format: ReportFormat,
    path: &str,
) -> Result<(), ExperimentError> {
    with_output(path, |w| write_report(report, format, w))
}

/// Scaling table; `with_timing = false` drops the wall-time column so that
/// repeated runs compare byte for byte.
pub fn write_scaling<W: Write>(
    rows: &[ScalingRow],
    format: ReportFormat,
    with_timing: bool,
    mut out: W,
) -> Result<(), ExperimentError> {
    match format {
        ReportFormat::Csv => {
            let mut writer = csv::Writer::from_writer(out);
            let mut header = vec!["n", "iterations", "converged_runs", "runs"];
            if with_timing {
                header.insert(2, "elapsed_seconds");
            }
            writer.write_record(&header)?;
            for row in rows {
                let mut fields = vec![
                    row.n.to_string(),
                    sig9(row.iterations),
                    row.converged_runs.to_string(),
                    row.runs.to_string(),
                ];
                if with_timing {
                    fields.insert(2, sig9(row.elapsed_seconds));
                }
                writer.write_record(&fields)?;
            }
            writer.flush()?;
        }
        ReportFormat::Json => {
            if with_timing {
                serde_json::to_writer_pretty(&mut out, rows)?;
            } else {
                let stripped: Vec<ScalingRow> = rows
                    .iter()
                    .map(|r| ScalingRow {
                        elapsed_seconds: 0.0,
                        ..r.clone()
                    })
                    .collect();
                serde_json::to_writer_pretty(&mut out, &stripped)?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn export_scaling(
    rows: &[ScalingRow],
    format: ReportFormat,
    path: &str,
) -> Result<(), ExperimentError> {
    with_output(path, |w| write_scaling(rows, format, true, w))
}

fn with_output<F>(path: &str, write: F) -> Result<(), ExperimentError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), ExperimentError>,
{
    if path == "-" {
        let stdout = io::stdout();
        let mut lock = stdout.lock();
        write(&mut lock)?;
        lock.flush()?;
    } else {
        let mut file = BufWriter::new(File::create(Path::new(path))?);
        write(&mut file)?;
        file.flush()?;
    }
    Ok(())
}
