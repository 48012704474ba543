//! Built-in catalogs, scenario generation and the experiment runners that
//! produce profit series, bid-convergence traces and scaling tables.

mod catalog;
mod export;
mod runners;
mod scenario;

use thiserror::Error;

use crate::game::{GameError, PrepareError};

pub use catalog::{builtin_app_catalog, builtin_vm_catalog, APP_PRICES, DEFAULT_HOST_OS};
pub use export::{
    export_report, export_scaling, sig9, write_report, write_scaling, write_trace_csv,
    ReportFormat, TRACE_COLUMNS,
};
pub use runners::{
    run_bid_convergence, run_profit_series, run_scaling, ExperimentReport, ProfitSeries,
    ReportMetadata, RequestFailure, RequestOutcome, ScalingRow, SCALING_RUNS,
};
pub use scenario::{generate_scenario, Scenario};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid scenario: {}", .0.join("; "))]
    InvalidScenario(Vec<String>),
    #[error("request index {index} out of range ({len} requests)")]
    RequestOutOfRange { index: usize, len: usize },
    #[error("no sizes given")]
    EmptySizes,
    #[error("game size {0} is below 2 players")]
    SizeTooSmall(usize),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Prepare(#[from] PrepareError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
