use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::scenario::{generate_scenario, Scenario};
use super::ExperimentError;
use crate::game::{run_game, GameConfig, GameOutcome, PlayerState};
use crate::market::validate_request;

/// Games played per size by [`run_scaling`].
pub const SCALING_RUNS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub scenario_hash: String,
    pub seed: u64,
    pub artifact_version: String,
}

/// One played request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestOutcome {
    pub request_index: usize,
    /// Players as prepared for this request, before any ω was drawn.
    pub players: Vec<PlayerState>,
    pub outcome: GameOutcome,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestFailure {
    pub request_index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitSeries {
    pub provider_id: usize,
    /// Running total of payoffs, one point per request in the stream.
    pub cumulative: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub metadata: ReportMetadata,
    pub outcomes: Vec<RequestOutcome>,
    pub failures: Vec<RequestFailure>,
    pub profits: Vec<ProfitSeries>,
}

impl ExperimentReport {
    pub fn empty(metadata: ReportMetadata) -> Self {
        ExperimentReport {
            metadata,
            outcomes: Vec::new(),
            failures: Vec::new(),
            profits: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Sum of final cumulative profits over all providers.
    pub fn total_profit(&self) -> f64 {
        self.profits
            .iter()
            .map(|s| s.cumulative.last().copied().unwrap_or(0.0))
            .sum()
    }
}

fn metadata(scenario: &Scenario) -> ReportMetadata {
    ReportMetadata {
        scenario_hash: scenario.content_hash(),
        seed: scenario.seed,
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

fn play(
    scenario: &Scenario,
    index: usize,
    settle_iterations: usize,
) -> Result<RequestOutcome, ExperimentError> {
    let known = scenario.known_apps();
    if let Err(errors) = validate_request(&scenario.requests[index], &known) {
        let list: Vec<String> = errors.iter().map(ToString::to_string).collect();
        return Err(ExperimentError::InvalidScenario(list));
    }
    let players = scenario.players_for(index)?;
    let config = GameConfig {
        max_iterations: scenario.max_iterations,
        seed: scenario.game_seed(index),
        settle_iterations,
    };
    let start = Instant::now();
    let outcome = run_game(&players, &config)?;
    Ok(RequestOutcome {
        request_index: index,
        players,
        outcome,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Plays one game per request, in order, and accumulates each provider's
/// payoff. Requests whose game cannot be played are recorded and skipped.
pub fn run_profit_series(scenario: &Scenario) -> Result<ExperimentReport, ExperimentError> {
    let violations = scenario.violations();
    if !violations.is_empty() {
        return Err(ExperimentError::InvalidScenario(violations));
    }
    let mut report = ExperimentReport::empty(metadata(scenario));
    let mut totals = vec![0.0; scenario.providers.len()];
    report.profits = scenario
        .providers
        .iter()
        .map(|p| ProfitSeries {
            provider_id: p.provider_id,
            cumulative: Vec::with_capacity(scenario.requests.len()),
        })
        .collect();

    for index in 0..scenario.requests.len() {
        match play(scenario, index, 0) {
            Ok(played) => {
                for (total, provider) in totals.iter_mut().zip(&scenario.providers) {
                    *total += played.outcome.payoff_of(provider.provider_id);
                }
                report.outcomes.push(played);
            }
            Err(e) => {
                log::warn!("request {index} skipped: {e}");
                report.failures.push(RequestFailure {
                    request_index: index,
                    reason: e.to_string(),
                });
            }
        }
        for (series, total) in report.profits.iter_mut().zip(&totals) {
            series.cumulative.push(*total);
        }
    }
    Ok(report)
}

/// Plays a single request with its full trace, continuing for one more
/// round of turns after equilibrium so the flat tail is visible.
pub fn run_bid_convergence(
    scenario: &Scenario,
    request_index: usize,
) -> Result<ExperimentReport, ExperimentError> {
    if request_index >= scenario.requests.len() {
        return Err(ExperimentError::RequestOutOfRange {
            index: request_index,
            len: scenario.requests.len(),
        });
    }
    let violations = scenario.violations();
    if !violations.is_empty() {
        return Err(ExperimentError::InvalidScenario(violations));
    }
    let settle = scenario.providers.len();
    let played = play(scenario, request_index, settle)?;
    let mut report = ExperimentReport::empty(metadata(scenario));
    report.profits = scenario
        .providers
        .iter()
        .map(|p| ProfitSeries {
            provider_id: p.provider_id,
            cumulative: vec![played.outcome.payoff_of(p.provider_id)],
        })
        .collect();
    report.outcomes.push(played);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    /// Median iterations to equilibrium over the runs.
    pub iterations: f64,
    pub elapsed_seconds: f64,
    pub converged_runs: usize,
    pub runs: usize,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 0 {
        (values[mid - 1] + values[mid]) / 2.0
    } else {
        values[mid]
    }
}

/// For every size, plays [`SCALING_RUNS`] single-request games on freshly
/// generated marketplaces and reports median iterations and wall time.
pub fn run_scaling(sizes: &[usize], seed: u64) -> Result<Vec<ScalingRow>, ExperimentError> {
    if sizes.is_empty() {
        return Err(ExperimentError::EmptySizes);
    }
    if let Some(&n) = sizes.iter().find(|&&n| n < 2) {
        return Err(ExperimentError::SizeTooSmall(n));
    }
    sizes
        .iter()
        .map(|&n| {
            let mut iterations = Vec::with_capacity(SCALING_RUNS);
            let mut elapsed = Vec::with_capacity(SCALING_RUNS);
            let mut converged_runs = 0;
            for run in 0..SCALING_RUNS {
                let run_seed = seed
                    .wrapping_mul(1_000_003)
                    .wrapping_add((n as u64) << 20)
                    .wrapping_add(run as u64);
                let scenario = generate_scenario(n, 1, run_seed);
                let played = play(&scenario, 0, 0)?;
                if played.outcome.converged {
                    converged_runs += 1;
                }
                iterations.push(played.outcome.iterations as f64);
                elapsed.push(played.wall_time_seconds);
            }
            Ok(ScalingRow {
                n,
                iterations: median(&mut iterations),
                elapsed_seconds: median(&mut elapsed),
                converged_runs,
                runs: SCALING_RUNS,
            })
        })
        .collect()
}
