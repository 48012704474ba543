//! Command-line front end.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 I/O error, 4 the
//! `converge` game hit its iteration cap.

use std::fs;
use std::io::Write;

use clap::{Args, Parser, Subcommand};
use log::{debug, info, LevelFilter};
use serde::Serialize;

use crate::experiments::{
    export_report, export_scaling, run_bid_convergence, run_profit_series, run_scaling, sig9,
    ExperimentError, ReportFormat, Scenario,
};
use crate::market::ServiceLevel;
use crate::pricing::{
    bid_price, omega_star, provisioning_cost, winning_margin, OmegaStarVariant, PricingContext,
    DEFAULT_GAMMA,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_NOT_CONVERGED: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "saas-market", version, about = "Dynamic pricing game for SaaS providers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Only print errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    pub quiet: bool,
    /// Print debug diagnostics.
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Play every request of a scenario and report cumulative profits.
    Simulate(RunArgs),
    /// Play one request and dump its full bid trace.
    Converge(ConvergeArgs),
    /// Closed-form best response for one pricing context.
    Equilibrium(EquilibriumArgs),
    /// Iterations to equilibrium as the number of providers grows.
    Scale(ScaleArgs),
    /// Check a scenario file and list every violation.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file, or `-` for standard output.
    #[arg(long, default_value = "-")]
    pub out: String,
    #[arg(long, default_value = "csv")]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: String,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Override the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the scenario iteration cap.
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Index of the request to play.
    #[arg(long, default_value_t = 0)]
    pub request: usize,
}

#[derive(Debug, Args)]
pub struct EquilibriumArgs {
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
    #[arg(long)]
    pub theta: f64,
    /// Infrastructure cost of hosting the request.
    #[arg(long = "c")]
    pub infra_cost: f64,
    /// Summed per-unit benefit of the hosting VMs.
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value = "corrected")]
    pub variant: OmegaStarVariant,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ScaleArgs {
    /// Comma-separated provider counts.
    #[arg(long, value_delimiter = ',', default_value = "2,8,16,32")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub scenario: String,
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let level = if cli.quiet {
        LevelFilter::Error
    } else if cli.verbose {
        LevelFilter::Debug
    } else {
        LevelFilter::Warn
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();

    match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Converge(args) => cmd_converge(&args),
        Command::Equilibrium(args) => cmd_equilibrium(&args),
        Command::Scale(args) => cmd_scale(&args),
        Command::Validate(args) => cmd_validate(&args),
    }
}

fn exit_code(err: &ExperimentError) -> u8 {
    match err {
        ExperimentError::Io(_) => EXIT_IO,
        ExperimentError::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => EXIT_IO,
        ExperimentError::Json(e) if e.is_io() => EXIT_IO,
        _ => EXIT_INPUT,
    }
}

fn fail(err: &ExperimentError) -> u8 {
    eprintln!("error: {err}");
    exit_code(err)
}

/// Reads and parses a scenario; validation is left to the caller.
fn load_scenario(path: &str) -> Result<Scenario, u8> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {path}: {e}");
        EXIT_IO
    })?;
    Scenario::from_json(&text).map_err(|e| {
        eprintln!("error: {path}: line {} column {}: {e}", e.line(), e.column());
        EXIT_INPUT
    })
}

fn load_valid_scenario(args: &RunArgs) -> Result<Scenario, u8> {
    let mut scenario = load_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(cap) = args.max_iter {
        scenario.max_iterations = cap;
    }
    let violations = scenario.violations();
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("invalid: {v}");
        }
        return Err(EXIT_INPUT);
    }
    debug!(
        "loaded {} providers, {} requests",
        scenario.providers.len(),
        scenario.requests.len()
    );
    Ok(scenario)
}

pub fn cmd_simulate(args: &RunArgs) -> u8 {
    let scenario = match load_valid_scenario(args) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let report = match run_profit_series(&scenario) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    info!(
        "played {} requests, {} skipped, total profit {}",
        report.outcomes.len(),
        report.failures.len(),
        sig9(report.total_profit())
    );
    match export_report(&report, args.output.format, &args.output.out) {
        Ok(()) => EXIT_OK,
        Err(e) => fail(&e),
    }
}

pub fn cmd_converge(args: &ConvergeArgs) -> u8 {
    let scenario = match load_valid_scenario(&args.run) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let report = match run_bid_convergence(&scenario, args.request) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    if let Err(e) = export_report(&report, args.run.output.format, &args.run.output.out) {
        return fail(&e);
    }
    let outcome = &report.outcomes[0].outcome;
    if outcome.converged {
        info!("equilibrium after {} iterations", outcome.iterations);
        EXIT_OK
    } else {
        eprintln!("no equilibrium within {} iterations", outcome.iterations);
        EXIT_NOT_CONVERGED
    }
}

#[derive(Debug, Serialize)]
struct EquilibriumSummary {
    variant: OmegaStarVariant,
    omega_star: Option<f64>,
    bid: Option<f64>,
    cost: Option<f64>,
    payoff: Option<f64>,
}

pub fn cmd_equilibrium(args: &EquilibriumArgs) -> u8 {
    let total = args.theta + args.infra_cost;
    // Willingness plays no part in the closed form; use the price cap.
    let ctx = match PricingContext::new(
        args.gamma,
        args.theta,
        args.infra_cost,
        args.alpha,
        args.beta,
        total,
        ServiceLevel::L1,
    ) {
        Ok(ctx) => ctx,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    let omega = omega_star(&ctx, args.variant);
    let summary = EquilibriumSummary {
        variant: args.variant,
        omega_star: omega,
        bid: omega.map(|w| bid_price(w, &ctx)),
        cost: omega.map(|w| provisioning_cost(w, &ctx)),
        payoff: omega.map(|w| winning_margin(w, &ctx)),
    };
    let text = match args.output.format {
        ReportFormat::Json => {
            serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"
        }
        ReportFormat::Csv => match omega {
            None => format!("variant: {}\nno interior optimum\n", args.variant),
            Some(w) => format!(
                "variant: {}\nomega_star: {}\nbid: {}\ncost: {}\npayoff: {}\n",
                args.variant,
                sig9(w),
                sig9(summary.bid.unwrap_or_default()),
                sig9(summary.cost.unwrap_or_default()),
                sig9(summary.payoff.unwrap_or_default()),
            ),
        },
    };
    write_text(&args.output.out, &text)
}

fn write_text(path: &str, text: &str) -> u8 {
    let result = if path == "-" {
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush())
    } else {
        fs::write(path, text)
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: cannot write {path}: {e}");
            EXIT_IO
        }
    }
}

pub fn cmd_scale(args: &ScaleArgs) -> u8 {
    let rows = match run_scaling(&args.sizes, args.seed) {
        Ok(rows) => rows,
        Err(e) => return fail(&e),
    };
    match export_scaling(&rows, args.output.format, &args.output.out) {
        Ok(()) => EXIT_OK,
        Err(e) => fail(&e),
    }
}

pub fn cmd_validate(args: &ValidateArgs) -> u8 {
    let scenario = match load_scenario(&args.scenario) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let violations = scenario.violations();
    if violations.is_empty() {
        println!("OK");
        EXIT_OK
    } else {
        for v in &violations {
            eprintln!("invalid: {v}");
        }
        EXIT_INPUT
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_equilibrium_flags() {
        let cli = Cli::try_parse_from([
            "saas-market",
            "equilibrium",
            "--gamma",
            "0.95",
            "--theta",
            "65",
            "--c",
            "295",
            "--alpha",
            "2",
            "--beta",
            "2",
            "--variant",
            "as-printed",
        ])
        .unwrap();
        match cli.command {
            Command::Equilibrium(args) => {
                assert_eq!(args.variant, OmegaStarVariant::AsPrinted);
                assert_eq!(args.infra_cost, 295.0);
                assert_eq!(args.output.out, "-");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parses_sizes_list() {
        let cli = Cli::try_parse_from(["saas-market", "scale", "--sizes", "2,8,32", "-q"]).unwrap();
        assert!(cli.quiet);
        match cli.command {
            Command::Scale(args) => assert_eq!(args.sizes, vec![2, 8, 32]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn scenario_required_for_simulate() {
        assert!(Cli::try_parse_from(["saas-market", "simulate"]).is_err());
        assert!(Cli::try_parse_from(["saas-market", "validate"]).is_err());
        assert!(Cli::try_parse_from(["saas-market", "converge", "--request", "1"]).is_err());
    }

    #[test]
    fn bad_variant_rejected() {
        let err = Cli::try_parse_from([
            "saas-market",
            "equilibrium",
            "--theta",
            "1",
            "--c",
            "1",
            "--alpha",
            "1",
            "--beta",
            "1",
            "--variant",
            "printed",
        ])
        .unwrap_err();
        assert_eq!(err.exit_code(), i32::from(EXIT_INPUT));
    }
}
