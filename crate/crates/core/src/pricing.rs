//! Bid, cost and payoff formulas for one provider facing one request.
//!
//! With `T = θ + c` and `K = α·c + β·θ` (α summed over the VMs hosting the
//! request), a provider choosing ω offers
//!
//! ```text
//! bid(ω)  = √ω (1 + γ√ω) T
//! cost(ω) = ω K
//! ```
//!
//! and, when it wins, earns `g(ω) = bid(ω) − cost(ω) = T x + (γT − K) x²`
//! with `x = √ω`. `g` has an interior maximum iff `K > γT`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{ServiceLevel, VmAssignment};

/// Committee constant used when a scenario does not set one.
pub const DEFAULT_GAMMA: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PricingError {
    #[error("invalid pricing context: {0}")]
    InvalidContext(String),
    #[error("provided resource units must be > 0")]
    ZeroProvided,
}

/// Everything one provider needs to price one request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricingContext {
    pub gamma: f64,
    pub theta: f64,
    pub infra_cost: f64,
    pub alpha_sum: f64,
    pub beta: f64,
    pub willingness: f64,
    pub level: ServiceLevel,
}

impl PricingContext {
    pub fn new(
        gamma: f64,
        theta: f64,
        infra_cost: f64,
        alpha_sum: f64,
        beta: f64,
        willingness: f64,
        level: ServiceLevel,
    ) -> Result<Self, PricingError> {
        let ctx = PricingContext {
            gamma,
            theta,
            infra_cost,
            alpha_sum,
            beta,
            willingness,
            level,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<(), PricingError> {
        let bad = |msg: &str| Err(PricingError::InvalidContext(msg.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(self.theta >= 0.0) || !self.theta.is_finite() {
            return bad("theta must be >= 0");
        }
        if !(self.infra_cost >= 0.0) || !self.infra_cost.is_finite() {
            return bad("infrastructure cost must be >= 0");
        }
        if !(self.alpha_sum > 0.0) {
            return bad("alpha_sum must be > 0");
        }
        if !(self.beta > 0.0) {
            return bad("beta must be > 0");
        }
        if !(self.willingness > 0.0) {
            return bad("willingness must be > 0");
        }
        if !(self.theta + self.infra_cost > 0.0) {
            return bad("theta + infrastructure cost must be > 0");
        }
        Ok(())
    }

    /// `T = θ + c`, the bid scale and the price cap.
    pub fn total_price(&self) -> f64 {
        self.theta + self.infra_cost
    }

    /// `K = α·c + β·θ`, the per-ω provisioning cost.
    pub fn cost_weight(&self) -> f64 {
        self.alpha_sum * self.infra_cost + self.beta * self.theta
    }

    /// Highest admissible bid: `min(W, θ + c)`.
    pub fn price_cap(&self) -> f64 {
        self.willingness.min(self.total_price())
    }
}

/// Hosting cost paid to the IaaS provider: duration times summed hourly prices.
pub fn infrastructure_cost(assignment: &VmAssignment, duration_hours: f64) -> f64 {
    duration_hours * assignment.total_hour_cost.as_f64()
}

/// Required-over-provided resource ratio.
pub fn utilization(required_units: f64, provided_units: f64) -> Result<f64, PricingError> {
    if !(provided_units > 0.0) {
        return Err(PricingError::ZeroProvided);
    }
    Ok(required_units / provided_units)
}

pub fn bid_price(omega: f64, ctx: &PricingContext) -> f64 {
    let root = omega.sqrt();
    root * (1.0 + ctx.gamma * root) * ctx.total_price()
}

pub fn provisioning_cost(omega: f64, ctx: &PricingContext) -> f64 {
    omega * ctx.cost_weight()
}

/// Only the lowest bidder is paid; everybody else earns exactly zero.
pub fn payoff(is_winner: bool, bid: f64, cost: f64) -> f64 {
    if is_winner {
        bid - cost
    } else {
        0.0
    }
}

/// Payoff of a winning bid at `omega`.
pub fn winning_margin(omega: f64, ctx: &PricingContext) -> f64 {
    payoff(true, bid_price(omega, ctx), provisioning_cost(omega, ctx))
}

/// Grid points whose bid satisfies `0 < bid <= min(W, θ + c)`, in grid order.
pub fn feasible_omegas(grid: &[f64], ctx: &PricingContext) -> Vec<f64> {
    let cap = ctx.price_cap();
    grid.iter()
        .copied()
        .filter(|&w| {
            let bid = bid_price(w, ctx);
            bid > 0.0 && bid <= cap
        })
        .collect()
}

/// Which closed form of the continuous optimum to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaStarVariant {
    /// Stationary point of `g`: `(T / (2K − 2γT))²`.
    #[default]
    Corrected,
    /// The published expression `(T / (2K − γT))²`, kept for comparison.
    AsPrinted,
}

impl fmt::Display for OmegaStarVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OmegaStarVariant::Corrected => "corrected",
            OmegaStarVariant::AsPrinted => "as-printed",
        })
    }
}

impl FromStr for OmegaStarVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "corrected" => Ok(OmegaStarVariant::Corrected),
            "as-printed" => Ok(OmegaStarVariant::AsPrinted),
            other => Err(format!(
                "unknown variant {other:?} (expected corrected or as-printed)"
            )),
        }
    }
}

/// Continuous best-response ω, or `None` when the denominator is not
/// positive (the winning payoff then increases without bound in ω).
pub fn omega_star(ctx: &PricingContext, variant: OmegaStarVariant) -> Option<f64> {
    let t = ctx.total_price();
    let k = ctx.cost_weight();
    let denom = match variant {
        OmegaStarVariant::Corrected => 2.0 * k - 2.0 * ctx.gamma * t,
        OmegaStarVariant::AsPrinted => 2.0 * k - ctx.gamma * t,
    };
    if denom > 0.0 {
        let root = t / denom;
        Some(root * root)
    } else {
        None
    }
}
