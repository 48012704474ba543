//! The pricing game played by all providers over a single request.
//!
//! Every provider picks an ω from its feasible grid, which fixes its bid. The
//! lowest bid wins (ties go to the lowest provider id) and only the winner is
//! paid. [`run_game`] iterates best responses in round-robin order until no
//! provider can gain by deviating alone; [`enumerate_nash`] is a brute-force
//! check of the same condition over the whole strategy space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{classify_service_level, select_vms, MarketError, Provider, Request};
use crate::pricing::{
    bid_price, feasible_omegas, infrastructure_cost, payoff, provisioning_cost, utilization,
    winning_margin, PricingContext, PricingError,
};

/// Default cap on provider turns.
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;

/// Upper bound on the number of profiles [`enumerate_nash`] will visit.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("a game needs at least one player")]
    NoPlayers,
    #[error("max_iterations must be >= 1")]
    ZeroIterations,
    #[error("provider id {0} appears more than once")]
    DuplicateProvider(usize),
    #[error("strategy space has {profiles} profiles, above the limit of {limit}")]
    TooLarge { profiles: u128, limit: u128 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerState {
    pub provider_id: usize,
    pub ctx: PricingContext,
    /// Feasible ω values, ascending. Empty means the provider abstains.
    pub grid: Vec<f64>,
    pub current_omega: Option<f64>,
}

impl PlayerState {
    pub fn new(provider_id: usize, ctx: PricingContext, grid: Vec<f64>) -> Self {
        PlayerState {
            provider_id,
            ctx,
            grid,
            current_omega: None,
        }
    }

    /// Profile entry for this player playing `omega`.
    pub fn entry(&self, omega: Option<f64>) -> ProfileEntry {
        ProfileEntry {
            provider_id: self.provider_id,
            omega,
            bid: omega.map(|w| bid_price(w, &self.ctx)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub provider_id: usize,
    pub omega: Option<f64>,
    pub bid: Option<f64>,
}

/// The bids announced to the user, one entry per provider, in provider order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub entries: Vec<ProfileEntry>,
}

impl StrategyProfile {
    pub fn from_players(players: &[PlayerState]) -> Self {
        StrategyProfile {
            entries: players.iter().map(|p| p.entry(p.current_omega)).collect(),
        }
    }

    pub fn get(&self, provider_id: usize) -> Option<&ProfileEntry> {
        self.entries.iter().find(|e| e.provider_id == provider_id)
    }

    fn position(&self, provider_id: usize) -> usize {
        self.entries
            .iter()
            .position(|e| e.provider_id == provider_id)
            .unwrap_or_else(|| panic!("provider {provider_id} missing from profile"))
    }
}

/// Lowest present bid; equal bids go to the smaller provider id.
pub fn determine_winner(profile: &StrategyProfile) -> Option<usize> {
    profile
        .entries
        .iter()
        .filter_map(|e| e.bid.map(|b| (b, e.provider_id)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
}

/// Payoff of every entry in `profile`, in entry order.
pub fn profile_payoffs(players: &[PlayerState], profile: &StrategyProfile) -> Vec<f64> {
    let winner = determine_winner(profile);
    profile
        .entries
        .iter()
        .map(|e| match (e.omega, e.bid) {
            (Some(w), Some(b)) if winner == Some(e.provider_id) => {
                let player = players
                    .iter()
                    .find(|p| p.provider_id == e.provider_id)
                    .expect("profile entry without player");
                payoff(true, b, provisioning_cost(w, &player.ctx))
            }
            _ => 0.0,
        })
        .collect()
}

/// The strongest opposing bid as `(bid, provider_id)`.
fn best_opponent(profile: &StrategyProfile, provider_id: usize) -> Option<(f64, usize)> {
    profile
        .entries
        .iter()
        .filter(|e| e.provider_id != provider_id)
        .filter_map(|e| e.bid.map(|b| (b, e.provider_id)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
}

fn payoff_against(
    player: &PlayerState,
    omega: Option<f64>,
    opponent: Option<(f64, usize)>,
) -> f64 {
    let Some(w) = omega else { return 0.0 };
    let bid = bid_price(w, &player.ctx);
    let wins = match opponent {
        None => true,
        Some((ob, oid)) => bid < ob || (bid == ob && player.provider_id < oid),
    };
    payoff(wins, bid, provisioning_cost(w, &player.ctx))
}

/// Best strictly improving deviation of `player`, others held fixed.
///
/// Among improving grid points the one with the highest resulting payoff is
/// returned, the smallest ω on ties. `None` when nothing improves.
pub fn unilateral_improvement(player: &PlayerState, profile: &StrategyProfile) -> Option<f64> {
    let current = profile.get(player.provider_id).and_then(|e| e.omega);
    let opponent = best_opponent(profile, player.provider_id);
    let mut best = payoff_against(player, current, opponent);
    let mut choice = None;
    for &w in &player.grid {
        let u = payoff_against(player, Some(w), opponent);
        if u > best {
            best = u;
            choice = Some(w);
        }
    }
    choice
}

pub fn is_nash(players: &[PlayerState], profile: &StrategyProfile) -> bool {
    players
        .iter()
        .all(|p| unilateral_improvement(p, profile).is_none())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameConfig {
    pub max_iterations: usize,
    pub seed: u64,
    /// Extra turns played and recorded after equilibrium is reached.
    #[serde(default)]
    pub settle_iterations: usize,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            seed: 0,
            settle_iterations: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Provider that took its turn in this iteration.
    pub mover: usize,
    pub profile: StrategyProfile,
    pub winner_id: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub winner_id: Option<usize>,
    pub equilibrium_profile: StrategyProfile,
    /// Payoff per entry of `equilibrium_profile`.
    pub payoffs: Vec<f64>,
    pub trace: Vec<TraceRecord>,
    /// Iteration at which equilibrium was first detected, or the number of
    /// iterations played when the cap was hit.
    pub iterations: usize,
    pub converged: bool,
}

impl GameOutcome {
    pub fn payoff_of(&self, provider_id: usize) -> f64 {
        self.equilibrium_profile
            .entries
            .iter()
            .zip(&self.payoffs)
            .find(|(e, _)| e.provider_id == provider_id)
            .map_or(0.0, |(_, &u)| u)
    }
}

/// Iterated best response.
///
/// Each iteration is one provider's turn, taken in round-robin order of
/// provider id: the provider replaces its ω with its best response to the
/// current bids, or keeps it when nothing improves. Starting ω values are
/// drawn uniformly from each grid with `config.seed`. Once every provider
/// has had a turn, the profile is checked for equilibrium after each
/// iteration.
pub fn run_game(players: &[PlayerState], config: &GameConfig) -> Result<GameOutcome, GameError> {
    if players.is_empty() {
        return Err(GameError::NoPlayers);
    }
    if config.max_iterations == 0 {
        return Err(GameError::ZeroIterations);
    }
    let mut players = players.to_vec();
    players.sort_by_key(|p| p.provider_id);
    if let Some(dup) = players.windows(2).find(|w| w[0].provider_id == w[1].provider_id) {
        return Err(GameError::DuplicateProvider(dup[0].provider_id));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for p in &mut players {
        p.current_omega = if p.grid.is_empty() {
            None
        } else {
            Some(p.grid[rng.gen_range(0..p.grid.len())])
        };
    }

    let n = players.len();
    let mut profile = StrategyProfile::from_players(&players);
    let mut trace = Vec::new();
    let mut converged_at = None;

    for iteration in 1.. {
        match converged_at {
            Some(at) if iteration > at + config.settle_iterations => break,
            None if iteration > config.max_iterations => break,
            _ => {}
        }
        let mover = (iteration - 1) % n;
        if let Some(w) = unilateral_improvement(&players[mover], &profile) {
            players[mover].current_omega = Some(w);
            profile.entries[mover] = players[mover].entry(Some(w));
        }
        trace.push(TraceRecord {
            iteration,
            mover: players[mover].provider_id,
            profile: profile.clone(),
            winner_id: determine_winner(&profile),
        });
        if converged_at.is_none() && iteration >= n && is_nash(&players, &profile) {
            converged_at = Some(iteration);
        }
    }

    let payoffs = profile_payoffs(&players, &profile);
    Ok(GameOutcome {
        winner_id: determine_winner(&profile),
        equilibrium_profile: profile,
        payoffs,
        iterations: converged_at.unwrap_or(config.max_iterations),
        converged: converged_at.is_some(),
        trace,
    })
}

/// All pure-strategy equilibria, found by visiting every profile.
///
/// Players with an empty grid can only abstain. The check recomputes the
/// winner from scratch for every deviation rather than reusing
/// [`unilateral_improvement`]. Profiles come back in lexicographic order of
/// grid positions, players ordered by provider id.
pub fn enumerate_nash(players: &[PlayerState]) -> Result<Vec<StrategyProfile>, GameError> {
    let mut players = players.to_vec();
    players.sort_by_key(|p| p.provider_id);
    let options: Vec<Vec<Option<f64>>> = players
        .iter()
        .map(|p| {
            if p.grid.is_empty() {
                vec![None]
            } else {
                p.grid.iter().map(|&w| Some(w)).collect()
            }
        })
        .collect();
    let total = options
        .iter()
        .try_fold(1u128, |acc, o| acc.checked_mul(o.len() as u128))
        .unwrap_or(u128::MAX);
    if total > ENUMERATION_LIMIT {
        return Err(GameError::TooLarge {
            profiles: total,
            limit: ENUMERATION_LIMIT,
        });
    }

    let mut found = Vec::new();
    let mut index = vec![0usize; players.len()];
    loop {
        let profile = StrategyProfile {
            entries: players
                .iter()
                .zip(&index)
                .zip(&options)
                .map(|((p, &i), o)| p.entry(o[i]))
                .collect(),
        };
        if no_profitable_deviation(&players, &profile) {
            found.push(profile);
        }
        // odometer increment, last player fastest
        let mut k = players.len();
        loop {
            if k == 0 {
                return Ok(found);
            }
            k -= 1;
            index[k] += 1;
            if index[k] < options[k].len() {
                break;
            }
            index[k] = 0;
        }
    }
}

fn payoff_in(player: &PlayerState, profile: &StrategyProfile) -> f64 {
    let entry = profile.get(player.provider_id).expect("player in profile");
    match (entry.omega, entry.bid) {
        (Some(w), Some(b)) => {
            let wins = determine_winner(profile) == Some(player.provider_id);
            payoff(wins, b, provisioning_cost(w, &player.ctx))
        }
        _ => 0.0,
    }
}

fn no_profitable_deviation(players: &[PlayerState], profile: &StrategyProfile) -> bool {
    players.iter().all(|p| {
        let here = payoff_in(p, profile);
        let slot = profile.position(p.provider_id);
        p.grid.iter().all(|&w| {
            let mut deviated = profile.clone();
            deviated.entries[slot] = p.entry(Some(w));
            payoff_in(p, &deviated) <= here
        })
    })
}

#[derive(Debug, Error)]
pub enum PrepareError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error("provider {provider_id} has no benefit entry for {key:?}")]
    MissingBenefit { provider_id: usize, key: String },
}

/// Provisions `request` on `provider` and derives its pricing context and
/// feasible ω grid.
///
/// Utilization is the required-over-provided ratio of the least utilized
/// resource across the assigned VMs. A provider whose every feasible ω would
/// lose money even when winning gets an empty grid and abstains.
pub fn prepare_player(
    provider: &Provider,
    request: &Request,
    gamma: f64,
) -> Result<PlayerState, PrepareError> {
    let app = provider
        .application(&request.app_id)
        .ok_or_else(|| MarketError::ApplicationNotHosted {
            provider_id: provider.provider_id,
            app_id: request.app_id.clone(),
        })?;
    let assignment = select_vms(app, provider)?;

    let mut alpha_sum = 0.0;
    for vm in &assignment.vms {
        alpha_sum += provider.vm_benefits.get(&vm.size_label).ok_or_else(|| {
            PrepareError::MissingBenefit {
                provider_id: provider.provider_id,
                key: vm.size_label.clone(),
            }
        })?;
    }
    let beta = *provider
        .app_benefits
        .get(&app.app_id)
        .ok_or_else(|| PrepareError::MissingBenefit {
            provider_id: provider.provider_id,
            key: app.app_id.clone(),
        })?;

    let mut rho = f64::INFINITY;
    for (required, provided) in assignment.utilization_ratios(app) {
        rho = rho.min(utilization(required, provided)?);
    }
    let level = classify_service_level(
        rho,
        app.is_multi_tenant(),
        request.perf_required,
        request.payment_flow,
    );

    let ctx = PricingContext::new(
        gamma,
        app.price_for(request.payment_flow).as_f64(),
        infrastructure_cost(&assignment, request.duration_hours),
        alpha_sum,
        beta,
        request.willingness.as_f64(),
        level,
    )?;
    let mut grid = feasible_omegas(&level.omega_grid(), &ctx);
    if grid.iter().all(|&w| winning_margin(w, &ctx) < 0.0) {
        grid.clear();
    }
    Ok(PlayerState::new(provider.provider_id, ctx, grid))
}
