use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::catalog::{builtin_app_catalog, builtin_vm_catalog};
use crate::game::{prepare_player, PlayerState, PrepareError, DEFAULT_MAX_ITERATIONS};
use crate::market::{
    select_vms, validate_request, InventoryEntry, PaymentFlow, Provider, Request,
};
use crate::money::Money;
use crate::pricing::{infrastructure_cost, DEFAULT_GAMMA};

/// A marketplace and the stream of requests dispatched to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    pub providers: Vec<Provider>,
    pub requests: Vec<Request>,
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Hex SHA-256 of the compact JSON encoding.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Every schema and invariant violation, empty when the scenario is clean.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.gamma > 0.0) {
            out.push(format!("γ must be > 0 (got {})", self.gamma));
        } else if !(self.gamma < 1.0) {
            out.push(format!("γ must be < 1 (got {})", self.gamma));
        }
        if self.max_iterations == 0 {
            out.push("max_iterations must be >= 1".to_string());
        }
        if self.providers.is_empty() {
            out.push("scenario needs at least one provider".to_string());
        }
        if self.requests.is_empty() {
            out.push("scenario needs at least one request".to_string());
        }
        let mut ids = BTreeSet::new();
        for p in &self.providers {
            if !ids.insert(p.provider_id) {
                out.push(format!("duplicate provider id {}", p.provider_id));
            }
            out.extend(p.violations());
        }
        let known = self.known_apps();
        for (i, req) in self.requests.iter().enumerate() {
            if let Err(errors) = validate_request(req, &known) {
                out.extend(errors.iter().map(|e| format!("request {i}: {e}")));
            }
        }
        out
    }

    /// Application ids hosted by at least one provider.
    pub fn known_apps(&self) -> BTreeSet<String> {
        self.providers
            .iter()
            .flat_map(|p| p.applications.iter().map(|a| a.app_id.clone()))
            .collect()
    }

    /// The same request stream played by the first `n` providers only.
    pub fn with_first_providers(&self, n: usize) -> Scenario {
        let mut s = self.clone();
        s.providers.truncate(n);
        s
    }

    /// Players able to bid on request `index`. Providers that cannot host
    /// the application are left out; scenario defects are errors.
    pub fn players_for(&self, index: usize) -> Result<Vec<PlayerState>, PrepareError> {
        let request = &self.requests[index];
        let mut players = Vec::with_capacity(self.providers.len());
        for provider in &self.providers {
            match prepare_player(provider, request, self.gamma) {
                Ok(p) => players.push(p),
                Err(PrepareError::Market(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(players)
    }

    /// Seed of the game played on request `index`.
    pub fn game_seed(&self, index: usize) -> u64 {
        splitmix64(self.seed ^ splitmix64(index as u64))
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-unit benefits are drawn from 0.10, 0.15, …, 0.80.
fn benefit_values() -> Vec<f64> {
    (2..=16).map(|k| f64::from(k * 5) / 100.0).collect()
}

/// A random marketplace of `n_providers` sharing the built-in catalogs, and
/// `n_requests` requests for catalog applications.
///
/// Each provider holds 1–10 units of every VM type. Requests last 1–720
/// hours and are willing to pay θ plus the highest hosting cost any provider
/// would incur.
pub fn generate_scenario(n_providers: usize, n_requests: usize, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vms = builtin_vm_catalog();
    let apps = builtin_app_catalog();
    let benefits = benefit_values();
    let pick_benefit = |rng: &mut ChaCha8Rng| benefits[rng.gen_range(0..benefits.len())];

    let providers: Vec<Provider> = (0..n_providers)
        .map(|provider_id| {
            let vm_inventory: Vec<InventoryEntry> = vms
                .iter()
                .map(|vm| InventoryEntry {
                    vm_type: vm.clone(),
                    count: rng.gen_range(1..=10),
                })
                .collect();
            let vm_benefits: BTreeMap<String, f64> = vms
                .iter()
                .map(|vm| (vm.size_label.clone(), pick_benefit(&mut rng)))
                .collect();
            let app_benefits: BTreeMap<String, f64> = apps
                .iter()
                .map(|a| (a.app_id.clone(), pick_benefit(&mut rng)))
                .collect();
            Provider {
                provider_id,
                vm_inventory,
                applications: apps.clone(),
                vm_benefits,
                app_benefits,
            }
        })
        .collect();

    let requests = (0..n_requests)
        .map(|_| {
            let app = &apps[rng.gen_range(0..apps.len())];
            let duration_hours = rng.gen_range(1.0..=720.0);
            let payment_flow = if rng.gen_bool(0.5) {
                PaymentFlow::Single
            } else {
                PaymentFlow::Recurring
            };
            let perf_required = rng.gen_bool(0.5);
            let c_max = providers
                .iter()
                .filter_map(|p| select_vms(app, p).ok())
                .map(|a| infrastructure_cost(&a, duration_hours))
                .fold(0.0, f64::max);
            Request {
                app_id: app.app_id.clone(),
                willingness: Money::from_f64_ceil(app.price_for(payment_flow).as_f64() + c_max),
                duration_hours,
                payment_flow,
                perf_required,
            }
        })
        .collect();

    Scenario {
        seed,
        gamma: DEFAULT_GAMMA,
        max_iterations: DEFAULT_MAX_ITERATIONS,
        providers,
        requests,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = generate_scenario(2, 5, 42);
        let b = generate_scenario(2, 5, 42);
        assert_eq!(a, b);
        assert_eq!(a.content_hash(), b.content_hash());
        assert_ne!(a, generate_scenario(2, 5, 43));
        assert!(a.violations().is_empty(), "{:?}", a.violations());
    }

    #[test]
    fn providers_share_application_lists() {
        let s = generate_scenario(10, 50, 9);
        let first: Vec<_> = s.providers[0].applications.iter().map(|a| &a.app_id).collect();
        for p in &s.providers {
            let ids: Vec<_> = p.applications.iter().map(|a| &a.app_id).collect();
            assert_eq!(ids, first);
        }
        for r in &s.requests {
            assert!((1.0..=720.0).contains(&r.duration_hours));
        }
    }

    #[test]
    fn single_player_scenario_is_valid() {
        let s = generate_scenario(1, 1, 3);
        assert!(s.violations().is_empty());
        assert_eq!(s.players_for(0).unwrap().len(), 1);
    }

    #[test]
    fn violations_are_listed() {
        let mut s = generate_scenario(2, 2, 1);
        s.gamma = 1.0;
        s.providers[1].app_benefits.remove("CRM Essential CAL");
        s.requests[0].duration_hours = -1.0;
        let v = s.violations();
        assert!(v.iter().any(|m| m.contains("γ must be < 1")));
        assert!(v.iter().any(|m| m.contains("CRM Essential CAL")));
        assert!(v.iter().any(|m| m.starts_with("request 0")));
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn json_round_trip() {
        let s = generate_scenario(3, 4, 11);
        let back = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }
}
