//! Marketplace entities: VM offerings, hosted applications, user requests and
//! the providers that compete for them.
//!
//! Also houses the two lookups every bid starts from: which service level a
//! request falls into (and hence which ω grid a provider may draw from), and
//! which VMs a provider dedicates to the requested application.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::Money;

/// An IaaS virtual machine offering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmType {
    pub size_label: String,
    pub vcpu: u32,
    pub memory_gb: f64,
    pub storage_gb: f64,
    pub host_os: String,
    pub hour_cost: Money,
}

impl VmType {
    /// Whether this VM can host a service with the given minima. OS match is exact.
    pub fn satisfies(&self, req: &ServiceRequirement) -> bool {
        self.vcpu >= req.min_vcpu
            && self.memory_gb >= req.min_memory_gb
            && self.storage_gb >= req.min_storage_gb
            && self.host_os == req.host_os
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.hour_cost.is_negative() {
            out.push(format!("vm type {}: hour_cost must be >= 0", self.size_label));
        }
        if self.vcpu < 1 {
            out.push(format!("vm type {}: vcpu must be >= 1", self.size_label));
        }
        if !(self.memory_gb > 0.0) {
            out.push(format!("vm type {}: memory_gb must be > 0", self.size_label));
        }
        if !(self.storage_gb > 0.0) {
            out.push(format!("vm type {}: storage_gb must be > 0", self.size_label));
        }
        out
    }
}

/// Resource minima of one application service. Each service runs on its own VM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceRequirement {
    pub min_vcpu: u32,
    pub min_memory_gb: f64,
    pub min_storage_gb: f64,
    pub host_os: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Application {
    pub app_id: String,
    pub num_services: usize,
    pub services: Vec<ServiceRequirement>,
    pub max_tenants: u32,
    /// Initial (developer) price; the one-off license price for single payments.
    pub initial_price: Money,
    /// Per-period price charged to recurring-payment requests, when the
    /// application is also sold as a subscription.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recurring_price: Option<Money>,
}

impl Application {
    pub fn is_multi_tenant(&self) -> bool {
        self.max_tenants > 1
    }

    /// The θ a provider charges for this application under a payment flow.
    pub fn price_for(&self, flow: PaymentFlow) -> Money {
        match (flow, self.recurring_price) {
            (PaymentFlow::Recurring, Some(price)) => price,
            _ => self.initial_price,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.num_services == 0 {
            out.push(format!("application {}: num_services must be >= 1", self.app_id));
        }
        if self.services.len() != self.num_services {
            out.push(format!(
                "application {}: {} services listed but num_services = {}",
                self.app_id,
                self.services.len(),
                self.num_services
            ));
        }
        if self.max_tenants < 1 {
            out.push(format!("application {}: max_tenants must be >= 1", self.app_id));
        }
        if self.initial_price.is_negative() {
            out.push(format!("application {}: initial_price must be >= 0", self.app_id));
        }
        if self.recurring_price.is_some_and(Money::is_negative) {
            out.push(format!("application {}: recurring_price must be >= 0", self.app_id));
        }
        for (i, s) in self.services.iter().enumerate() {
            if s.min_vcpu < 1 || !(s.min_memory_gb > 0.0) || !(s.min_storage_gb > 0.0) {
                out.push(format!(
                    "application {}: service {i} minima must be strictly positive",
                    self.app_id
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PaymentFlow {
    Single,
    Recurring,
}

/// A user demand dispatched to every registered provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub app_id: String,
    /// Maximum amount the user is willing to pay.
    pub willingness: Money,
    pub duration_hours: f64,
    pub payment_flow: PaymentFlow,
    pub perf_required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RequestViolation {
    #[error("unknown application {0:?}")]
    UnknownApplication(String),
    #[error("willingness to pay must be > 0")]
    NonPositiveWillingness,
    #[error("duration must be > 0 hours")]
    NonPositiveDuration,
}

/// Checks a request against its invariants and the set of cataloged
/// applications, reporting every violation at once.
pub fn validate_request(
    req: &Request,
    known_apps: &BTreeSet<String>,
) -> Result<(), Vec<RequestViolation>> {
    let mut errors = Vec::new();
    if !known_apps.contains(&req.app_id) {
        errors.push(RequestViolation::UnknownApplication(req.app_id.clone()));
    }
    if !req.willingness.is_positive() {
        errors.push(RequestViolation::NonPositiveWillingness);
    }
    if !(req.duration_hours > 0.0) {
        errors.push(RequestViolation::NonPositiveDuration);
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryEntry {
    pub vm_type: VmType,
    pub count: u32,
}

/// A SaaS provider, i.e. one player of the pricing game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provider {
    pub provider_id: usize,
    pub vm_inventory: Vec<InventoryEntry>,
    pub applications: Vec<Application>,
    /// Per-unit benefit of each VM type, keyed by size label.
    pub vm_benefits: BTreeMap<String, f64>,
    /// Per-unit benefit of each application, keyed by app id.
    pub app_benefits: BTreeMap<String, f64>,
}

impl Provider {
    pub fn application(&self, app_id: &str) -> Option<&Application> {
        self.applications.iter().find(|a| a.app_id == app_id)
    }

    pub fn violations(&self) -> Vec<String> {
        let id = self.provider_id;
        let mut out = Vec::new();
        let mut labels = BTreeSet::new();
        for entry in &self.vm_inventory {
            let label = &entry.vm_type.size_label;
            if !labels.insert(label.as_str()) {
                out.push(format!("provider {id}: duplicate inventory entry {label}"));
            }
            out.extend(entry.vm_type.violations());
            match self.vm_benefits.get(label) {
                None => out.push(format!("provider {id}: missing vm benefit for {label}")),
                Some(&b) if !(b > 0.0 && b <= 1.0) => {
                    out.push(format!("provider {id}: vm benefit for {label} must be in (0, 1]"))
                }
                Some(_) => {}
            }
        }
        let mut app_ids = BTreeSet::new();
        for app in &self.applications {
            if !app_ids.insert(app.app_id.as_str()) {
                out.push(format!("provider {id}: duplicate application {}", app.app_id));
            }
            out.extend(app.violations());
            match self.app_benefits.get(&app.app_id) {
                None => out.push(format!(
                    "provider {id}: missing app benefit for {}",
                    app.app_id
                )),
                Some(&b) if !(b > 0.0 && b <= 1.0) => out.push(format!(
                    "provider {id}: app benefit for {} must be in (0, 1]",
                    app.app_id
                )),
                Some(_) => {}
            }
        }
        out
    }
}

/// Service levels, each with its own ω grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ServiceLevel {
    L1,
    L2,
    L3,
    L4,
}

impl ServiceLevel {
    pub const ALL: [ServiceLevel; 4] = [
        ServiceLevel::L1,
        ServiceLevel::L2,
        ServiceLevel::L3,
        ServiceLevel::L4,
    ];

    /// Whether this level comes with a performance guarantee.
    pub fn guarantees_performance(self) -> bool {
        matches!(self, ServiceLevel::L1 | ServiceLevel::L2)
    }

    pub fn multi_tenant(self) -> bool {
        matches!(self, ServiceLevel::L3 | ServiceLevel::L4)
    }

    pub fn payment_flow(self) -> PaymentFlow {
        match self {
            ServiceLevel::L1 | ServiceLevel::L4 => PaymentFlow::Single,
            ServiceLevel::L2 | ServiceLevel::L3 => PaymentFlow::Recurring,
        }
    }

    /// The finite, strictly increasing ω grid of this level.
    pub fn omega_grid(self) -> Vec<f64> {
        // (first numerator, step, count, denominator); built from integers so
        // every point is the correctly rounded decimal.
        let (start, step, count, denom) = match self {
            ServiceLevel::L1 => (10, 5, 7, 100.0),
            ServiceLevel::L2 => (4, 1, 6, 100.0),
            ServiceLevel::L3 => (6, 3, 9, 1000.0),
            ServiceLevel::L4 => (1, 1, 5, 1000.0),
        };
        (0..count)
            .map(|k| f64::from(start + step * k) / denom)
            .collect()
    }
}

impl fmt::Display for ServiceLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            ServiceLevel::L1 => 1,
            ServiceLevel::L2 => 2,
            ServiceLevel::L3 => 3,
            ServiceLevel::L4 => 4,
        };
        write!(f, "L{n}")
    }
}

/// Maps a request/provisioning tuple onto a service level.
///
/// Only four of the sixteen tuples are listed explicitly. Below full
/// utilization performance cannot be guaranteed, so `perf_required` is
/// cleared first; the level is then decided by utilization and payment flow.
/// Multi-tenancy does not influence the result.
pub fn classify_service_level(
    utilization: f64,
    _multi_tenant: bool,
    _perf_required: bool,
    payment_flow: PaymentFlow,
) -> ServiceLevel {
    let full = utilization >= 1.0;
    match (full, payment_flow) {
        (true, PaymentFlow::Single) => ServiceLevel::L1,
        (true, PaymentFlow::Recurring) => ServiceLevel::L2,
        (false, PaymentFlow::Recurring) => ServiceLevel::L3,
        (false, PaymentFlow::Single) => ServiceLevel::L4,
    }
}

/// The VMs dedicated to one request, one per service in service order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmAssignment {
    pub vms: Vec<VmType>,
    pub total_hour_cost: Money,
}

impl VmAssignment {
    /// Required-over-provided ratio of the least utilized resource
    /// (vCPU, memory or storage) across all services.
    pub fn utilization_ratios(&self, app: &Application) -> [(f64, f64); 3] {
        let mut req = [0.0; 3];
        let mut prov = [0.0; 3];
        for (s, vm) in app.services.iter().zip(&self.vms) {
            req[0] += f64::from(s.min_vcpu);
            req[1] += s.min_memory_gb;
            req[2] += s.min_storage_gb;
            prov[0] += f64::from(vm.vcpu);
            prov[1] += vm.memory_gb;
            prov[2] += vm.storage_gb;
        }
        [(req[0], prov[0]), (req[1], prov[1]), (req[2], prov[2])]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarketError {
    #[error("provider {provider_id} does not host application {app_id:?}")]
    ApplicationNotHosted { provider_id: usize, app_id: String },
    #[error("provider {provider_id} lacks a VM for service {service_index} of {app_id:?}")]
    InsufficientResources {
        provider_id: usize,
        app_id: String,
        service_index: usize,
    },
}

/// Picks one inventory VM per service of `app`, minimizing the total hourly
/// cost while respecting inventory counts.
///
/// Candidates for each service are ranked by (hour_cost, size_label), so when
/// counts do not bind every service simply gets its cheapest satisfying VM
/// with lexicographic tie-break. When they do bind, a branch-and-bound search
/// over the ranked candidates finds the cheapest overall assignment, keeping
/// the first one found in rank order among equal-cost alternatives.
pub fn select_vms(app: &Application, provider: &Provider) -> Result<VmAssignment, MarketError> {
    if provider.application(&app.app_id).is_none() {
        return Err(MarketError::ApplicationNotHosted {
            provider_id: provider.provider_id,
            app_id: app.app_id.clone(),
        });
    }
    let inventory = &provider.vm_inventory;
    let insufficient = |service_index| MarketError::InsufficientResources {
        provider_id: provider.provider_id,
        app_id: app.app_id.clone(),
        service_index,
    };

    let mut candidates: Vec<Vec<usize>> = Vec::with_capacity(app.services.len());
    for (si, service) in app.services.iter().enumerate() {
        let mut c: Vec<usize> = (0..inventory.len())
            .filter(|&k| inventory[k].count > 0 && inventory[k].vm_type.satisfies(service))
            .collect();
        if c.is_empty() {
            return Err(insufficient(si));
        }
        c.sort_by(|&a, &b| {
            let (va, vb) = (&inventory[a].vm_type, &inventory[b].vm_type);
            va.hour_cost
                .cmp(&vb.hour_cost)
                .then_with(|| va.size_label.cmp(&vb.size_label))
        });
        candidates.push(c);
    }

    // suffix_bound[s] = cheapest conceivable cost of services s.. ignoring counts
    let mut suffix_bound = vec![0i64; candidates.len() + 1];
    for s in (0..candidates.len()).rev() {
        let cheapest = inventory[candidates[s][0]].vm_type.hour_cost.micros();
        suffix_bound[s] = suffix_bound[s + 1] + cheapest;
    }

    let mut search = AssignmentSearch {
        inventory,
        candidates: &candidates,
        suffix_bound: &suffix_bound,
        remaining: inventory.iter().map(|e| e.count).collect(),
        chosen: Vec::with_capacity(candidates.len()),
        best: None,
    };
    search.descend(0, 0);

    match search.best {
        Some((micros, picks)) => Ok(VmAssignment {
            vms: picks.iter().map(|&k| inventory[k].vm_type.clone()).collect(),
            total_hour_cost: Money::from_micros(micros),
        }),
        None => {
            // Counts exhausted: report the first service that a greedy pass
            // cannot place.
            let mut remaining: Vec<u32> = inventory.iter().map(|e| e.count).collect();
            let failing = candidates
                .iter()
                .position(|c| match c.iter().find(|&&k| remaining[k] > 0) {
                    Some(&k) => {
                        remaining[k] -= 1;
                        false
                    }
                    None => true,
                })
                .unwrap_or(0);
            Err(insufficient(failing))
        }
    }
}

struct AssignmentSearch<'a> {
    inventory: &'a [InventoryEntry],
    candidates: &'a [Vec<usize>],
    suffix_bound: &'a [i64],
    remaining: Vec<u32>,
    chosen: Vec<usize>,
    best: Option<(i64, Vec<usize>)>,
}

impl AssignmentSearch<'_> {
    fn descend(&mut self, service: usize, cost: i64) {
        if let Some((best, _)) = &self.best {
            if cost + self.suffix_bound[service] >= *best {
                return;
            }
        }
        if service == self.candidates.len() {
            self.best = Some((cost, self.chosen.clone()));
            return;
        }
        for &k in &self.candidates[service] {
            if self.remaining[k] == 0 {
                continue;
            }
            self.remaining[k] -= 1;
            self.chosen.push(k);
            let step = self.inventory[k].vm_type.hour_cost.micros();
            self.descend(service + 1, cost + step);
            self.chosen.pop();
            self.remaining[k] += 1;
        }
    }
}

/// A catalog document: VM offerings, applications and providers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketCatalog {
    pub vm_types: Vec<VmType>,
    pub applications: Vec<Application>,
    pub providers: Vec<Provider>,
}

impl MarketCatalog {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut labels = BTreeSet::new();
        for vm in &self.vm_types {
            if !labels.insert(vm.size_label.as_str()) {
                out.push(format!("duplicate vm type {}", vm.size_label));
            }
            out.extend(vm.violations());
        }
        for app in &self.applications {
            out.extend(app.violations());
        }
        for p in &self.providers {
            out.extend(p.violations());
        }
        out
    }
}
