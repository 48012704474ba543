//! Competition-based dynamic pricing of applications among SaaS providers.
//!
//! Providers registered with a marketplace committee each receive the same
//! user request, provision VMs for it, and offer a price parameterized by a
//! service-level dependent knob ω. The lowest price wins. Providers adjust
//! their ω by best response until nobody gains from deviating alone.
//!
//! - [`market`]: catalog entities, service levels, VM selection
//! - [`pricing`]: bid, cost and payoff formulas and the closed-form optimum
//! - [`game`]: winner determination, best-response dynamics, Nash checks
//! - [`experiments`]: built-in catalogs, scenarios, runners and exports
//! - [`cli`]: the `saas-market` command line

pub mod cli;
pub mod experiments;
pub mod game;
pub mod market;
pub mod money;
pub mod pricing;

pub use money::Money;
