//! Built-in VM and application catalogs.

use crate::market::{Application, ServiceRequirement, VmType};
use crate::money::Money;

/// OS label shared by the built-in VMs and services.
pub const DEFAULT_HOST_OS: &str = "linux";

// (size, vcpu, memory GB, storage GB, $/hour in micro-dollars)
const VM_ROWS: [(&str, u32, f64, f64, i64); 6] = [
    ("t2.small", 1, 2.0, 4.0, 26_000),
    ("t2.medium", 2, 4.0, 4.0, 52_000),
    ("m3.medium", 1, 3.75, 4.0, 70_000),
    ("c3.large", 2, 3.75, 32.0, 105_000),
    ("m3.large", 2, 7.5, 32.0, 140_000),
    ("R3.large", 2, 15.0, 32.0, 175_000),
];

/// (application, on-premise license $, online $ per user per month)
pub const APP_PRICES: [(&str, i64, i64); 6] = [
    ("CRM Server 2013", 4922, 150),
    ("CRM Professional User CAL", 983, 65),
    ("CRM Professional Device CAL", 787, 65),
    ("CRM Basic User CAL", 342, 30),
    ("CRM Basic Device CAL", 236, 30),
    ("CRM Essential CAL", 79, 15),
];

/// Tenants served by one CRM Server instance.
const SERVER_TENANTS: u32 = 25;

pub fn builtin_vm_catalog() -> Vec<VmType> {
    VM_ROWS
        .iter()
        .map(|&(label, vcpu, mem, storage, micros)| VmType {
            size_label: label.to_string(),
            vcpu,
            memory_gb: mem,
            storage_gb: storage,
            host_os: DEFAULT_HOST_OS.to_string(),
            hour_cost: Money::from_micros(micros),
        })
        .collect()
}

fn small_service() -> ServiceRequirement {
    ServiceRequirement {
        min_vcpu: 1,
        min_memory_gb: 2.0,
        min_storage_gb: 4.0,
        host_os: DEFAULT_HOST_OS.to_string(),
    }
}

fn memory_service() -> ServiceRequirement {
    ServiceRequirement {
        min_vcpu: 2,
        min_memory_gb: 10.0,
        min_storage_gb: 32.0,
        host_os: DEFAULT_HOST_OS.to_string(),
    }
}

/// The CRM offerings. Single payments are charged the on-premise license
/// price, recurring payments the online monthly price.
///
/// Service lists are synthetic: the server runs a memory-heavy service plus
/// two small ones, every CAL runs one small service.
pub fn builtin_app_catalog() -> Vec<Application> {
    APP_PRICES
        .iter()
        .map(|&(name, license, monthly)| {
            let server = name == "CRM Server 2013";
            let services = if server {
                vec![memory_service(), small_service(), small_service()]
            } else {
                vec![small_service()]
            };
            Application {
                app_id: name.to_string(),
                num_services: services.len(),
                services,
                max_tenants: if server { SERVER_TENANTS } else { 1 },
                initial_price: Money::from_units(license),
                recurring_price: Some(Money::from_units(monthly)),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::PaymentFlow;

    #[test]
    fn vm_rows() {
        let cat = builtin_vm_catalog();
        assert_eq!(cat.len(), 6);
        assert_eq!(cat[0].size_label, "t2.small");
        assert_eq!(cat[0].hour_cost.to_string(), "0.026");
        assert_eq!(cat[5].memory_gb, 15.0);
        assert!(cat.iter().all(|v| v.violations().is_empty()));
    }

    #[test]
    fn app_rows() {
        let cat = builtin_app_catalog();
        assert_eq!(cat.len(), 6);
        let essential = cat.iter().find(|a| a.app_id == "CRM Essential CAL").unwrap();
        assert_eq!(essential.price_for(PaymentFlow::Single), Money::from_units(79));
        let server = &cat[0];
        assert_eq!(server.price_for(PaymentFlow::Recurring), Money::from_units(150));
        assert_eq!(server.num_services, 3);
        assert!(cat.iter().all(|a| a.violations().is_empty()));
    }
}
