//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any of them fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use saas_market::experiments::{
    builtin_app_catalog, builtin_vm_catalog, generate_scenario, run_bid_convergence,
    run_profit_series, run_scaling, write_scaling, write_trace_csv, ExperimentReport,
    ReportFormat,
};
use saas_market::game::enumerate_nash;
use saas_market::market::{PaymentFlow, ServiceLevel};
use saas_market::pricing::{bid_price, omega_star, OmegaStarVariant, PricingContext};
use saas_market::Money;

struct Verdict {
    ok: bool,
    detail: String,
}

impl Verdict {
    fn new(ok: bool, detail: impl Into<String>) -> Self {
        Verdict {
            ok,
            detail: detail.into(),
        }
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed < Duration::from_secs(limit_secs)
}

fn trace_csv(report: &ExperimentReport) -> String {
    let mut buf = Vec::new();
    write_trace_csv(report, &mut buf).expect("in-memory csv");
    String::from_utf8(buf).expect("utf-8 csv")
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

fn bid_anchor() -> Verdict {
    let ctx = PricingContext::new(0.95, 65.0, 295.0, 1.0, 1.0, 360.0, ServiceLevel::L4).unwrap();
    let bid = bid_price(0.001, &ctx);
    Verdict::new((bid - 11.7262).abs() <= 3e-4, format!("bid = {bid:.6}"))
}

// Winner-branch margin, written out independently of the library.
fn margin(omega: f64, gamma: f64, t: f64, k: f64) -> f64 {
    let x = omega.sqrt();
    x * (1.0 + gamma * x) * t - omega * k
}

fn closed_form_vs_scan() -> Verdict {
    const STEP: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(2016);
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut dominated = 0;
    for _ in 0..1000 {
        let gamma = rng.gen_range(0.5..0.99);
        let theta = rng.gen_range(1.0..5000.0);
        let c = rng.gen_range(0.01..500.0);
        let t = theta + c;
        // K/T - γ in this band puts ω* in [0.1, 0.5], where a 1e-6 step
        // resolves 1e-5 relative accuracy.
        let ratio = gamma + rng.gen_range(0.708..1.58);
        let k = ratio * t;
        let share = rng.gen_range(0.2..0.8);
        let alpha = k * share / c;
        let beta = k * (1.0 - share) / theta;
        let ctx = PricingContext::new(gamma, theta, c, alpha, beta, t, ServiceLevel::L1).unwrap();
        let Some(star) = omega_star(&ctx, OmegaStarVariant::Corrected) else {
            failures += 1;
            continue;
        };
        let k = ctx.cost_weight();
        let steps = (4.0 * star / STEP).floor() as u64;
        let (mut best_w, mut best_g) = (STEP, f64::NEG_INFINITY);
        for i in 1..=steps {
            let w = i as f64 * STEP;
            let g = margin(w, gamma, t, k);
            if g > best_g {
                best_g = g;
                best_w = w;
            }
        }
        let rel = (best_w - star).abs() / star;
        worst = worst.max(rel);
        if rel > 1e-5 {
            failures += 1;
        }
        if let Some(printed) = omega_star(&ctx, OmegaStarVariant::AsPrinted) {
            if printed != star && margin(star, gamma, t, k) <= margin(printed, gamma, t, k) {
                dominated += 1;
            }
        }
    }
    Verdict::new(
        failures == 0 && dominated == 0,
        format!("worst relative gap {worst:.2e}, {failures} misses, {dominated} not dominating"),
    )
}

fn equilibrium_oracle() -> (Verdict, String) {
    let mut converged = 0;
    let mut unconfirmed = Vec::new();
    let mut stuck = Vec::new();
    let mut csv = String::new();
    for seed in 0..100u64 {
        let n = 2 + (seed % 3) as usize;
        let scenario = generate_scenario(n, 1, seed);
        let report = run_bid_convergence(&scenario, 0).expect("generated scenario plays");
        let played = &report.outcomes[0];
        if played.outcome.converged {
            converged += 1;
            let equilibria = enumerate_nash(&played.players).expect("small game enumerates");
            if !equilibria.contains(&played.outcome.equilibrium_profile) {
                unconfirmed.push(seed);
            }
        } else {
            stuck.push(seed);
        }
        csv.push_str(&trace_csv(&report));
    }
    let mut detail = format!("{converged}/100 converged, {} unconfirmed", unconfirmed.len());
    if !stuck.is_empty() {
        detail.push_str(&format!(", not converged: seeds {stuck:?}"));
    }
    if !unconfirmed.is_empty() {
        detail.push_str(&format!(", unconfirmed: seeds {unconfirmed:?}"));
    }
    (Verdict::new(converged >= 95 && unconfirmed.is_empty(), detail), csv)
}

fn non_decreasing(report: &ExperimentReport) -> bool {
    report
        .profits
        .iter()
        .all(|s| s.cumulative.windows(2).all(|w| w[1] >= w[0]))
}

fn profit_series() -> (Verdict, String) {
    let oligopoly = generate_scenario(10, 100, 77);
    let duopoly = oligopoly.with_first_providers(2);
    let r10 = run_profit_series(&oligopoly).expect("oligopoly plays");
    let r2 = run_profit_series(&duopoly).expect("duopoly plays");
    let (sum2, sum10) = (r2.total_profit(), r10.total_profit());
    let rel = (sum2 - sum10).abs() / sum2.abs().max(sum10.abs());
    let monotone = non_decreasing(&r2) && non_decreasing(&r10);
    let complete = r2.failures.is_empty() && r10.failures.is_empty() && r2.profits.len() == 2;
    let verdict = Verdict::new(
        monotone && complete && rel <= 0.05,
        format!("duopoly {sum2:.3}, oligopoly {sum10:.3}, relative gap {rel:.4}, monotone {monotone}"),
    );
    (verdict, trace_csv(&r2) + &trace_csv(&r10))
}

fn convergence_traces() -> (Verdict, String) {
    let mut csv = String::new();
    let mut unstable = 0;
    let mut by_size = [Vec::new(), Vec::new()];
    for seed in 0..25u64 {
        let oligopoly = generate_scenario(10, 1, 5000 + seed);
        let duopoly = oligopoly.with_first_providers(2);
        for (slot, scenario) in [duopoly, oligopoly].iter().enumerate() {
            let report = run_bid_convergence(scenario, 0).expect("generated scenario plays");
            let outcome = &report.outcomes[0].outcome;
            if outcome.converged {
                let tail: Vec<_> = outcome
                    .trace
                    .iter()
                    .filter(|r| r.iteration > outcome.iterations)
                    .collect();
                if tail.is_empty() || tail.iter().any(|r| r.profile != outcome.equilibrium_profile) {
                    unstable += 1;
                }
            }
            by_size[slot].push(outcome.iterations as f64);
            csv.push_str(&trace_csv(&report));
        }
    }
    let m2 = median(&mut by_size[0]);
    let m10 = median(&mut by_size[1]);
    let verdict = Verdict::new(
        unstable == 0 && m10 >= m2,
        format!("median iterations n=2 {m2}, n=10 {m10}, {unstable} unstable tails"),
    );
    (verdict, csv)
}

fn scaling() -> (Verdict, String) {
    let rows = run_scaling(&[2, 8, 32, 128], 0).expect("scaling runs");
    let mut buf = Vec::new();
    write_scaling(&rows, ReportFormat::Csv, false, &mut buf).expect("in-memory csv");
    let first = rows[0].iterations;
    let last = rows[rows.len() - 1].iterations;
    let ratio = last / first;
    let shape: Vec<String> = rows.iter().map(|r| format!("{}:{}", r.n, r.iterations)).collect();
    let verdict = Verdict::new(
        ratio < 64.0,
        format!("median iterations {}, ratio {ratio:.2}", shape.join(" ")),
    );
    (verdict, String::from_utf8(buf).expect("utf-8 csv"))
}

fn catalog_fidelity() -> Verdict {
    let vms = [
        ("t2.small", 1, 2.0, 4.0, "0.026"),
        ("t2.medium", 2, 4.0, 4.0, "0.052"),
        ("m3.medium", 1, 3.75, 4.0, "0.07"),
        ("c3.large", 2, 3.75, 32.0, "0.105"),
        ("m3.large", 2, 7.5, 32.0, "0.14"),
        ("R3.large", 2, 15.0, 32.0, "0.175"),
    ];
    let apps = [
        ("CRM Server 2013", 4922, 150),
        ("CRM Professional User CAL", 983, 65),
        ("CRM Professional Device CAL", 787, 65),
        ("CRM Basic User CAL", 342, 30),
        ("CRM Basic Device CAL", 236, 30),
        ("CRM Essential CAL", 79, 15),
    ];
    let mut mismatches = Vec::new();
    let vm_cat = builtin_vm_catalog();
    if vm_cat.len() != vms.len() {
        mismatches.push(format!("{} VM types", vm_cat.len()));
    }
    for (vm, &(label, vcpu, mem, storage, price)) in vm_cat.iter().zip(&vms) {
        if vm.size_label != label
            || vm.vcpu != vcpu
            || vm.memory_gb != mem
            || vm.storage_gb != storage
            || vm.hour_cost.to_string() != price
        {
            mismatches.push(vm.size_label.clone());
        }
    }
    let app_cat = builtin_app_catalog();
    if app_cat.len() != apps.len() {
        mismatches.push(format!("{} applications", app_cat.len()));
    }
    for (app, &(name, license, monthly)) in app_cat.iter().zip(&apps) {
        if app.app_id != name
            || app.price_for(PaymentFlow::Single) != Money::from_units(license)
            || app.price_for(PaymentFlow::Recurring) != Money::from_units(monthly)
        {
            mismatches.push(app.app_id.clone());
        }
    }
    Verdict::new(mismatches.is_empty(), format!("mismatches: {mismatches:?}"))
}

fn report(id: u32, name: &str, limit_secs: Option<u64>, elapsed: Duration, v: Verdict) -> bool {
    let fast = limit_secs.is_none_or(|s| within(elapsed, s));
    let ok = v.ok && fast;
    let budget = limit_secs.map_or(String::new(), |s| format!(" (limit {s} s)"));
    println!(
        "{} [{id}] {name}: {}; {:.2} s{budget}",
        if ok { "PASS" } else { "FAIL" },
        v.detail,
        elapsed.as_secs_f64()
    );
    ok
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn main() -> ExitCode {
    let mut all = true;

    let (v, t) = timed(bid_anchor);
    all &= report(1, "bid formula anchor", None, t, v);

    let (v, t) = timed(closed_form_vs_scan);
    all &= report(2, "closed form vs dense scan", Some(30), t, v);

    let ((v, csv3), t) = timed(equilibrium_oracle);
    all &= report(3, "equilibrium existence and oracle agreement", Some(60), t, v);

    let ((v, csv4), t) = timed(profit_series);
    all &= report(4, "profit series", Some(30), t, v);

    let ((v, csv5), t) = timed(convergence_traces);
    all &= report(5, "convergence traces", Some(60), t, v);

    let ((v, csv6), t) = timed(scaling);
    all &= report(6, "scaling shape", Some(120), t, v);

    let (v, t) = timed(catalog_fidelity);
    all &= report(7, "catalog fidelity", None, t, v);

    let (v, t) = timed(|| {
        let again = [
            equilibrium_oracle().1,
            profit_series().1,
            convergence_traces().1,
            scaling().1,
        ];
        let first = [&csv3, &csv4, &csv5, &csv6];
        let differing: Vec<usize> = first
            .iter()
            .zip(&again)
            .enumerate()
            .filter(|(_, (a, b))| **a != *b)
            .map(|(i, _)| i + 3)
            .collect();
        let bytes: usize = again.iter().map(String::len).sum();
        Verdict::new(
            differing.is_empty() && bytes > 0,
            format!("{bytes} CSV bytes compared, differing criteria {differing:?}"),
        )
    });
    all &= report(8, "determinism", None, t, v);

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
