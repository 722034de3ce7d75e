//! Named Markovian couplings, their policy values, and the optimal coupling
//! extracted from the Bellman fixed point.
//!
//! Run with `cargo run --example couplings`.

use bicausal::bicausal_dp::{
    evaluate_policy, extract_greedy_coupling, value_iterate, verify_optimal_coupling,
    CouplingKernel, ProblemSpec,
};
use bicausal::chain::validate_kernel;
use bicausal::couplings::{
    check_sticky, classic_coupling, independent_coupling, wasserstein_coupling,
};

fn max_gap(a: &CouplingKernel, b: &CouplingKernel) -> f64 {
    a.plans()
        .iter()
        .zip(b.plans())
        .flat_map(|(x, y)| {
            x.masses()
                .iter()
                .zip(y.masses())
                .map(|(u, v)| (u - v).abs())
        })
        .fold(0.0, f64::max)
}

fn main() -> bicausal::Result<()> {
    let p = validate_kernel(&[[0.9, 0.1], [0.2, 0.8]])?;
    let spec = ProblemSpec::coupling_time(p.clone(), 0, 1)?;

    let named = [
        ("classic", classic_coupling(&p)),
        ("independent", independent_coupling(&p, &p)),
        ("wasserstein", wasserstein_coupling(&p, &p)),
    ];
    for (name, q) in &named {
        let v = evaluate_policy(q, &spec)?;
        println!(
            "{name:<12} sticky={:<5} E[T] from (0, 1) = {:.6}",
            check_sticky(q, &p, 1e-9),
            v.get(0, 1)
        );
    }

    let report = value_iterate(&spec, 1e-12, 100_000)?;
    let optimal = extract_greedy_coupling(&report.value_table, &spec)?;
    println!(
        "optimal vs wasserstein: max entry gap {:.2e}",
        max_gap(&optimal, &named[2].1)
    );
    for (name, q) in &named {
        let ok = verify_optimal_coupling(q, &report.value_table, &spec, 1e-8)?;
        println!("{name:<12} optimal: {ok}");
    }

    // a three-state chain: the optimal coupling is sticky
    let p3 = validate_kernel(&[[0.5, 0.3, 0.2], [0.1, 0.6, 0.3], [0.3, 0.3, 0.4]])?;
    let spec3 = ProblemSpec::coupling_time(p3.clone(), 0, 2)?;
    let r3 = value_iterate(&spec3, 1e-12, 100_000)?;
    let q3 = extract_greedy_coupling(&r3.value_table, &spec3)?;
    println!(
        "three-state W_bc(0, 2) = {:.6}, sticky = {}",
        r3.value_at(0, 2),
        check_sticky(&q3, &p3, 1e-9)
    );
    Ok(())
}
