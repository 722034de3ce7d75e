//! Monte Carlo coupling times and discounted costs, checked against exact
//! policy evaluation.
//!
//! Run with `cargo run --release --example monte_carlo`.

use bicausal::bicausal_dp::{evaluate_policy, extract_greedy_coupling, value_iterate, ProblemSpec};
use bicausal::chain::validate_kernel;
use bicausal::couplings::classic_coupling;
use bicausal::simulate::{
    estimate_coupling_time, estimate_discounted_cost, sample_coupled_trajectory, SimulationConfig,
};

fn main() -> bicausal::Result<()> {
    let p = validate_kernel(&[[0.9, 0.1], [0.2, 0.8]])?;
    let spec = ProblemSpec::coupling_time(p.clone(), 0, 1)?;
    let cfg = SimulationConfig::new(200_000, 1_000_000, 42)?;

    let optimal =
        extract_greedy_coupling(&value_iterate(&spec, 1e-12, 100_000)?.value_table, &spec)?;
    for (name, q) in [("optimal", &optimal), ("classic", &classic_coupling(&p))] {
        let exact = evaluate_policy(q, &spec)?.get(0, 1);
        let mc = estimate_coupling_time(q, 0, 1, &cfg)?;
        println!(
            "{name:<8} E[T] exact {exact:.4}, simulated {:.4} ± {:.4} (censored {})",
            mc.mean, mc.std_error, mc.censored
        );
    }

    let (xs, ys) = sample_coupled_trajectory(&optimal, 0, 1, 12, 7)?;
    println!("one coupled path: {xs:?}");
    println!("                  {ys:?}");

    let discounted = ProblemSpec::discrete(p, 0, 1, 0.5)?;
    let q = extract_greedy_coupling(
        &value_iterate(&discounted, 1e-12, 100_000)?.value_table,
        &discounted,
    )?;
    let exact = evaluate_policy(&q, &discounted)?.get(0, 1);
    let est = estimate_discounted_cost(&q, &discounted, &cfg)?;
    println!(
        "beta = 0.5: exact {exact:.4}, simulated {:.4} ± {:.4} (truncation <= {:.0e})",
        est.mean, est.std_error, est.truncation_bound
    );
    Ok(())
}
