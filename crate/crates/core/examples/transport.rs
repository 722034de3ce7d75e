//! Exact discrete optimal transport with extended (possibly infinite) costs.
//!
//! Run with `cargo run --example transport`.

use bicausal::chain::Distribution;
use bicausal::exact_ot::{brute_force_transport, solve_transport, CostTable};

fn main() -> bicausal::Result<()> {
    let p = Distribution::new(vec![0.5, 0.3, 0.2])?;
    let q = Distribution::new(vec![0.2, 0.2, 0.6])?;

    // |i - j| on a line
    let line = CostTable::from_rows(&[[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]])?;
    let sol = solve_transport(&p, &q, &line)?;
    println!("W1 on a line: {:.6}", sol.value);
    println!(
        "  brute force: {:.6}",
        brute_force_transport(&p, &q, &line)?
    );
    for y in 0..3 {
        let row: Vec<String> = (0..3)
            .map(|z| format!("{:.3}", sol.plan.mass(y, z)))
            .collect();
        println!("  {}", row.join("  "));
    }

    // forbid moving mass downward
    let inf = f64::INFINITY;
    let upward = CostTable::from_rows(&[[0.0, 1.0, 2.0], [inf, 0.0, 1.0], [inf, inf, 0.0]])?;
    let sol = solve_transport(&p, &q, &upward)?;
    println!("upward-only cost: {:.6}", sol.value);

    // infeasible: q puts mass below everything p can reach
    let q_low = Distribution::new(vec![0.9, 0.1, 0.0])?;
    let sol = solve_transport(&p, &q_low, &upward)?;
    println!("upward-only to a lower law: {}", sol.value);

    // the discrete metric gives total variation
    let tv = solve_transport(&p, &q, &CostTable::discrete_metric(3))?;
    println!("TV via transport: {:.6}", tv.value);
    Ok(())
}
