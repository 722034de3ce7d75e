//! Value iteration on the worked two-state chain, compared with the closed form
//! `W_bc(0, 1) = 1 / (1 − TV)`.
//!
//! Run with `cargo run --example two_state`.

use bicausal::bicausal_dp::{value_iterate, verify_fixed_point, ProblemSpec, ValueIteration};
use bicausal::chain::{doeblin_coefficient, validate_kernel};
use bicausal::noncausal::two_state_closed_forms;

fn main() -> bicausal::Result<()> {
    let p = validate_kernel(&[[0.9, 0.1], [0.2, 0.8]])?;
    let spec = ProblemSpec::coupling_time(p.clone(), 0, 1)?;

    println!("first iterates of V(0, 1):");
    for (k, v) in ValueIteration::new(&spec).take(5).enumerate() {
        println!("  V_{} = {:.6}", k + 1, v.get(0, 1));
    }

    let report = value_iterate(&spec, 1e-12, 100_000)?;
    let forms = two_state_closed_forms(&p)?;
    println!(
        "W_bc(0, 1) = {:.9} after {} iterations",
        report.value_at(0, 1),
        report.iterations
    );
    println!("closed form  {:.9}", forms.w_bc_formula);
    println!(
        "1/(1 - delta) = {:.9}",
        1.0 / (1.0 - doeblin_coefficient(&p))
    );

    let check = verify_fixed_point(&report.value_table, &spec, 1e-8)?;
    println!(
        "fixed point: {} (residual {:.2e})",
        check.all_ok(),
        check.residual
    );

    for beta in [0.5, 0.9, 0.99] {
        let spec = ProblemSpec::discrete(p.clone(), 0, 1, beta)?;
        let r = value_iterate(&spec, 1e-10, 100_000)?;
        println!("beta = {beta}: W_bc(0, 1) = {:.6}", r.value_at(0, 1));
    }
    Ok(())
}
