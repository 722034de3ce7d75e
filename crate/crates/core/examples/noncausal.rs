//! Non-causal transport cost from the maximal-coupling series, set against
//! the bicausal value and the two-state closed forms.
//!
//! Run with `cargo run --example noncausal`.

use bicausal::bicausal_dp::{value_iterate, ProblemSpec};
use bicausal::chain::validate_kernel;
use bicausal::noncausal::{noncausal_cost_series, two_state_closed_forms, W_FORMULA_CAVEAT};

fn main() -> bicausal::Result<()> {
    let p = validate_kernel(&[[0.9, 0.1], [0.2, 0.8]])?;
    let series = noncausal_cost_series(&p, 0, 1, 1.0, 1e-12)?;
    let forms = two_state_closed_forms(&p)?;
    println!(
        "series W(0, 1) = {:.6} ({} terms, tail <= {:.1e})",
        series.value, series.terms_used, series.tail_bound
    );
    println!("w_bc closed form = {:.6}", forms.w_bc_formula);
    println!(
        "w closed form    = {:.6} (caveat: {})",
        forms.w_formula, forms.w_formula_caveat
    );
    println!("  {W_FORMULA_CAVEAT}");

    // on larger chains causality has a price: W <= W_bc, here strictly
    let p3 = validate_kernel(&[[0.2, 0.8, 0.0], [0.0, 0.2, 0.8], [0.8, 0.0, 0.2]])?;
    for beta in [0.5, 1.0] {
        let spec = ProblemSpec::discrete(p3.clone(), 0, 2, beta)?;
        let w_bc = value_iterate(&spec, 1e-12, 100_000)?.value_at(0, 2);
        let w = noncausal_cost_series(&p3, 0, 2, beta, 1e-12)?.value;
        println!("beta = {beta}: W = {w:.6} <= W_bc = {w_bc:.6}");
    }
    Ok(())
}
