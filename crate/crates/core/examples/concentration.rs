//! Concentration bounds for Hamming-Lipschitz path functionals with three
//! choices of transport-cost proxy.
//!
//! Run with `cargo run --example concentration`.

use bicausal::bicausal_dp::ProblemSpec;
use bicausal::chain::validate_kernel;
use bicausal::concentration::{mcdiarmid_bound, variance_proxy, BoundRequest, ProxyMode};

fn main() -> bicausal::Result<()> {
    let p = validate_kernel(&[[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.3, 0.2, 0.5]])?;
    let spec = ProblemSpec::coupling_time(p, 0, 1)?;
    let n = 1000;
    for mode in [
        ProxyMode::NoncausalSeries,
        ProxyMode::BicausalDp,
        ProxyMode::Doeblin,
    ] {
        let proxy = variance_proxy(&spec, mode)?;
        print!("{:<8} proxy {proxy:.6}:", mode.to_string());
        for t in [50.0, 100.0, 150.0] {
            let bound = mcdiarmid_bound(&BoundRequest::new(n, t, mode)?, proxy)?;
            print!("  t={t}: {bound:.4}");
        }
        println!();
    }

    let two = ProblemSpec::coupling_time(validate_kernel(&[[0.9, 0.1], [0.2, 0.8]])?, 0, 1)?;
    let proxy = variance_proxy(&two, ProxyMode::Doeblin)?;
    let req = BoundRequest::new(100, 20.0, ProxyMode::Doeblin)?;
    println!(
        "two-state, n=100, t=20: {:.6}",
        mcdiarmid_bound(&req, proxy)?
    );
    Ok(())
}
