//! Bounded-differences concentration bounds for Hamming-Lipschitz functions
//! of a Markov chain path.
//!
//! For `f` 1-Lipschitz in the Hamming distance,
//! `P(|f − E f| ≥ t) ≤ 2 exp(−2t² / (n · ‖W‖∞²))`, where `‖W‖∞` is any upper
//! bound on the pairwise transport cost between two initializations.
//! Three such proxies are available, ordered from tightest to loosest:
//! the maximal-coupling series, the bicausal cost, and `1 / (1 − δ(P))`.

use std::fmt;
use std::str::FromStr;

use crate::bicausal_dp::{value_iterate, ProblemSpec, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::chain::doeblin_coefficient;
use crate::error::{Error, Result};
use crate::noncausal::noncausal_cost_series;

/// Truncation tolerance used for the series proxy.
pub const SERIES_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxyMode {
    NoncausalSeries,
    BicausalDp,
    Doeblin,
}

impl FromStr for ProxyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "series" | "noncausal_series" => Ok(Self::NoncausalSeries),
            "dp" | "bicausal_dp" => Ok(Self::BicausalDp),
            "doeblin" => Ok(Self::Doeblin),
            other => Err(Error::InvalidArgument(format!(
                "unknown proxy mode {other:?}"
            ))),
        }
    }
}

impl fmt::Display for ProxyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NoncausalSeries => "series",
            Self::BicausalDp => "dp",
            Self::Doeblin => "doeblin",
        })
    }
}

/// Path length `n` and deviation `t` for a bound query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRequest {
    pub n: u64,
    pub t: f64,
    pub proxy_mode: ProxyMode,
}

impl BoundRequest {
    pub fn new(n: u64, t: f64, proxy_mode: ProxyMode) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "path length n must be at least 1".into(),
            ));
        }
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "deviation t = {t} must be positive"
            )));
        }
        Ok(Self { n, t, proxy_mode })
    }
}

/// Sup-norm transport cost used as the range of each martingale difference.
pub fn variance_proxy(spec: &ProblemSpec, mode: ProxyMode) -> Result<f64> {
    match mode {
        ProxyMode::Doeblin => {
            if !spec.same_kernel() {
                return Err(Error::NotCouplingInstance);
            }
            let delta = doeblin_coefficient(spec.p());
            if delta >= 1.0 {
                return Err(Error::NoContraction);
            }
            Ok(1.0 / (1.0 - delta))
        }
        ProxyMode::NoncausalSeries => {
            if !spec.is_coupling_time_instance() {
                return Err(Error::NotCouplingInstance);
            }
            let n = spec.n();
            let mut worst: f64 = 0.0;
            for x in 0..n {
                for x2 in x + 1..n {
                    let r = noncausal_cost_series(spec.p(), x, x2, 1.0, SERIES_TOL)?;
                    worst = worst.max(r.value);
                }
            }
            Ok(worst)
        }
        ProxyMode::BicausalDp => {
            if !spec.is_coupling_time_instance() {
                return Err(Error::NotCouplingInstance);
            }
            let report = value_iterate(spec, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            if !report.converged || !report.infinite_flags.is_empty() {
                return Ok(f64::INFINITY);
            }
            Ok(report.value_table.sup_norm())
        }
    }
}

/// `2 exp(−2t² / (n · proxy²))`, never above the trivial bound 2.
pub fn mcdiarmid_bound(req: &BoundRequest, proxy: f64) -> Result<f64> {
    if proxy.is_infinite() {
        return Err(Error::InfiniteProxy);
    }
    if !(proxy > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "proxy {proxy} must be positive"
        )));
    }
    let exponent = -2.0 * req.t * req.t / (req.n as f64 * proxy * proxy);
    Ok((2.0 * exponent.exp()).min(2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::validate_kernel;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn worked() -> ProblemSpec {
        let p = validate_kernel(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        ProblemSpec::coupling_time(p, 0, 1).unwrap()
    }

    #[test]
    fn proxies_on_worked_kernel() {
        let spec = worked();
        let doeblin = variance_proxy(&spec, ProxyMode::Doeblin).unwrap();
        assert_abs_diff_eq!(doeblin, 10.0 / 3.0, epsilon = 1e-12);
        let dp = variance_proxy(&spec, ProxyMode::BicausalDp).unwrap();
        assert_abs_diff_eq!(dp, 10.0 / 3.0, epsilon = 1e-8);
        let series = variance_proxy(&spec, ProxyMode::NoncausalSeries).unwrap();
        assert_abs_diff_eq!(series, 10.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn rank_one_kernel_couples_in_one_step() {
        let p = validate_kernel(&[vec![0.2, 0.8], vec![0.2, 0.8]]).unwrap();
        let spec = ProblemSpec::coupling_time(p, 0, 1).unwrap();
        assert_eq!(variance_proxy(&spec, ProxyMode::Doeblin).unwrap(), 1.0);
    }

    #[test]
    fn proxy_errors() {
        let id = crate::chain::TransitionKernel::identity(2);
        let spec = ProblemSpec::coupling_time(id, 0, 1).unwrap();
        assert_eq!(
            variance_proxy(&spec, ProxyMode::Doeblin),
            Err(Error::NoContraction)
        );
        let discounted = ProblemSpec::discrete(worked().p().clone(), 0, 1, 0.5).unwrap();
        assert_eq!(
            variance_proxy(&discounted, ProxyMode::BicausalDp),
            Err(Error::NotCouplingInstance)
        );
    }

    #[test]
    fn worked_bound() {
        let req = BoundRequest::new(100, 20.0, ProxyMode::Doeblin).unwrap();
        let b = mcdiarmid_bound(&req, 10.0 / 3.0).unwrap();
        assert_abs_diff_eq!(b, 2.0 * (-0.72f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(b, 0.973_504_5, epsilon = 1e-7);
        assert_eq!(
            mcdiarmid_bound(&req, f64::INFINITY),
            Err(Error::InfiniteProxy)
        );
        assert!(BoundRequest::new(100, 0.0, ProxyMode::Doeblin).is_err());
        let tiny = BoundRequest::new(100, 1e-300, ProxyMode::Doeblin).unwrap();
        assert_eq!(mcdiarmid_bound(&tiny, 1.0).unwrap(), 2.0);
    }

    proptest! {
        #[test]
        fn bound_monotonicity(
            n in 1u64..1000,
            t in 0.1f64..50.0,
            proxy in 0.5f64..20.0,
        ) {
            let req = BoundRequest::new(n, t, ProxyMode::Doeblin).unwrap();
            let b = mcdiarmid_bound(&req, proxy).unwrap();
            prop_assert!((0.0..=2.0).contains(&b));
            let larger_t = BoundRequest::new(n, t * 1.5, ProxyMode::Doeblin).unwrap();
            prop_assert!(mcdiarmid_bound(&larger_t, proxy).unwrap() <= b);
            prop_assert!(mcdiarmid_bound(&req, proxy * 0.5).unwrap() <= b);
            if b < 2.0 && b > 1e-300 {
                prop_assert!(mcdiarmid_bound(&larger_t, proxy).unwrap() < b);
                prop_assert!(mcdiarmid_bound(&req, proxy * 2.0).unwrap() > b);
            }
        }
    }
}
