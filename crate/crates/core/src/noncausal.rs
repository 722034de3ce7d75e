//! Non-causal transport cost between two initializations of one chain.
//!
//! With the discrete metric and a single kernel, the unconstrained optimum is
//! the maximal-coupling series `Σ_k β^k ‖P^k(x₀, ·) − P^k(x₀', ·)‖_TV`.

use crate::chain::{doeblin_coefficient, structure_flags, tv_unchecked, TransitionKernel};
use crate::error::{Error, Result};

/// A truncated series with a certified bound on the omitted tail: the exact
/// sum lies in `[value, value + tail_bound]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesResult {
    pub value: f64,
    pub terms_used: usize,
    pub tail_bound: f64,
}

/// Smallest `m ∈ {1, 2, 4, …, n²}` with `δ(P^m) < 1`, with that coefficient.
pub fn contraction_power(p: &TransitionKernel) -> Option<(u64, f64)> {
    let n = p.len() as u64;
    let limit = (n * n).max(1);
    let mut m = 1u64;
    let mut power = p.clone();
    loop {
        let delta = doeblin_coefficient(&power);
        if delta < 1.0 {
            return Some((m, delta));
        }
        if m >= limit {
            return None;
        }
        let next = (m * 2).min(limit);
        power = if next == m * 2 {
            power.compose(&power)
        } else {
            p.power(next)
        };
        m = next;
    }
}

/// Sums the series until the certified tail drops below `tol`.
///
/// The two k-step laws are propagated as row vectors. With
/// `t_K = ‖P^K(x₀, ·) − P^K(x₀', ·)‖_TV` and `δ = δ(P^m) < 1`, every later
/// term satisfies `t_{K+j} ≤ t_K · δ^⌊j/m⌋`, so the omitted tail is at most
/// `β^K · t_K · (1 + β + … + β^{m−1}) / (1 − β^m δ)`.
pub fn noncausal_cost_series(
    p: &TransitionKernel,
    x0: usize,
    x0_prime: usize,
    beta: f64,
    tol: f64,
) -> Result<SeriesResult> {
    let n = p.len();
    for index in [x0, x0_prime] {
        if index >= n {
            return Err(Error::StateOutOfRange { index, n });
        }
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "discount factor {beta} outside (0, 1]"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance {tol} must be positive"
        )));
    }

    let (m, delta) = match contraction_power(p) {
        Some(found) => found,
        None if beta < 1.0 => (1, 1.0),
        None => return Err(Error::NoContraction),
    };
    let block: f64 = (0..m).map(|r| beta.powi(r as i32)).sum();
    let tail_factor = block / (1.0 - beta.powi(m as i32) * delta);

    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    a[x0] = 1.0;
    b[x0_prime] = 1.0;
    let mut value = 0.0;
    let mut discount = 1.0;
    let mut terms = 0usize;
    let mut current = tv_unchecked(&a, &b);
    loop {
        value += discount * current;
        terms += 1;
        discount *= beta;
        a = p.push_forward(&a);
        b = p.push_forward(&b);
        current = tv_unchecked(&a, &b);
        let tail_bound = discount * current * tail_factor;
        if tail_bound < tol {
            return Ok(SeriesResult {
                value,
                terms_used: terms,
                tail_bound,
            });
        }
    }
}

/// Closed-form expressions for a two-state chain, evaluated at the pair `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStateClosedForms {
    /// `|P(0,1) − P(1,0)| / (P(0,1) + P(1,0)) · 1 / (1 − TV)`, the published
    /// non-causal expression. See [`W_FORMULA_CAVEAT`].
    pub w_formula: f64,
    /// `1 / (1 − TV)` with `TV = ‖P(0, ·) − P(1, ·)‖_TV`.
    pub w_bc_formula: f64,
    /// Always set: `w_formula` disagrees with the maximal-coupling series.
    pub w_formula_caveat: bool,
}

/// Explanation attached to every reported `w_formula` value.
pub const W_FORMULA_CAVEAT: &str = "the published two-state non-causal formula does not match \
the maximal-coupling series (it vanishes for symmetric kernels, although any coupling of two \
distinct starting states pays at least 1 at time 0); the series value is the one used for bounds";

pub fn two_state_closed_forms(p: &TransitionKernel) -> Result<TwoStateClosedForms> {
    if p.len() != 2 {
        return Err(Error::NotTwoState { n: p.len() });
    }
    if !structure_flags(p).irreducible {
        return Err(Error::NotIrreducible);
    }
    let (up, down) = (p.get(0, 1), p.get(1, 0));
    let tv = tv_unchecked(p.row(0), p.row(1));
    let w_bc_formula = 1.0 / (1.0 - tv);
    Ok(TwoStateClosedForms {
        w_formula: (up - down).abs() / (up + down) * w_bc_formula,
        w_bc_formula,
        w_formula_caveat: true,
    })
}
