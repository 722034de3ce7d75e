//! The classic, independent and Wasserstein Markovian couplings, plus the
//! membership and stickiness checks.

use crate::bicausal_dp::CouplingKernel;
use crate::chain::{tv_unchecked, Distribution, TransitionKernel};
use crate::exact_ot::{marginal_error, TransportPlan};

/// Total variation below this counts as zero in the Wasserstein construction.
const TV_ZERO: f64 = 1e-15;

fn build(
    p: &TransitionKernel,
    p_prime: &TransitionKernel,
    mut plan_at: impl FnMut(usize, usize, &[f64], &[f64]) -> Vec<f64>,
) -> CouplingKernel {
    let n = p.len();
    assert_eq!(n, p_prime.len(), "kernels must share a state space");
    let mut plans = Vec::with_capacity(n * n);
    for x in 0..n {
        for x2 in 0..n {
            let (a, b) = (p.row(x), p_prime.row(x2));
            let mass = plan_at(x, x2, a, b);
            let plan = TransportPlan::from_parts(
                mass,
                Distribution::from_raw(a.to_vec()),
                Distribution::from_raw(b.to_vec()),
            )
            .expect("plan dimensions match the kernels");
            plans.push(plan);
        }
    }
    CouplingKernel::new(plans).expect("n² plans")
}

fn product(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter()
        .flat_map(|&u| b.iter().map(move |&v| u * v))
        .collect()
}

fn diagonal(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut mass = vec![0.0; n * n];
    for (y, &w) in a.iter().enumerate() {
        mass[y * n + y] = w;
    }
    mass
}

/// Doeblin's coupling: independent moves until the chains meet, identical moves afterwards.
pub fn classic_coupling(p: &TransitionKernel) -> CouplingKernel {
    build(
        p,
        p,
        |x, x2, a, b| {
            if x == x2 {
                diagonal(a)
            } else {
                product(a, b)
            }
        },
    )
}

/// Both chains move independently at every step.
pub fn independent_coupling(p: &TransitionKernel, p_prime: &TransitionKernel) -> CouplingKernel {
    build(p, p_prime, |_, _, a, b| product(a, b))
}

/// Maximal one-step agreement, then conditionally independent moves.
///
/// At pair `(x, x')` with rows `a = P(x, ·)` and `b = P'(x', ·)`, the plan puts
/// `a(y) ∧ b(y)` on each diagonal cell `(y, y)` and
/// `(a(y) − b(y))⁺ (b(y') − a(y'))⁺ / ‖a − b‖_TV` on the off-diagonal cells.
/// When the two rows coincide the plan is the diagonal copy of `a`, which
/// covers the `x = x'` branch of a single kernel.
pub fn wasserstein_coupling(p: &TransitionKernel, p_prime: &TransitionKernel) -> CouplingKernel {
    build(p, p_prime, |_, _, a, b| {
        let n = a.len();
        let tv = tv_unchecked(a, b);
        let mut mass = vec![0.0; n * n];
        for y in 0..n {
            mass[y * n + y] = a[y].min(b[y]);
        }
        if tv > TV_ZERO {
            for y in 0..n {
                let excess = (a[y] - b[y]).max(0.0);
                if excess == 0.0 {
                    continue;
                }
                for y2 in 0..n {
                    let deficit = (b[y2] - a[y2]).max(0.0);
                    if y2 != y && deficit > 0.0 {
                        mass[y * n + y2] = excess * deficit / tv;
                    }
                }
            }
        }
        mass
    })
}

/// Whether every plan of `q` has marginals `(P(x, ·), P'(x', ·))` and no
/// entry below `−tol`.
pub fn validate_coupling(
    q: &CouplingKernel,
    p: &TransitionKernel,
    p_prime: &TransitionKernel,
    tol: f64,
) -> bool {
    let n = q.n();
    if p.len() != n || p_prime.len() != n {
        return false;
    }
    (0..n).all(|x| {
        (0..n).all(|x2| {
            let err = marginal_error(n, q.plan(x, x2).masses(), p.row(x), p_prime.row(x2));
            err <= tol
        })
    })
}

/// Whether `q` moves pairs on the diagonal identically:
/// `Q((x, x), (y, y')) = 1{y = y'} P(x, y)`.
pub fn check_sticky(q: &CouplingKernel, p: &TransitionKernel, tol: f64) -> bool {
    let n = q.n();
    if p.len() != n {
        return false;
    }
    (0..n).all(|x| {
        let plan = q.plan(x, x);
        (0..n).all(|y| {
            (0..n).all(|y2| {
                let expected = if y == y2 { p.get(x, y) } else { 0.0 };
                (plan.mass(y, y2) - expected).abs() <= tol
            })
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{tv_distance, validate_kernel};
    use crate::exact_ot::{solve_transport, CostTable};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn worked() -> TransitionKernel {
        validate_kernel(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
    }

    #[test]
    fn classic_examples() {
        let q = classic_coupling(&worked());
        assert_abs_diff_eq!(q.prob((0, 1), (0, 0)), 0.18, epsilon = 1e-15);
        assert_eq!(q.prob((0, 0), (0, 1)), 0.0);
        assert_eq!(q.prob((1, 1), (1, 1)), 0.8);
        assert!(validate_coupling(&q, &worked(), &worked(), 1e-12));
        assert!(check_sticky(&q, &worked(), 1e-12));
    }

    #[test]
    fn independent_examples() {
        let k = worked();
        let q = independent_coupling(&k, &k);
        assert_abs_diff_eq!(q.prob((0, 1), (1, 1)), 0.08, epsilon = 1e-15);
        assert!(validate_coupling(&q, &k, &k, 1e-12));
        assert!(!check_sticky(&q, &k, 1e-9));

        let det = validate_kernel(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let q = independent_coupling(&det, &det);
        assert_eq!(q.prob((0, 1), (1, 0)), 1.0);
        assert!(check_sticky(&q, &det, 1e-12));
    }

    #[test]
    fn wasserstein_worked_pair() {
        let k = worked();
        let q = wasserstein_coupling(&k, &k);
        assert_abs_diff_eq!(q.prob((0, 1), (0, 0)), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(q.prob((0, 1), (1, 1)), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(q.prob((0, 1), (0, 1)), 0.7, epsilon = 1e-15);
        assert_eq!(q.prob((0, 1), (1, 0)), 0.0);
        assert!(check_sticky(&q, &k, 1e-15));
    }

    #[test]
    fn wasserstein_equal_rows_stay_on_diagonal() {
        let k = validate_kernel(&[
            vec![0.3, 0.7, 0.0],
            vec![0.3, 0.7, 0.0],
            vec![0.0, 0.5, 0.5],
        ])
        .unwrap();
        let plan = wasserstein_coupling(&k, &k);
        let plan = plan.plan(0, 1);
        assert_eq!(plan.diagonal_mass(), 1.0);
    }

    #[test]
    fn wasserstein_distinct_kernels_on_diagonal_start() {
        let p = worked();
        let p_prime = validate_kernel(&[vec![0.5, 0.5], vec![0.2, 0.8]]).unwrap();
        let q = wasserstein_coupling(&p, &p_prime);
        assert!(validate_coupling(&q, &p, &p_prime, 1e-12));
        // rows differ at x = x' = 0, so the off-diagonal branch applies
        assert_abs_diff_eq!(q.prob((0, 0), (0, 1)), 0.4, epsilon = 1e-15);
        // rows agree at x = x' = 1
        assert_eq!(q.prob((1, 1), (1, 1)), 0.8);
    }

    #[test]
    fn perturbed_cell_fails_validation() {
        let k = worked();
        let q = classic_coupling(&k);
        let mut plans = q.plans().to_vec();
        let p0 = &plans[1];
        let mut mass = p0.masses().to_vec();
        mass[0] += 1e-3;
        plans[1] =
            TransportPlan::from_parts(mass, p0.row_marginal().clone(), p0.col_marginal().clone())
                .unwrap();
        let bad = CouplingKernel::new(plans).unwrap();
        assert!(!validate_coupling(&bad, &k, &k, 1e-9));
    }

    fn arb_kernel(n: usize) -> impl Strategy<Value = TransitionKernel> {
        prop::collection::vec(prop::collection::vec(0.0f64..1.0, n), n).prop_map(|rows| {
            let rows: Vec<Vec<f64>> = rows
                .into_iter()
                .map(|r| {
                    let r: Vec<f64> = r
                        .into_iter()
                        .map(|x| if x < 0.2 { 0.0 } else { x })
                        .collect();
                    let s: f64 = r.iter().sum();
                    if s == 0.0 {
                        let mut e = vec![0.0; r.len()];
                        e[0] = 1.0;
                        e
                    } else {
                        r.into_iter().map(|x| x / s).collect()
                    }
                })
                .collect();
            validate_kernel(&rows).unwrap()
        })
    }

    proptest! {
        #[test]
        fn constructors_are_couplings(p in arb_kernel(4), p_prime in arb_kernel(4)) {
            prop_assert!(validate_coupling(&classic_coupling(&p), &p, &p, 1e-12));
            prop_assert!(validate_coupling(&independent_coupling(&p, &p_prime), &p, &p_prime, 1e-12));
            prop_assert!(validate_coupling(&wasserstein_coupling(&p, &p_prime), &p, &p_prime, 1e-12));
            prop_assert!(check_sticky(&classic_coupling(&p), &p, 1e-15));
            prop_assert!(check_sticky(&wasserstein_coupling(&p, &p), &p, 1e-15));
        }

        #[test]
        fn wasserstein_maximizes_agreement(p in arb_kernel(4), p_prime in arb_kernel(4)) {
            let q = wasserstein_coupling(&p, &p_prime);
            let metric = CostTable::discrete_metric(4);
            for x in 0..4 {
                for x2 in 0..4 {
                    let tv = tv_distance(p.row(x), p_prime.row(x2)).unwrap();
                    let agree = q.plan(x, x2).diagonal_mass();
                    prop_assert!((agree - (1.0 - tv)).abs() < 1e-12);
                    let best = solve_transport(
                        &p.row_distribution(x),
                        &p_prime.row_distribution(x2),
                        &metric,
                    ).unwrap();
                    prop_assert!(agree >= 1.0 - best.value - 1e-12);
                }
            }
        }
    }
}
