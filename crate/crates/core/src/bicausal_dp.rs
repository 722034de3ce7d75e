//! Dynamic programming for bicausal transport between two Markov chains.
//!
//! The pair process `(X, X')` lives on `S × S`. At pair `(x, x')` an action
//! is a transport plan between the next-step laws `P(x, ·)` and `P'(x', ·)`.
//! The Bellman operator is
//!
//! ```text
//! T(V)(x, x') = c(x, x') + β · min_{a ∈ U(x, x')} Σ a(y, y') V(y, y')
//! ```
//!
//! and value iteration from `V₀ = 0` converges to the bicausal cost `W_bc`:
//! geometrically when `β < 1`, monotonically from below when `β = 1`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::chain::TransitionKernel;
use crate::error::{Error, Result};
use crate::exact_ot::{extended_dot, marginal_error, solve_rows, CostTable, TransportPlan};

/// Default residual tolerance for value iteration and fixed-point checks.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Default iteration cap for the undiscounted regime.
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Multiplier in the divergence ceiling `n² · ‖c‖∞ · DIVERGENCE_THRESHOLD`.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

/// Marginal tolerance used when a coupling is checked before use.
pub const COUPLING_TOL: f64 = 1e-9;

/// Largest pair space solved by dense LU in [`evaluate_policy`].
pub const DENSE_POLICY_LIMIT: usize = 4096;

/// A full bicausal transport instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    p: TransitionKernel,
    p_prime: TransitionKernel,
    x0: usize,
    x0_prime: usize,
    stage_cost: CostTable,
    beta: f64,
}

impl ProblemSpec {
    pub fn new(
        p: TransitionKernel,
        p_prime: TransitionKernel,
        x0: usize,
        x0_prime: usize,
        stage_cost: CostTable,
        beta: f64,
    ) -> Result<Self> {
        let n = p.len();
        for found in [p_prime.len(), stage_cost.len()] {
            if found != n {
                return Err(Error::DimensionMismatch { expected: n, found });
            }
        }
        for index in [x0, x0_prime] {
            if index >= n {
                return Err(Error::StateOutOfRange { index, n });
            }
        }
        if stage_cost.entries().iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "stage cost must be finite".to_string(),
            ));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "discount factor {beta} outside (0, 1]"
            )));
        }
        Ok(Self {
            p,
            p_prime,
            x0,
            x0_prime,
            stage_cost,
            beta,
        })
    }

    /// `P = P'`, discrete-metric cost and `β = 1`: the expected coupling time problem.
    pub fn coupling_time(p: TransitionKernel, x0: usize, x0_prime: usize) -> Result<Self> {
        let n = p.len();
        Self::new(
            p.clone(),
            p,
            x0,
            x0_prime,
            CostTable::discrete_metric(n),
            1.0,
        )
    }

    /// Same-kernel instance with discrete-metric cost and an arbitrary discount.
    pub fn discrete(p: TransitionKernel, x0: usize, x0_prime: usize, beta: f64) -> Result<Self> {
        let n = p.len();
        Self::new(
            p.clone(),
            p,
            x0,
            x0_prime,
            CostTable::discrete_metric(n),
            beta,
        )
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &TransitionKernel {
        &self.p
    }

    pub fn p_prime(&self) -> &TransitionKernel {
        &self.p_prime
    }

    pub fn x0(&self) -> usize {
        self.x0
    }

    pub fn x0_prime(&self) -> usize {
        self.x0_prime
    }

    pub fn stage_cost(&self) -> &CostTable {
        &self.stage_cost
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn regime(&self) -> Regime {
        if self.beta < 1.0 {
            Regime::Discounted
        } else {
            Regime::Undiscounted
        }
    }

    pub fn same_kernel(&self) -> bool {
        self.p == self.p_prime
    }

    pub fn has_discrete_cost(&self) -> bool {
        self.stage_cost == CostTable::discrete_metric(self.n())
    }

    pub fn is_coupling_time_instance(&self) -> bool {
        self.beta == 1.0 && self.same_kernel() && self.has_discrete_cost()
    }

    /// `n² · ‖c‖∞ · DIVERGENCE_THRESHOLD`.
    pub fn divergence_ceiling(&self) -> f64 {
        let n = self.n() as f64;
        let c_max = self
            .stage_cost
            .entries()
            .iter()
            .fold(0.0f64, |m, &c| m.max(c));
        n * n * c_max * DIVERGENCE_THRESHOLD
    }
}

/// Extended nonnegative values indexed by state pairs `(x, x')`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    n: usize,
    values: Vec<f64>,
}

impl ValueTable {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            values: vec![0.0; n * n],
        }
    }

    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: values.len(),
            });
        }
        if let Some((i, &v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| v.is_nan() || **v < 0.0)
        {
            return Err(Error::NegativeEntry {
                row: i / n,
                col: i % n,
                value: v,
            });
        }
        Ok(Self { n, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let table = CostTable::from_rows(rows)?;
        Self::new(table.len(), table.entries().to_vec())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, x: usize, x_prime: usize) -> f64 {
        self.values[x * self.n + x_prime]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.values
            .chunks_exact(self.n)
            .map(<[f64]>::to_vec)
            .collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v))
    }

    /// `‖self − other‖∞`, counting two infinite entries as equal.
    pub fn sup_distance(&self, other: &ValueTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| extended_abs_diff(a, b))
            .fold(0.0f64, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// The table reinterpreted as a transport cost on `S × S`.
    pub fn as_cost(&self) -> CostTable {
        CostTable::new(self.n, self.values.clone()).expect("value tables are nonnegative")
    }
}

fn extended_abs_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs()
    }
}

/// A Markovian coupling: one transport plan per state pair, with marginals
/// `P(x, ·)` and `P'(x', ·)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingKernel {
    n: usize,
    plans: Vec<TransportPlan>,
}

impl CouplingKernel {
    /// `plans[x * n + x']` is the plan used at pair `(x, x')`.
    pub fn new(plans: Vec<TransportPlan>) -> Result<Self> {
        let n = (plans.len() as f64).sqrt().round() as usize;
        if n * n != plans.len() || n == 0 {
            return Err(Error::InvalidArgument(format!(
                "{} plans do not form a square pair space",
                plans.len()
            )));
        }
        if let Some(bad) = plans.iter().find(|plan| plan.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        Ok(Self { n, plans })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn plan(&self, x: usize, x_prime: usize) -> &TransportPlan {
        &self.plans[x * self.n + x_prime]
    }

    pub fn plans(&self) -> &[TransportPlan] {
        &self.plans
    }

    /// Transition probability `Q((x, x'), (y, y'))` of the pair chain.
    pub fn prob(&self, from: (usize, usize), to: (usize, usize)) -> f64 {
        self.plan(from.0, from.1).mass(to.0, to.1)
    }

    /// Checks every plan against the rows of `p` and `p_prime`.
    pub fn check_against(
        &self,
        p: &TransitionKernel,
        p_prime: &TransitionKernel,
        tol: f64,
    ) -> Result<()> {
        let n = self.n;
        if p.len() != n || p_prime.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: p.len(),
            });
        }
        for x in 0..n {
            for x2 in 0..n {
                let err = marginal_error(n, self.plan(x, x2).masses(), p.row(x), p_prime.row(x2));
                if err > tol || err.is_nan() {
                    return Err(Error::InvalidCoupling {
                        x,
                        x_prime: x2,
                        reason: format!("marginal or sign violation {err:e} exceeds {tol:e}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Whether pairs on the diagonal only move to the diagonal.
    pub fn keeps_diagonal(&self, tol: f64) -> bool {
        let n = self.n;
        (0..n).all(|x| {
            let plan = self.plan(x, x);
            (0..n).all(|y| (0..n).all(|y2| y == y2 || plan.mass(y, y2) <= tol))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Discounted,
    Undiscounted,
}

/// Outcome of [`value_iterate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub value_table: ValueTable,
    pub iterations: usize,
    /// Sup-norm of the last Bellman update.
    pub residual: f64,
    pub converged: bool,
    pub regime: Regime,
    /// Pairs whose value crossed the divergence ceiling.
    pub infinite_flags: Vec<(usize, usize)>,
}

impl SolveReport {
    /// `W_bc(x0, x0')` for the spec that produced this report.
    pub fn value_at(&self, x: usize, x_prime: usize) -> f64 {
        self.value_table.get(x, x_prime)
    }
}

fn check_table(v: &ValueTable, spec: &ProblemSpec) -> Result<()> {
    if v.n() != spec.n() {
        return Err(Error::DimensionMismatch {
            expected: spec.n(),
            found: v.n(),
        });
    }
    Ok(())
}

fn pairs(n: usize) -> impl IndexedParallelIterator<Item = (usize, usize)> {
    (0..n * n).into_par_iter().map(move |i| (i / n, i % n))
}

fn bellman_unchecked(v: &ValueTable, spec: &ProblemSpec) -> ValueTable {
    let n = spec.n();
    let values = pairs(n)
        .map(|(x, x2)| {
            let (inner, _) = solve_rows(spec.p.row(x), spec.p_prime.row(x2), &v.values);
            spec.stage_cost.get(x, x2) + spec.beta * inner
        })
        .collect();
    ValueTable { n, values }
}

/// One Jacobi sweep of the Bellman operator.
pub fn apply_bellman(v: &ValueTable, spec: &ProblemSpec) -> Result<ValueTable> {
    check_table(v, spec)?;
    Ok(bellman_unchecked(v, spec))
}

/// `T_Q(V) = c + β · Q V` for a fixed coupling `Q`.
pub fn apply_policy_operator(
    v: &ValueTable,
    q: &CouplingKernel,
    spec: &ProblemSpec,
) -> Result<ValueTable> {
    check_table(v, spec)?;
    q.check_against(&spec.p, &spec.p_prime, COUPLING_TOL)?;
    Ok(policy_unchecked(v, q, spec))
}

fn policy_unchecked(v: &ValueTable, q: &CouplingKernel, spec: &ProblemSpec) -> ValueTable {
    let n = spec.n();
    let values = pairs(n)
        .map(|(x, x2)| {
            let expected = extended_dot(q.plan(x, x2).masses(), &v.values);
            spec.stage_cost.get(x, x2) + spec.beta * expected
        })
        .collect();
    ValueTable { n, values }
}

/// Iterator over `V₁ = T(0), V₂ = T(V₁), ...`.
pub struct ValueIteration<'a> {
    spec: &'a ProblemSpec,
    current: ValueTable,
}

impl<'a> ValueIteration<'a> {
    pub fn new(spec: &'a ProblemSpec) -> Self {
        Self {
            spec,
            current: ValueTable::zeros(spec.n()),
        }
    }
}

impl Iterator for ValueIteration<'_> {
    type Item = ValueTable;

    fn next(&mut self) -> Option<ValueTable> {
        self.current = bellman_unchecked(&self.current, self.spec);
        Some(self.current.clone())
    }
}

/// Value iteration from the zero table.
///
/// With `β < 1` the loop stops once the update is at most `tol · (1 − β) / β`,
/// which bounds the distance to `W_bc` by `tol`. With `β = 1` it stops when the
/// update is at most `tol`, when `max_iter` is reached, or when some entry
/// crosses the divergence ceiling.
pub fn value_iterate(spec: &ProblemSpec, tol: f64, max_iter: usize) -> Result<SolveReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance {tol} must be positive"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument(
            "max_iter must be at least 1".to_string(),
        ));
    }
    let regime = spec.regime();
    let stop_at = match regime {
        Regime::Discounted => tol * (1.0 - spec.beta) / spec.beta,
        Regime::Undiscounted => tol,
    };
    let ceiling = spec.divergence_ceiling();

    let mut current = ValueTable::zeros(spec.n());
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let next = bellman_unchecked(&current, spec);
        residual = next.sup_distance(&current);
        current = next;
        iterations += 1;
        if residual <= stop_at {
            converged = true;
            break;
        }
        if regime == Regime::Undiscounted && current.values.iter().any(|&v| v > ceiling) {
            break;
        }
    }

    let n = spec.n();
    let infinite_flags = match regime {
        Regime::Discounted => Vec::new(),
        Regime::Undiscounted => (0..n * n)
            .filter(|&i| current.values[i] > ceiling)
            .map(|i| (i / n, i % n))
            .collect(),
    };
    Ok(SolveReport {
        value_table: current,
        iterations,
        residual,
        converged,
        regime,
        infinite_flags,
    })
}

/// Greedy coupling: at each pair, the optimal plan for the inner problem with
/// cost `V`. Pairs where `V` is infinite get the independent plan.
pub fn extract_greedy_coupling(v: &ValueTable, spec: &ProblemSpec) -> Result<CouplingKernel> {
    check_table(v, spec)?;
    let n = spec.n();
    let plans = pairs(n)
        .map(|(x, x2)| {
            let p = spec.p.row_distribution(x);
            let q = spec.p_prime.row_distribution(x2);
            if v.get(x, x2).is_infinite() {
                return TransportPlan::independent(&p, &q);
            }
            let (_, mass) = solve_rows(p.probs(), q.probs(), &v.values);
            TransportPlan::from_parts(mass, p, q).expect("dimensions match")
        })
        .collect();
    CouplingKernel::new(plans)
}

/// Result of [`verify_fixed_point`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointReport {
    /// `‖T(V) − V‖∞`.
    pub residual: f64,
    pub is_fixed_point: bool,
    /// Zero diagonal; only checked on coupling-time instances.
    pub diagonal_ok: Option<bool>,
    /// All entries finite; only checked on coupling-time instances.
    pub finite_ok: Option<bool>,
}

impl FixedPointReport {
    pub fn all_ok(&self) -> bool {
        self.is_fixed_point && self.diagonal_ok != Some(false) && self.finite_ok != Some(false)
    }
}

pub fn verify_fixed_point(
    v: &ValueTable,
    spec: &ProblemSpec,
    tol: f64,
) -> Result<FixedPointReport> {
    check_table(v, spec)?;
    let residual = bellman_unchecked(v, spec).sup_distance(v);
    let (diagonal_ok, finite_ok) = if spec.is_coupling_time_instance() {
        let n = spec.n();
        (
            Some((0..n).all(|x| v.get(x, x).abs() <= tol)),
            Some(v.is_finite()),
        )
    } else {
        (None, None)
    };
    Ok(FixedPointReport {
        residual,
        is_fixed_point: residual <= tol,
        diagonal_ok,
        finite_ok,
    })
}

/// `Q` is optimal iff `T_Q(V) = V` at the optimal value table `V`.
pub fn verify_optimal_coupling(
    q: &CouplingKernel,
    v: &ValueTable,
    spec: &ProblemSpec,
    tol: f64,
) -> Result<bool> {
    let tq = apply_policy_operator(v, q, spec)?;
    Ok(tq.sup_distance(v) <= tol)
}

/// Expected discounted cost of following the coupling `Q` from every pair.
pub fn evaluate_policy(q: &CouplingKernel, spec: &ProblemSpec) -> Result<ValueTable> {
    q.check_against(&spec.p, &spec.p_prime, COUPLING_TOL)?;
    let n = spec.n();
    let c = spec.stage_cost.entries();
    if c.iter().all(|&v| v == 0.0) {
        return Ok(ValueTable::zeros(n));
    }
    match spec.regime() {
        Regime::Discounted => Ok(discounted_policy_value(q, spec)),
        Regime::Undiscounted if spec.has_discrete_cost() && q.keeps_diagonal(1e-12) => {
            hitting_time_value(q, n)
        }
        Regime::Undiscounted => Ok(partial_sum_value(q, spec)),
    }
}

fn pair_matrix(q: &CouplingKernel, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    let n = q.n();
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| {
        let (x, x2) = (rows[r] / n, rows[r] % n);
        let (y, y2) = (cols[c] / n, cols[c] % n);
        q.prob((x, x2), (y, y2))
    })
}

fn discounted_policy_value(q: &CouplingKernel, spec: &ProblemSpec) -> ValueTable {
    let n = spec.n();
    let size = n * n;
    let c = spec.stage_cost.entries();
    if size <= DENSE_POLICY_LIMIT {
        let all: Vec<usize> = (0..size).collect();
        let a = DMatrix::identity(size, size) - pair_matrix(q, &all, &all) * spec.beta;
        let b = DVector::from_column_slice(c);
        // I − βQ is strictly diagonally dominant, so LU cannot fail here
        if let Some(x) = a.lu().solve(&b) {
            let values = x.iter().map(|v| v.max(0.0)).collect();
            return ValueTable { n, values };
        }
    }
    let mut v = ValueTable::zeros(n);
    let limit = 1e-13 * (1.0 + c.iter().fold(0.0f64, |m, &x| m.max(x))) * (1.0 - spec.beta);
    for _ in 0..DEFAULT_MAX_ITER {
        let next = policy_unchecked(&v, q, spec);
        let delta = next.sup_distance(&v);
        v = next;
        if delta <= limit {
            break;
        }
    }
    v
}

/// Expected hitting time of the diagonal under a diagonal-preserving coupling.
fn hitting_time_value(q: &CouplingKernel, n: usize) -> Result<ValueTable> {
    let size = n * n;
    let on_diag = |i: usize| i / n == i % n;

    // reverse reachability to the diagonal
    let mut predecessors: Vec<Vec<usize>> = vec![Vec::new(); size];
    for i in 0..size {
        for (j, &m) in q.plans[i].masses().iter().enumerate() {
            if m > 0.0 {
                predecessors[j].push(i);
            }
        }
    }
    let mut reaches = vec![false; size];
    let mut stack: Vec<usize> = (0..size).filter(|&i| on_diag(i)).collect();
    for &i in &stack {
        reaches[i] = true;
    }
    while let Some(j) = stack.pop() {
        for &i in &predecessors[j] {
            if !reaches[i] {
                reaches[i] = true;
                stack.push(i);
            }
        }
    }
    // anything that can reach a non-absorbing pair with positive probability
    // has infinite expected hitting time
    let mut infinite = vec![false; size];
    let mut stack: Vec<usize> = (0..size).filter(|&i| !reaches[i]).collect();
    for &i in &stack {
        infinite[i] = true;
    }
    while let Some(j) = stack.pop() {
        for &i in &predecessors[j] {
            if !infinite[i] && !on_diag(i) {
                infinite[i] = true;
                stack.push(i);
            }
        }
    }

    let transient: Vec<usize> = (0..size).filter(|&i| !on_diag(i) && !infinite[i]).collect();
    let mut values = vec![0.0; size];
    for i in 0..size {
        if infinite[i] {
            values[i] = f64::INFINITY;
        }
    }
    if !transient.is_empty() {
        let m = transient.len();
        let x = if size <= DENSE_POLICY_LIMIT {
            let a = DMatrix::identity(m, m) - pair_matrix(q, &transient, &transient);
            let b = DVector::from_element(m, 1.0);
            let x = a.lu().solve(&b).ok_or(Error::SingularSystem)?;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::SingularSystem);
            }
            x.iter().copied().collect::<Vec<_>>()
        } else {
            iterate_hitting_times(q, &transient, size)
        };
        for (&i, &v) in transient.iter().zip(&x) {
            values[i] = v;
        }
    }
    Ok(ValueTable { n, values })
}

fn iterate_hitting_times(q: &CouplingKernel, transient: &[usize], size: usize) -> Vec<f64> {
    let mut full = vec![0.0; size];
    for _ in 0..DEFAULT_MAX_ITER {
        let mut delta: f64 = 0.0;
        let next: Vec<f64> = transient
            .iter()
            .map(|&i| 1.0 + extended_dot(q.plans[i].masses(), &full))
            .collect();
        for (&i, &v) in transient.iter().zip(&next) {
            delta = delta.max((v - full[i]).abs());
            full[i] = v;
        }
        if delta <= 1e-12 {
            break;
        }
    }
    transient.iter().map(|&i| full[i]).collect()
}

/// Partial sums `Σ_{k<K} Q^k c` for the undiscounted general case. Entries
/// over the divergence ceiling, or still growing when the cap is reached,
/// are reported as infinite.
fn partial_sum_value(q: &CouplingKernel, spec: &ProblemSpec) -> ValueTable {
    let n = spec.n();
    let ceiling = spec.divergence_ceiling();
    let mut v = ValueTable::zeros(n);
    let mut growing = vec![true; n * n];
    for _ in 0..DEFAULT_MAX_ITER {
        let next = policy_unchecked(&v, q, spec);
        let mut delta: f64 = 0.0;
        for ((g, &new), &old) in growing.iter_mut().zip(&next.values).zip(&v.values) {
            let d = extended_abs_diff(new, old);
            *g = d > DEFAULT_TOL;
            delta = delta.max(d);
        }
        v = next;
        if delta <= DEFAULT_TOL || v.values.iter().any(|&x| x > ceiling) {
            break;
        }
    }
    for (value, &g) in v.values.iter_mut().zip(&growing) {
        if g || *value > ceiling {
            *value = f64::INFINITY;
        }
    }
    v
}
