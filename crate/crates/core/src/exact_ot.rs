//! Exact discrete optimal transport between two distributions on the same
//! finite state space.
//!
//! The solver is a primal network simplex on the complete bipartite
//! transportation graph (rows = source states, columns = target states).
//! A basis is a spanning tree of `2n − 1` cells. The entering cell is the
//! lowest-index cell with a negative reduced cost and the leaving cell is the
//! lowest-index cell among the ratio-test ties (Bland's rule), so the output
//! is deterministic and the method cannot cycle.
//!
//! Costs may be `+∞`. Those are handled lexicographically: phase 1 minimizes
//! the mass sitting on infinite cells; if that mass is zero, phase 2 optimizes
//! the finite costs while only admitting cells whose phase-1 reduced cost is
//! zero, which keeps the infinite cells empty.

use crate::chain::{Distribution, PROB_TOL};
use crate::error::{Error, Result};

/// Mass on infinite cells above this threshold makes the optimal value infinite.
pub const INFINITE_MASS_TOL: f64 = 1e-12;

/// Largest `n` accepted by [`brute_force_transport`].
pub const BRUTE_FORCE_LIMIT: usize = 6;

/// An `n × n` table of nonnegative, possibly infinite, costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    n: usize,
    entries: Vec<f64>,
}

impl CostTable {
    /// Builds a table from a row-major buffer of length `n²`.
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: entries.len(),
            });
        }
        if let Some((i, &v)) = entries
            .iter()
            .enumerate()
            .find(|(_, v)| v.is_nan() || **v < 0.0)
        {
            return Err(Error::NegativeEntry {
                row: i / n.max(1),
                col: i % n.max(1),
                value: v,
            });
        }
        Ok(Self { n, entries })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n {
                return Err(Error::NonSquare {
                    row: i,
                    len: row.len(),
                    expected: n,
                });
            }
            entries.extend_from_slice(row);
        }
        Self::new(n, entries)
    }

    /// Zero on the diagonal, one elsewhere.
    pub fn discrete_metric(n: usize) -> Self {
        let entries = (0..n * n)
            .map(|i| if i / n == i % n { 0.0 } else { 1.0 })
            .collect();
        Self { n, entries }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, y: usize, y_prime: usize) -> f64 {
        self.entries[y * self.n + y_prime]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn finite_mask(&self) -> Vec<bool> {
        self.entries.iter().map(|c| c.is_finite()).collect()
    }
}

/// A joint distribution on `S × S` with prescribed marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    n: usize,
    mass: Vec<f64>,
    row_marginal: Distribution,
    col_marginal: Distribution,
}

impl TransportPlan {
    /// Wraps a row-major mass buffer. The caller is responsible for the
    /// marginal constraints; see [`TransportPlan::marginal_error`].
    pub fn from_parts(
        mass: Vec<f64>,
        row_marginal: Distribution,
        col_marginal: Distribution,
    ) -> Result<Self> {
        let n = row_marginal.len();
        if col_marginal.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: col_marginal.len(),
            });
        }
        if mass.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: mass.len(),
            });
        }
        Ok(Self {
            n,
            mass,
            row_marginal,
            col_marginal,
        })
    }

    /// The product plan `p ⊗ q`.
    pub fn independent(p: &Distribution, q: &Distribution) -> Self {
        let n = p.len();
        let mut mass = Vec::with_capacity(n * n);
        for y in 0..n {
            for y2 in 0..n {
                mass.push(p[y] * q[y2]);
            }
        }
        Self {
            n,
            mass,
            row_marginal: p.clone(),
            col_marginal: q.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn mass(&self, y: usize, y_prime: usize) -> f64 {
        self.mass[y * self.n + y_prime]
    }

    /// Row-major `n²` buffer of cell masses.
    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn row_marginal(&self) -> &Distribution {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &Distribution {
        &self.col_marginal
    }

    /// Mass that lands on the diagonal `{(y, y)}`.
    pub fn diagonal_mass(&self) -> f64 {
        (0..self.n).map(|y| self.mass(y, y)).sum()
    }

    /// Largest violation among the two marginal constraints and nonnegativity.
    pub fn marginal_error(&self) -> f64 {
        marginal_error(
            self.n,
            &self.mass,
            self.row_marginal.probs(),
            self.col_marginal.probs(),
        )
    }

    /// `⟨plan, cost⟩` with the convention `0 · ∞ = 0`.
    pub fn cost(&self, cost: &CostTable) -> f64 {
        extended_dot(&self.mass, cost.entries())
    }
}

pub(crate) fn marginal_error(n: usize, mass: &[f64], rows: &[f64], cols: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for y in 0..n {
        let s: f64 = mass[y * n..(y + 1) * n].iter().sum();
        worst = worst.max((s - rows[y]).abs());
    }
    for y2 in 0..n {
        let s: f64 = (0..n).map(|y| mass[y * n + y2]).sum();
        worst = worst.max((s - cols[y2]).abs());
    }
    for &m in mass {
        worst = worst.max(-m);
    }
    worst
}

pub(crate) fn extended_dot(mass: &[f64], cost: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&m, &c) in mass.iter().zip(cost) {
        if m <= 0.0 {
            continue;
        }
        if c.is_infinite() {
            if m > INFINITE_MASS_TOL {
                return f64::INFINITY;
            }
            continue;
        }
        total += m * c;
    }
    total
}

/// An optimal value together with a plan attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution {
    pub value: f64,
    pub plan: TransportPlan,
}

/// Minimizes `⟨a, cost⟩` over all plans `a` with marginals `(p, q)`.
///
/// Returns `+∞` when every feasible plan must put mass on an infinite cell;
/// the returned plan then minimizes that mass.
pub fn solve_transport(
    p: &Distribution,
    q: &Distribution,
    cost: &CostTable,
) -> Result<TransportSolution> {
    check_dims(p.probs(), q.probs(), cost.len())?;
    let (value, mass) = solve_rows(p.probs(), q.probs(), cost.entries());
    Ok(TransportSolution {
        value,
        plan: TransportPlan {
            n: p.len(),
            mass,
            row_marginal: p.clone(),
            col_marginal: q.clone(),
        },
    })
}

/// Minimum total mass that any plan with marginals `(p, q)` must place on
/// cells where `finite_mask` is false.
pub fn min_infinite_mass(p: &Distribution, q: &Distribution, finite_mask: &[bool]) -> Result<f64> {
    let n = p.len();
    check_dims(p.probs(), q.probs(), n)?;
    if finite_mask.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            found: finite_mask.len(),
        });
    }
    if finite_mask.iter().all(|&f| f) {
        return Ok(0.0);
    }
    let indicator: Vec<f64> = finite_mask
        .iter()
        .map(|&f| if f { 0.0 } else { 1.0 })
        .collect();
    let mut simplex = Simplex::northwest(p.probs(), q.probs());
    simplex.optimize(&indicator, None);
    Ok(simplex.objective(&indicator))
}

fn check_dims(p: &[f64], q: &[f64], n: usize) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    if n != p.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: n,
        });
    }
    let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
    if (sp - sq).abs() > PROB_TOL {
        return Err(Error::InfeasibleMarginals {
            row_total: sp,
            col_total: sq,
        });
    }
    Ok(())
}

/// Core two-phase solve over raw slices. Assumes dimensions were checked.
pub(crate) fn solve_rows(p: &[f64], q: &[f64], cost: &[f64]) -> (f64, Vec<f64>) {
    let mut simplex = Simplex::northwest(p, q);
    let has_infinite = cost.iter().any(|c| c.is_infinite());

    if !has_infinite {
        simplex.optimize(cost, None);
        let value = simplex.objective(cost);
        return (value, simplex.into_flow());
    }

    let indicator: Vec<f64> = cost
        .iter()
        .map(|c| if c.is_infinite() { 1.0 } else { 0.0 })
        .collect();
    simplex.optimize(&indicator, None);
    if simplex.objective(&indicator) > INFINITE_MASS_TOL {
        return (f64::INFINITY, simplex.into_flow());
    }

    // Reduced costs of the indicator objective do not change while pivoting
    // on cells whose reduced cost is zero, so they can be computed once.
    let eligible: Vec<bool> = simplex
        .reduced_costs(&indicator)
        .iter()
        .map(|r| r.abs() < 0.5)
        .collect();
    let finite: Vec<f64> = cost
        .iter()
        .map(|&c| if c.is_finite() { c } else { 0.0 })
        .collect();
    simplex.optimize(&finite, Some(&eligible));
    let value = extended_dot(&simplex.flow, cost);
    (value, simplex.into_flow())
}

/// Transportation simplex state: a spanning-tree basis with its flows.
struct Simplex {
    n: usize,
    flow: Vec<f64>,
    basic: Vec<bool>,
    basis: Vec<usize>,
}

impl Simplex {
    /// North-west corner start. Produces exactly `2n − 1` basic cells forming
    /// a spanning tree, including degenerate zero-flow cells.
    fn northwest(p: &[f64], q: &[f64]) -> Self {
        let n = p.len();
        let mut supply = p.to_vec();
        let mut demand = q.to_vec();
        let mut flow = vec![0.0; n * n];
        let mut basic = vec![false; n * n];
        let mut basis = Vec::with_capacity(2 * n - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let x = supply[i].min(demand[j]).max(0.0);
            let cell = i * n + j;
            flow[cell] = x;
            basic[cell] = true;
            basis.push(cell);
            supply[i] -= x;
            demand[j] -= x;
            if i == n - 1 && j == n - 1 {
                break;
            }
            if i == n - 1 {
                j += 1;
            } else if j == n - 1 || supply[i] <= 0.0 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self {
            n,
            flow,
            basic,
            basis,
        }
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        self.flow.iter().zip(cost).map(|(f, c)| f * c).sum()
    }

    fn into_flow(self) -> Vec<f64> {
        self.flow
    }

    /// Tree adjacency: node `i < n` is row `i`, node `n + j` is column `j`.
    /// Each entry is `(neighbour, cell)`.
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let n = self.n;
        let mut adj = vec![Vec::new(); 2 * n];
        for &cell in &self.basis {
            let (i, j) = (cell / n, cell % n);
            adj[i].push((n + j, cell));
            adj[n + j].push((i, cell));
        }
        adj
    }

    /// Dual potentials `u_i + v_j = c_ij` on basic cells, with `u_0 = 0`.
    fn potentials(&self, cost: &[f64], adj: &[Vec<(usize, usize)>]) -> Vec<f64> {
        let n = self.n;
        let mut pot = vec![f64::NAN; 2 * n];
        pot[0] = 0.0;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            for &(next, cell) in &adj[node] {
                if pot[next].is_nan() {
                    pot[next] = cost[cell] - pot[node];
                    stack.push(next);
                }
            }
        }
        pot
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let n = self.n;
        let adj = self.adjacency();
        let pot = self.potentials(cost, &adj);
        (0..n * n)
            .map(|cell| cost[cell] - pot[cell / n] - pot[n + cell % n])
            .collect()
    }

    /// Runs Bland-rule pivots until no admissible cell has a negative reduced cost.
    fn optimize(&mut self, cost: &[f64], eligible: Option<&[bool]>) {
        let n = self.n;
        let scale = cost.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        let eps = 1e-11 * scale;
        let max_pivots = 10_000 + 100 * n * n * n;

        for _ in 0..max_pivots {
            let adj = self.adjacency();
            let pot = self.potentials(cost, &adj);
            let entering = (0..n * n).find(|&cell| {
                !self.basic[cell]
                    && eligible.is_none_or(|e| e[cell])
                    && cost[cell] - pot[cell / n] - pot[n + cell % n] < -eps
            });
            let Some(entering) = entering else {
                return;
            };
            self.pivot(entering, &adj);
        }
        log::warn!("transport simplex hit its pivot cap ({max_pivots}); returning current basis");
    }

    fn pivot(&mut self, entering: usize, adj: &[Vec<(usize, usize)>]) {
        let n = self.n;
        let (row, col) = (entering / n, n + entering % n);

        // tree path from the entering column back to the entering row
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; 2 * n];
        let mut seen = vec![false; 2 * n];
        seen[col] = true;
        let mut stack = vec![col];
        while let Some(node) = stack.pop() {
            if node == row {
                break;
            }
            for &(next, cell) in &adj[node] {
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some((node, cell));
                    stack.push(next);
                }
            }
        }
        // walk row -> col, then reverse so cells run from the column side
        let mut path = Vec::new();
        let mut node = row;
        while node != col {
            let (prev, cell) = parent[node].expect("basis is a spanning tree");
            path.push(cell);
            node = prev;
        }
        path.reverse();

        // path[0] touches the entering column and loses mass; signs alternate
        let mut leaving = usize::MAX;
        let mut theta = f64::INFINITY;
        for &cell in path.iter().step_by(2) {
            let f = self.flow[cell];
            if f < theta || (f == theta && cell < leaving) {
                theta = f;
                leaving = cell;
            }
        }
        let theta = theta.max(0.0);
        for (k, &cell) in path.iter().enumerate() {
            if k % 2 == 0 {
                self.flow[cell] = (self.flow[cell] - theta).max(0.0);
            } else {
                self.flow[cell] += theta;
            }
        }
        self.flow[entering] = theta;
        self.flow[leaving] = 0.0;
        self.basic[leaving] = false;
        self.basic[entering] = true;
        let slot = self
            .basis
            .iter()
            .position(|&c| c == leaving)
            .expect("leaving cell is basic");
        self.basis[slot] = entering;
    }
}

/// Minimum objective over every basic feasible solution of the transportation
/// polytope, found by enumerating all spanning trees of the bipartite graph.
///
/// Exponential in `n`; intended as a test oracle for [`solve_transport`].
pub fn brute_force_transport(p: &Distribution, q: &Distribution, cost: &CostTable) -> Result<f64> {
    let n = p.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    check_dims(p.probs(), q.probs(), cost.len())?;
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(2 * n - 1);
    let parent: Vec<usize> = (0..2 * n).collect();
    enumerate_trees(n, 0, &mut chosen, parent, &mut |tree| {
        if let Some(flow) = tree_flow(n, tree, p.probs(), q.probs()) {
            best = best.min(extended_dot(&flow, cost.entries()));
        }
    });
    Ok(best)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn enumerate_trees(
    n: usize,
    next_cell: usize,
    chosen: &mut Vec<usize>,
    parent: Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    let needed = 2 * n - 1;
    if chosen.len() == needed {
        visit(chosen);
        return;
    }
    if n * n - next_cell < needed - chosen.len() {
        return;
    }
    let cell = next_cell;
    let mut with = parent.clone();
    let (a, b) = (find(&mut with, cell / n), find(&mut with, n + cell % n));
    if a != b {
        with[a] = b;
        chosen.push(cell);
        enumerate_trees(n, cell + 1, chosen, with, visit);
        chosen.pop();
    }
    enumerate_trees(n, cell + 1, chosen, parent, visit);
}

/// Unique flow supported on a spanning tree, or `None` if it is infeasible.
fn tree_flow(n: usize, tree: &[usize], p: &[f64], q: &[f64]) -> Option<Vec<f64>> {
    let mut residual: Vec<f64> = p.iter().chain(q).copied().collect();
    let mut degree = vec![0usize; 2 * n];
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); 2 * n];
    for &cell in tree {
        let (r, c) = (cell / n, n + cell % n);
        degree[r] += 1;
        degree[c] += 1;
        incident[r].push(cell);
        incident[c].push(cell);
    }
    let mut used = vec![false; n * n];
    let mut flow = vec![0.0; n * n];
    let mut leaves: Vec<usize> = (0..2 * n).filter(|&v| degree[v] == 1).collect();
    let mut remaining = tree.len();
    while remaining > 0 {
        let leaf = leaves.pop()?;
        if degree[leaf] != 1 {
            continue;
        }
        let cell = *incident[leaf].iter().find(|&&c| !used[c])?;
        let other = if leaf < n { n + cell % n } else { cell / n };
        let f = residual[leaf];
        flow[cell] = f;
        used[cell] = true;
        residual[leaf] = 0.0;
        residual[other] -= f;
        degree[leaf] = 0;
        degree[other] -= 1;
        if degree[other] == 1 {
            leaves.push(other);
        }
        remaining -= 1;
    }
    if flow.iter().any(|&f| f < -1e-12) {
        return None;
    }
    Some(flow.into_iter().map(|f| f.max(0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::tv_distance;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dist(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    fn random_dist(rng: &mut impl Rng, n: usize, sparse: bool) -> Distribution {
        let mut v: Vec<f64> = (0..n)
            .map(|_| {
                if sparse && rng.random_bool(0.3) {
                    0.0
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        if v.iter().sum::<f64>() == 0.0 {
            v[0] = 1.0;
        }
        let s: f64 = v.iter().sum();
        Distribution::new(v.iter().map(|x| x / s).collect()).unwrap()
    }

    #[test]
    fn point_masses_force_the_plan() {
        let sol = solve_transport(
            &dist(&[1.0, 0.0]),
            &dist(&[0.0, 1.0]),
            &CostTable::discrete_metric(2),
        )
        .unwrap();
        assert_eq!(sol.value, 1.0);
        assert_eq!(sol.plan.mass(0, 1), 1.0);
        assert_eq!(sol.plan.diagonal_mass(), 0.0);
    }

    #[test]
    fn equal_marginals_stay_on_diagonal() {
        let p = dist(&[0.5, 0.5]);
        let sol = solve_transport(&p, &p, &CostTable::discrete_metric(2)).unwrap();
        assert_eq!(sol.value, 0.0);
        assert_eq!(sol.plan.masses(), &[0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn discrete_metric_gives_tv() {
        let (p, q) = (dist(&[0.9, 0.1]), dist(&[0.2, 0.8]));
        let cost = CostTable::discrete_metric(2);
        let sol = solve_transport(&p, &q, &cost).unwrap();
        assert_abs_diff_eq!(sol.value, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(
            brute_force_transport(&p, &q, &cost).unwrap(),
            0.7,
            epsilon = 1e-12
        );
    }

    #[test]
    fn brute_force_examples() {
        let p = dist(&[1.0, 0.0, 0.0]);
        let cost =
            CostTable::from_rows(&[[0.0, 5.0, 2.0], [1.0, 3.0, 4.0], [7.0, 1.0, 0.5]]).unwrap();
        assert_eq!(brute_force_transport(&p, &p, &cost).unwrap(), 0.0);
        let inf = CostTable::new(3, vec![f64::INFINITY; 9]).unwrap();
        assert_eq!(brute_force_transport(&p, &p, &inf).unwrap(), f64::INFINITY);
        assert_eq!(solve_transport(&p, &p, &inf).unwrap().value, f64::INFINITY);
        let big = Distribution::uniform(7);
        assert!(matches!(
            brute_force_transport(&big, &big, &CostTable::discrete_metric(7)),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn infinite_mass_examples() {
        let all = vec![true; 4];
        assert_eq!(
            min_infinite_mass(&dist(&[0.3, 0.7]), &dist(&[0.6, 0.4]), &all).unwrap(),
            0.0
        );
        let diag_only = vec![true, false, false, true];
        assert_eq!(
            min_infinite_mass(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0]), &diag_only).unwrap(),
            1.0
        );
        let off_only = vec![false, true, true, false];
        let half = dist(&[0.5, 0.5]);
        assert_eq!(min_infinite_mass(&half, &half, &off_only).unwrap(), 0.0);
        // oracle: the brute-force minimum with costs ∞ on masked cells is finite
        let cost = CostTable::new(2, vec![f64::INFINITY, 0.0, 0.0, f64::INFINITY]).unwrap();
        assert_eq!(brute_force_transport(&half, &half, &cost).unwrap(), 0.0);
        let sol = solve_transport(&half, &half, &cost).unwrap();
        assert_eq!(sol.value, 0.0);
        assert_eq!(sol.plan.masses(), &[0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn infinite_value_returns_min_infinite_plan() {
        // only (0,0) and (1,1) finite; marginals force 0.4 onto (0,1)
        let cost = CostTable::new(2, vec![0.0, f64::INFINITY, 5.0, 0.0]).unwrap();
        let sol = solve_transport(&dist(&[1.0, 0.0]), &dist(&[0.6, 0.4]), &cost).unwrap();
        assert_eq!(sol.value, f64::INFINITY);
        assert_abs_diff_eq!(sol.plan.mass(0, 1), 0.4, epsilon = 1e-15);
        assert!(sol.plan.marginal_error() < 1e-12);
    }

    #[test]
    fn dimension_errors() {
        let p = dist(&[0.5, 0.5]);
        let q = dist(&[0.2, 0.3, 0.5]);
        assert!(matches!(
            solve_transport(&p, &q, &CostTable::discrete_metric(2)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            min_infinite_mass(&p, &p, &[true; 3]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn agrees_with_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..300 {
            let n = 2 + trial % 3;
            let p = random_dist(&mut rng, n, trial % 2 == 0);
            let q = random_dist(&mut rng, n, trial % 3 == 0);
            let entries = (0..n * n)
                .map(|_| {
                    if trial % 4 == 0 && rng.random_bool(0.25) {
                        f64::INFINITY
                    } else {
                        rng.random_range(0.0..10.0)
                    }
                })
                .collect();
            let cost = CostTable::new(n, entries).unwrap();
            let sol = solve_transport(&p, &q, &cost).unwrap();
            let oracle = brute_force_transport(&p, &q, &cost).unwrap();
            if oracle.is_infinite() {
                assert_eq!(sol.value, f64::INFINITY, "trial {trial}");
            } else {
                assert_abs_diff_eq!(sol.value, oracle, epsilon = 1e-9);
            }
            assert!(sol.plan.marginal_error() < 1e-9);
        }
    }

    #[test]
    fn output_is_deterministic() {
        let p = dist(&[0.25, 0.25, 0.25, 0.25]);
        let cost = CostTable::new(4, vec![0.0; 16]).unwrap();
        let a = solve_transport(&p, &p, &cost).unwrap();
        let b = solve_transport(&p, &p, &cost).unwrap();
        assert_eq!(a, b);
    }

    fn arb_dist(n: usize) -> impl Strategy<Value = Distribution> {
        prop::collection::vec(0.0f64..1.0, n).prop_map(|v| {
            let v: Vec<f64> = v.iter().map(|x| x + 1e-3).collect();
            let s: f64 = v.iter().sum();
            Distribution::new(v.iter().map(|x| x / s).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn plan_is_feasible_and_beats_independent(
            p in arb_dist(4),
            q in arb_dist(4),
            c in prop::collection::vec(0.0f64..5.0, 16),
        ) {
            let cost = CostTable::new(4, c).unwrap();
            let sol = solve_transport(&p, &q, &cost).unwrap();
            prop_assert!(sol.plan.marginal_error() < 1e-9);
            let indep = TransportPlan::independent(&p, &q).cost(&cost);
            prop_assert!(sol.value <= indep + 1e-12);
        }

        #[test]
        fn discrete_metric_identity(p in arb_dist(5), q in arb_dist(5)) {
            let sol = solve_transport(&p, &q, &CostTable::discrete_metric(5)).unwrap();
            let tv = tv_distance(p.probs(), q.probs()).unwrap();
            prop_assert!((sol.value - tv).abs() < 1e-12);
        }

        #[test]
        fn scaling_keeps_plan_optimal(
            p in arb_dist(3),
            q in arb_dist(3),
            c in prop::collection::vec(0.0f64..5.0, 9),
            lambda in 0.1f64..10.0,
        ) {
            let cost = CostTable::new(3, c.clone()).unwrap();
            let scaled = CostTable::new(3, c.iter().map(|x| x * lambda).collect()).unwrap();
            let sol = solve_transport(&p, &q, &cost).unwrap();
            let sol_scaled = solve_transport(&p, &q, &scaled).unwrap();
            prop_assert!((sol_scaled.value - lambda * sol.value).abs() < 1e-9 * (1.0 + lambda));
            prop_assert!((sol.plan.cost(&scaled) - sol_scaled.value).abs() < 1e-9 * (1.0 + lambda));
        }
    }
}
