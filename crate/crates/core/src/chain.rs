//! Finite state spaces, distributions and transition kernels.
//!
//! Everything here is immutable once constructed. Kernels are stored as a
//! dense row-major `n × n` buffer; row `i` is the law of the next state
//! given the current state `i`.

use std::collections::HashMap;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::error::{Error, Result};

/// Entries above this (negative) value are treated as rounding noise and clamped to zero.
pub const NEGATIVE_CLAMP: f64 = -1e-12;

/// Tolerance on the total mass of a distribution or a kernel row.
pub const PROB_TOL: f64 = 1e-9;

/// An ordered set of distinct state labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl StateSpace {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::Empty);
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { labels, index })
    }

    /// States labelled `"0"`, `"1"`, ... `"n-1"`.
    pub fn numbered(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownState(label.to_string()))
    }
}

/// A probability vector over a finite state space.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Validates and renormalizes `probs`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Empty);
        }
        let mut probs = probs;
        for (i, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() || *p < NEGATIVE_CLAMP {
                return Err(Error::InvalidDistribution(format!(
                    "entry {i} is {p}, expected a nonnegative number"
                )));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        probs.iter_mut().for_each(|p| *p /= sum);
        Ok(Self { probs })
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[at] = 1.0;
        Self { probs }
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }
}

impl std::ops::Index<usize> for Distribution {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

/// A row-stochastic `n × n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    n: usize,
    data: Vec<f64>,
}

impl TransitionKernel {
    /// Number of states.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.data[x * self.n..(x + 1) * self.n]
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[x * self.n + y]
    }

    pub fn row_distribution(&self, x: usize) -> Distribution {
        Distribution::from_raw(self.row(x).to_vec())
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &TransitionKernel) -> TransitionKernel {
        assert_eq!(self.n, other.n, "kernel dimensions differ");
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        TransitionKernel { n, data }
    }

    /// The `k`-th matrix power.
    pub fn power(&self, k: u64) -> TransitionKernel {
        if k <= 64 {
            let mut acc = TransitionKernel::identity(self.n);
            for _ in 0..k {
                acc = acc.compose(self);
            }
            return acc;
        }
        let mut acc = TransitionKernel::identity(self.n);
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.compose(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.compose(&base);
            }
        }
        acc
    }

    /// Row vector times kernel: the law one step after `dist`.
    pub fn push_forward(&self, dist: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for (x, &w) in dist.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(self.row(x)) {
                *o += w * p;
            }
        }
        out
    }
}

/// A Markov chain started from a fixed state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub space: StateSpace,
    pub kernel: TransitionKernel,
    pub initial: usize,
}

impl ChainSpec {
    pub fn new(space: StateSpace, kernel: TransitionKernel, initial: usize) -> Result<Self> {
        if kernel.len() != space.len() {
            return Err(Error::DimensionMismatch {
                expected: space.len(),
                found: kernel.len(),
            });
        }
        if initial >= space.len() {
            return Err(Error::StateOutOfRange {
                index: initial,
                n: space.len(),
            });
        }
        Ok(Self {
            space,
            kernel,
            initial,
        })
    }
}

/// Checks that `matrix` is square and row-stochastic, clamps rounding noise
/// below zero and renormalizes every row to sum to exactly one.
pub fn validate_kernel<R: AsRef<[f64]>>(matrix: &[R]) -> Result<TransitionKernel> {
    let n = matrix.len();
    if n == 0 {
        return Err(Error::Empty);
    }
    let mut data = Vec::with_capacity(n * n);
    for (i, row) in matrix.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != n {
            return Err(Error::NonSquare {
                row: i,
                len: row.len(),
                expected: n,
            });
        }
        let start = data.len();
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() || v < NEGATIVE_CLAMP {
                return Err(Error::NegativeEntry {
                    row: i,
                    col: j,
                    value: v,
                });
            }
            data.push(v.max(0.0));
        }
        let sum: f64 = data[start..].iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::RowSumViolation { row: i, sum });
        }
        data[start..].iter_mut().for_each(|v| *v /= sum);
    }
    Ok(TransitionKernel { n, data })
}

/// Half the L1 distance between two probability vectors.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    Ok(tv_unchecked(p, q))
}

pub(crate) fn tv_unchecked(p: &[f64], q: &[f64]) -> f64 {
    let l1: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    (0.5 * l1).min(1.0)
}

/// Row `x` of the `k`-th power of the kernel.
pub fn k_step_distribution(kernel: &TransitionKernel, x: usize, k: u64) -> Result<Distribution> {
    let n = kernel.len();
    if x >= n {
        return Err(Error::StateOutOfRange { index: x, n });
    }
    if k > 64 {
        let pk = kernel.power(k);
        return Ok(pk.row_distribution(x));
    }
    let mut dist = Distribution::point_mass(n, x).into_vec();
    for _ in 0..k {
        dist = kernel.push_forward(&dist);
    }
    Ok(Distribution::from_raw(dist))
}

/// Doeblin–Dobrushin coefficient: the largest total-variation distance
/// between two rows of the kernel.
pub fn doeblin_coefficient(kernel: &TransitionKernel) -> f64 {
    let n = kernel.len();
    let mut worst: f64 = 0.0;
    for x in 0..n {
        for x2 in x + 1..n {
            worst = worst.max(tv_unchecked(kernel.row(x), kernel.row(x2)));
        }
    }
    worst
}

/// Irreducibility and aperiodicity of the support graph of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructureFlags {
    pub irreducible: bool,
    /// Every strongly connected component that contains a cycle has period 1.
    /// Transient singletons without a self-loop carry no cycle and are ignored.
    pub aperiodic: bool,
}

pub fn structure_flags(kernel: &TransitionKernel) -> StructureFlags {
    let n = kernel.len();
    let mut graph: DiGraph<(), ()> = DiGraph::with_capacity(n, n * n);
    let nodes: Vec<NodeIndex> = (0..n).map(|_| graph.add_node(())).collect();
    for x in 0..n {
        for y in 0..n {
            if kernel.get(x, y) > 0.0 {
                graph.add_edge(nodes[x], nodes[y], ());
            }
        }
    }
    let components = tarjan_scc(&graph);
    let irreducible = components.len() == 1;

    let mut component_of = vec![usize::MAX; n];
    for (c, comp) in components.iter().enumerate() {
        for node in comp {
            component_of[node.index()] = c;
        }
    }

    let mut aperiodic = true;
    for (c, comp) in components.iter().enumerate() {
        if component_period(kernel, &component_of, c, comp[0].index()) > 1 {
            aperiodic = false;
        }
    }
    StructureFlags {
        irreducible,
        aperiodic,
    }
}

/// Period of a strongly connected component: gcd over its internal edges
/// `u → v` of `level(u) + 1 − level(v)`, with BFS levels from `root`.
/// Returns 0 for a component without cycles.
fn component_period(
    kernel: &TransitionKernel,
    component_of: &[usize],
    component: usize,
    root: usize,
) -> u64 {
    let n = kernel.len();
    let mut level = vec![u64::MAX; n];
    level[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    let mut g = 0u64;
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if kernel.get(u, v) <= 0.0 || component_of[v] != component {
                continue;
            }
            if level[v] == u64::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                let diff = (level[u] + 1).abs_diff(level[v]);
                g = gcd(g, diff);
            }
        }
    }
    g
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}
