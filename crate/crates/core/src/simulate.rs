//! Monte Carlo sampling of coupled trajectories.
//!
//! Trajectory `i` of a run draws from a ChaCha8 generator keyed by the master
//! seed and positioned on stream `i`, so results do not depend on how the
//! work is split across threads. Reductions are pairwise sums in trajectory
//! order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bicausal_dp::{CouplingKernel, ProblemSpec, COUPLING_TOL};
use crate::error::{Error, Result};

/// Largest tolerated tail of a truncated discounted sum.
pub const TRUNCATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationConfig {
    pub samples: u64,
    pub horizon_cap: u64,
    pub master_seed: u64,
}

impl SimulationConfig {
    pub fn new(samples: u64, horizon_cap: u64, master_seed: u64) -> Result<Self> {
        if samples == 0 || horizon_cap == 0 {
            return Err(Error::InvalidArgument(
                "samples and horizon_cap must be at least 1".into(),
            ));
        }
        Ok(Self {
            samples,
            horizon_cap,
            master_seed,
        })
    }
}

/// Empirical coupling time. The mean and standard error are taken over the
/// trajectories that met before `horizon_cap`; the rest are `censored`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingTimeStats {
    pub mean: f64,
    pub std_error: f64,
    pub censored: u64,
    pub samples: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountedCostEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Deterministic bound on the discounted cost omitted after the horizon.
    pub truncation_bound: f64,
    pub censored: u64,
}

/// Inverse-CDF sampler over the row-major cells of every plan.
struct PairSampler {
    n: usize,
    cdfs: Vec<Vec<f64>>,
}

impl PairSampler {
    fn new(q: &CouplingKernel) -> Self {
        let cdfs = q
            .plans()
            .iter()
            .map(|plan| {
                let mut acc = 0.0;
                plan.masses()
                    .iter()
                    .map(|&m| {
                        acc += m.max(0.0);
                        acc
                    })
                    .collect()
            })
            .collect();
        Self { n: q.n(), cdfs }
    }

    fn step(&self, pair: (usize, usize), rng: &mut ChaCha8Rng) -> (usize, usize) {
        let cdf = &self.cdfs[pair.0 * self.n + pair.1];
        let target = rng.random::<f64>() * cdf[cdf.len() - 1];
        let cell = cdf.partition_point(|&c| c <= target).min(cdf.len() - 1);
        (cell / self.n, cell % self.n)
    }
}

fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

fn check_self_consistent(q: &CouplingKernel) -> Result<()> {
    let n = q.n();
    for x in 0..n {
        for x2 in 0..n {
            let plan = q.plan(x, x2);
            let err = plan.marginal_error();
            let total: f64 = plan.masses().iter().sum();
            if err > COUPLING_TOL || (total - 1.0).abs() > COUPLING_TOL {
                return Err(Error::InvalidCoupling {
                    x,
                    x_prime: x2,
                    reason: format!("plan is not a probability coupling (error {err:e})"),
                });
            }
        }
    }
    Ok(())
}

fn check_start(q: &CouplingKernel, x0: usize, x0_prime: usize) -> Result<()> {
    let n = q.n();
    for index in [x0, x0_prime] {
        if index >= n {
            return Err(Error::StateOutOfRange { index, n });
        }
    }
    Ok(())
}

/// Samples `horizon` steps of the pair chain driven by `q`.
pub fn sample_coupled_trajectory(
    q: &CouplingKernel,
    x0: usize,
    x0_prime: usize,
    horizon: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    check_self_consistent(q)?;
    check_start(q, x0, x0_prime)?;
    let sampler = PairSampler::new(q);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(horizon + 1);
    let mut ys = Vec::with_capacity(horizon + 1);
    let mut pair = (x0, x0_prime);
    xs.push(pair.0);
    ys.push(pair.1);
    for _ in 0..horizon {
        pair = sampler.step(pair, &mut rng);
        xs.push(pair.0);
        ys.push(pair.1);
    }
    Ok((xs, ys))
}

/// Estimates `E[T]` for `T = inf{k ≥ 0 : X̂_k = X̂'_k}`.
pub fn estimate_coupling_time(
    q: &CouplingKernel,
    x0: usize,
    x0_prime: usize,
    cfg: &SimulationConfig,
) -> Result<CouplingTimeStats> {
    check_self_consistent(q)?;
    check_start(q, x0, x0_prime)?;
    if !q.keeps_diagonal(1e-12) {
        log::warn!("coupling is not sticky: the estimate is a first meeting time, not a cost");
    }
    let sampler = PairSampler::new(q);
    let times: Vec<Option<f64>> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = trajectory_rng(cfg.master_seed, i);
            let mut pair = (x0, x0_prime);
            let mut t = 0u64;
            while pair.0 != pair.1 {
                if t == cfg.horizon_cap {
                    return None;
                }
                pair = sampler.step(pair, &mut rng);
                t += 1;
            }
            Some(t as f64)
        })
        .collect();
    let (mean, std_error, censored) = summarize(&times);
    Ok(CouplingTimeStats {
        mean,
        std_error,
        censored,
        samples: cfg.samples,
    })
}

/// Estimates `E Σ_k β^k c(X̂_k, X̂'_k)` from `(spec.x0, spec.x0')`.
///
/// With `β < 1` the sum is truncated at the first horizon whose tail
/// `β^H ‖c‖∞ / (1 − β)` is below [`TRUNCATION_TOL`] (or at `horizon_cap`).
/// With `β = 1` the coupling must be sticky and the cost zero on the
/// diagonal, and each trajectory runs until the chains meet.
pub fn estimate_discounted_cost(
    q: &CouplingKernel,
    spec: &ProblemSpec,
    cfg: &SimulationConfig,
) -> Result<DiscountedCostEstimate> {
    q.check_against(spec.p(), spec.p_prime(), COUPLING_TOL)?;
    let n = spec.n();
    let cost = spec.stage_cost();
    let beta = spec.beta();
    let c_max = cost.entries().iter().fold(0.0f64, |m, &c| m.max(c));
    let sampler = PairSampler::new(q);
    let start = (spec.x0(), spec.x0_prime());

    if beta < 1.0 {
        let tail = |h: u64| beta.powf(h as f64) * c_max / (1.0 - beta);
        let mut horizon = 0u64;
        while horizon < cfg.horizon_cap && tail(horizon) >= TRUNCATION_TOL {
            horizon += 1;
        }
        let sums: Vec<Option<f64>> = (0..cfg.samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = trajectory_rng(cfg.master_seed, i);
                let mut pair = start;
                let mut total = 0.0;
                let mut discount = 1.0;
                for _ in 0..horizon {
                    total += discount * cost.get(pair.0, pair.1);
                    discount *= beta;
                    pair = sampler.step(pair, &mut rng);
                }
                Some(total)
            })
            .collect();
        let (mean, std_error, _) = summarize(&sums);
        return Ok(DiscountedCostEstimate {
            mean,
            std_error,
            truncation_bound: tail(horizon),
            censored: 0,
        });
    }

    if !q.keeps_diagonal(1e-12) {
        return Err(Error::TruncationUnsafe(
            "undiscounted cost needs a coupling that sticks to the diagonal".into(),
        ));
    }
    if (0..n).any(|x| cost.get(x, x) != 0.0) {
        return Err(Error::TruncationUnsafe(
            "undiscounted cost needs zero cost on the diagonal".into(),
        ));
    }
    let sums: Vec<Option<f64>> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = trajectory_rng(cfg.master_seed, i);
            let mut pair = start;
            let mut total = 0.0;
            let mut t = 0u64;
            while pair.0 != pair.1 {
                if t == cfg.horizon_cap {
                    return None;
                }
                total += cost.get(pair.0, pair.1);
                pair = sampler.step(pair, &mut rng);
                t += 1;
            }
            Some(total)
        })
        .collect();
    let (mean, std_error, censored) = summarize(&sums);
    Ok(DiscountedCostEstimate {
        mean,
        std_error,
        truncation_bound: if censored == 0 { 0.0 } else { f64::INFINITY },
        censored,
    })
}

/// Mean, standard error of the mean, and number of `None` entries.
fn summarize(samples: &[Option<f64>]) -> (f64, f64, u64) {
    let kept: Vec<f64> = samples.iter().flatten().copied().collect();
    let censored = (samples.len() - kept.len()) as u64;
    let m = kept.len();
    if m == 0 {
        return (f64::NAN, f64::NAN, censored);
    }
    let mean = pairwise_sum(&kept) / m as f64;
    if m == 1 {
        return (mean, 0.0, censored);
    }
    let squares: Vec<f64> = kept.iter().map(|v| (v - mean) * (v - mean)).collect();
    let variance = pairwise_sum(&squares) / (m - 1) as f64;
    (mean, (variance / m as f64).sqrt(), censored)
}

fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        return values.iter().sum();
    }
    let (left, right) = values.split_at(values.len() / 2);
    pairwise_sum(left) + pairwise_sum(right)
}
