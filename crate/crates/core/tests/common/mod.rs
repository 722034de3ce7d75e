#![allow(dead_code)]

use bicausal::chain::{structure_flags, validate_kernel, Distribution, TransitionKernel};
use bicausal::exact_ot::CostTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normalize(row: &mut [f64]) {
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= s);
}

/// Strictly positive rows: irreducible, aperiodic, `δ(P) < 1`.
pub fn dense_kernel(rng: &mut ChaCha8Rng, n: usize) -> TransitionKernel {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut row: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
            normalize(&mut row);
            row
        })
        .collect();
    validate_kernel(&rows).unwrap()
}

/// Rows with random zeros, resampled until irreducible and aperiodic.
pub fn sparse_ergodic_kernel(rng: &mut ChaCha8Rng, n: usize) -> TransitionKernel {
    loop {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| loop {
                let mut row: Vec<f64> = (0..n)
                    .map(|_| {
                        if rng.random_bool(0.4) {
                            0.0
                        } else {
                            rng.random_range(0.05..1.0)
                        }
                    })
                    .collect();
                if row.iter().any(|&v| v > 0.0) {
                    normalize(&mut row);
                    break row;
                }
            })
            .collect();
        let p = validate_kernel(&rows).unwrap();
        let flags = structure_flags(&p);
        if flags.irreducible && flags.aperiodic {
            return p;
        }
    }
}

/// Alternates dense and sparse ergodic kernels.
pub fn ergodic_kernel(rng: &mut ChaCha8Rng, n: usize, index: usize) -> TransitionKernel {
    if index.is_multiple_of(2) {
        dense_kernel(rng, n)
    } else {
        sparse_ergodic_kernel(rng, n)
    }
}

/// A distribution with occasional zero atoms.
pub fn distribution(rng: &mut ChaCha8Rng, n: usize) -> Distribution {
    loop {
        let mut v: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_bool(0.2) {
                    0.0
                } else {
                    rng.random_range(0.0..1.0)
                }
            })
            .collect();
        if v.iter().sum::<f64>() > 0.1 {
            normalize(&mut v);
            return Distribution::new(v).unwrap();
        }
    }
}

/// Nonnegative costs with a fraction of `+∞` cells.
pub fn extended_cost(rng: &mut ChaCha8Rng, n: usize, infinite_prob: f64) -> CostTable {
    let entries = (0..n * n)
        .map(|_| {
            if rng.random_bool(infinite_prob) {
                f64::INFINITY
            } else {
                rng.random_range(0.0..5.0)
            }
        })
        .collect();
    CostTable::new(n, entries).unwrap()
}

/// Symmetric finite cost with zero diagonal.
pub fn metric_like_cost(rng: &mut ChaCha8Rng, n: usize) -> CostTable {
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let c = rng.random_range(0.1..2.0);
            entries[i * n + j] = c;
            entries[j * n + i] = c;
        }
    }
    CostTable::new(n, entries).unwrap()
}

pub fn data_file(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}
