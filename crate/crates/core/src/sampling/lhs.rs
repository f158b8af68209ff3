//! Latin-hypercube sampling with counter-based per-sample determinism.
//!
//! Each dimension gets an independent seeded stratum permutation; the jitter
//! inside a stratum depends only on (seed, dimension, row), so row i of a
//! design is reproducible in isolation.

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::util::{seeded_rng, stream_seed};

const TAG_PERM: u64 = 0x4c48_5350; // "LHSP"
const TAG_JITTER: u64 = 0x4c48_534a; // "LHSJ"

/// Stratum assignment for every row of one dimension: a seeded uniform
/// permutation of 0..n.
fn strata(seed: u64, dim: usize, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = seeded_rng(seed, &[TAG_PERM, dim as u64]);
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

fn jitter(seed: u64, dim: usize, row: usize) -> f64 {
    let mut rng = seeded_rng(seed, &[TAG_JITTER, dim as u64, row as u64]);
    rng.random::<f64>()
}

/// Latin-hypercube design in [0,1): per column exactly one value falls in
/// each stratum [j/n, (j+1)/n). Deterministic given the seed.
pub fn lhs_sample(n_samples: usize, n_dims: usize, seed: u64) -> Result<Array2<f64>> {
    lhs_sample_rows(n_samples, n_samples, n_dims, seed)
}

/// First `n_rows` rows of the `design_n`-sample design. Row values depend
/// only on (seed, design_n, row), so a truncated run is a prefix of any
/// larger request against the same design.
pub fn lhs_sample_rows(
    design_n: usize,
    n_rows: usize,
    n_dims: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    if design_n == 0 || n_dims == 0 {
        return Err(Error::InvalidParam(
            "LHS requires n_samples >= 1 and n_dims >= 1".into(),
        ));
    }
    if n_rows > design_n {
        return Err(Error::InvalidParam(format!(
            "requested {n_rows} rows from a {design_n}-sample design"
        )));
    }
    let mut out = Array2::zeros((n_rows, n_dims));
    let inv_n = 1.0 / design_n as f64;
    for d in 0..n_dims {
        let perm = strata(seed, d, design_n);
        for i in 0..n_rows {
            let u = (perm[i] as f64 + jitter(seed, d, i)) * inv_n;
            out[[i, d]] = u.min(f64::from_bits(1.0_f64.to_bits() - 1));
        }
    }
    Ok(out)
}

/// Stream seed for one dataset split; exposed so per-sample generation and
/// full-run generation agree.
pub fn split_stream_seed(seed: u64, case_number: u32, split_tag: u32) -> u64 {
    stream_seed(seed, &[case_number as u64, split_tag as u64])
}
