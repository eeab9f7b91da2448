//! Evaluation criteria for Monte Carlo studies: coefficient RMSE and bias,
//! the rate of correct block counts, and the extended Rand index comparing
//! recovered and true partitions slice by slice.

use crate::error::{Error, Result};
use crate::panel::{BlockPartition, CoefficientField};

/// Per-replicate scores gathered by a Monte Carlo driver.
#[derive(Debug, Clone, Copy)]
pub struct ReplicateScore {
    pub rmse: f64,
    pub bias: f64,
    pub l_hat: usize,
    pub eri: f64,
    pub eri_t: f64,
    pub eri_n: f64,
}

impl ReplicateScore {
    pub fn new(rmse: f64, bias: f64, l_hat: usize, eri_t: f64, eri_n: f64) -> Self {
        Self {
            rmse,
            bias,
            l_hat,
            eri: 0.5 * (eri_t + eri_n),
            eri_t,
            eri_n,
        }
    }
}

/// Entrywise root mean squared error and mean signed error of an estimated
/// coefficient field against the truth.
pub fn rmse_bias(
    beta_hat: &CoefficientField,
    beta_true: &CoefficientField,
) -> Result<(f64, f64)> {
    if !beta_hat.same_shape(beta_true) {
        return Err(Error::DimensionMismatch(
            "coefficient fields have different shapes".into(),
        ));
    }
    let k = beta_hat.values().len() as f64;
    let mut sq = 0.0;
    let mut signed = 0.0;
    for (a, b) in beta_hat.values().iter().zip(beta_true.values()) {
        let d = a - b;
        sq += d * d;
        signed += d;
    }
    Ok(((sq / k).sqrt(), signed / k))
}

/// Fraction of replicates whose estimated block count hits the truth.
pub fn percent_correct_l(l_hats: &[usize], l0: usize) -> Result<f64> {
    if l_hats.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one replicate".into(),
        ));
    }
    let hits = l_hats.iter().filter(|&&l| l == l0).count();
    Ok(hits as f64 / l_hats.len() as f64)
}

/// Classical pair-counting Rand index between two labelings of the same
/// items.
fn rand_index(a: &[usize], b: &[usize]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    debug_assert!(a.len() >= 2);
    let n = a.len();
    let mut agree = 0usize;
    let mut total = 0usize;
    for p in 0..n {
        for q in (p + 1)..n {
            let same_a = a[p] == a[q];
            let same_b = b[p] == b[q];
            if same_a == same_b {
                agree += 1;
            }
            total += 1;
        }
    }
    agree as f64 / total as f64
}

/// Extended Rand index `(eri, eri_t, eri_n)` between an estimated and a
/// true partition of the same lattice.
///
/// For each period the two partitions induce clusterings of the N
/// individuals (cells co-clustered iff they share a block label); `eri_t`
/// averages the per-period Rand indices. `eri_n` does the symmetric
/// average over individuals' period slices, and `eri` is the mean of the
/// two. Degenerate slices (N < 2 or T < 2) are rejected.
pub fn extended_rand_index(
    est: &BlockPartition,
    truth: &BlockPartition,
) -> Result<(f64, f64, f64)> {
    let n = est.n_individuals();
    let t = est.n_periods();
    if truth.n_individuals() != n || truth.n_periods() != t {
        return Err(Error::DimensionMismatch(
            "partitions cover different lattices".into(),
        ));
    }
    if n < 2 || t < 2 {
        return Err(Error::InvalidArgument(
            "Rand index needs at least two items per slice".into(),
        ));
    }

    let mut eri_t = 0.0;
    for tt in 1..=t {
        let a: Vec<usize> = (1..=n).map(|i| est.label(i, tt)).collect();
        let b: Vec<usize> = (1..=n).map(|i| truth.label(i, tt)).collect();
        eri_t += rand_index(&a, &b);
    }
    eri_t /= t as f64;

    let mut eri_n = 0.0;
    for i in 1..=n {
        let a: Vec<usize> = (1..=t).map(|tt| est.label(i, tt)).collect();
        let b: Vec<usize> = (1..=t).map(|tt| truth.label(i, tt)).collect();
        eri_n += rand_index(&a, &b);
    }
    eri_n /= n as f64;

    Ok((0.5 * (eri_t + eri_n), eri_t, eri_n))
}
