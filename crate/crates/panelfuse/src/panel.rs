//! Panel data model on a complete `N x T` lattice, the per-cell coefficient
//! field, and the pairwise fusion index every other module consumes.
//!
//! Individuals `i` and periods `t` are 1-based throughout the public API,
//! matching the usual panel-data convention. Coefficient slots `p` are
//! 0-based slices with slot 0 holding the intercept (the time-varying fixed
//! effect) and slots `1..P` the regressor slopes.
//!
//! The pairwise fusion operators are never materialized as matrices: with
//! `T * N(N-1)/2` individual pairs and `N * T(T-1)/2` period pairs the dense
//! forms blow up quadratically. [`FusionIndex`] holds the pair lists instead
//! and all operators act through it.

use crate::error::{Error, Result};

/// Observed outcomes and regressors on a complete `N x T` lattice.
///
/// `n_covariates` counts the intercept slot, so each cell stores
/// `n_covariates - 1` regressor values.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    n_individuals: usize,
    n_periods: usize,
    n_covariates: usize,
    outcomes: Vec<f64>,
    regressors: Vec<f64>,
}

impl PanelData {
    /// Validates and wraps raw arrays. `outcomes` is row-major `(i, t)`,
    /// `regressors` row-major `(i, t, k)` with `k` in `0..n_covariates - 1`.
    pub fn new(
        n_individuals: usize,
        n_periods: usize,
        n_covariates: usize,
        outcomes: Vec<f64>,
        regressors: Vec<f64>,
    ) -> Result<Self> {
        if n_individuals < 2 || n_periods < 2 {
            return Err(Error::InvalidArgument(format!(
                "panel needs at least 2 individuals and 2 periods, got N={n_individuals}, T={n_periods}"
            )));
        }
        if n_covariates < 1 {
            return Err(Error::InvalidArgument(
                "n_covariates must be at least 1 (the intercept slot)".into(),
            ));
        }
        let cells = n_individuals * n_periods;
        if outcomes.len() != cells {
            return Err(Error::DimensionMismatch(format!(
                "expected {cells} outcomes, got {}",
                outcomes.len()
            )));
        }
        if regressors.len() != cells * (n_covariates - 1) {
            return Err(Error::DimensionMismatch(format!(
                "expected {} regressor values, got {}",
                cells * (n_covariates - 1),
                regressors.len()
            )));
        }
        if !outcomes.iter().chain(regressors.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(
                "panel entries must all be finite".into(),
            ));
        }
        Ok(Self {
            n_individuals,
            n_periods,
            n_covariates,
            outcomes,
            regressors,
        })
    }

    pub fn n_individuals(&self) -> usize {
        self.n_individuals
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn n_covariates(&self) -> usize {
        self.n_covariates
    }

    pub fn n_cells(&self) -> usize {
        self.n_individuals * self.n_periods
    }

    #[inline]
    fn cell(&self, i: usize, t: usize) -> usize {
        debug_assert!(i >= 1 && i <= self.n_individuals);
        debug_assert!(t >= 1 && t <= self.n_periods);
        (i - 1) * self.n_periods + (t - 1)
    }

    /// `y_it` (1-based `i`, `t`).
    #[inline]
    pub fn outcome(&self, i: usize, t: usize) -> f64 {
        self.outcomes[self.cell(i, t)]
    }

    /// The `n_covariates - 1` regressor values of cell `(i, t)`.
    #[inline]
    pub fn regressors(&self, i: usize, t: usize) -> &[f64] {
        let k = self.n_covariates - 1;
        let c = self.cell(i, t);
        &self.regressors[c * k..(c + 1) * k]
    }

    /// All outcomes in row-major `(i, t)` order.
    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }
}

/// Per-cell design rows `x_it = (1, z_it^T)^T`, shape `(N, T, P)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n_individuals: usize,
    n_periods: usize,
    n_covariates: usize,
    values: Vec<f64>,
}

impl DesignMatrix {
    /// Wraps a raw `(i, t, p)` array; mostly useful in tests. Production
    /// callers go through [`build_design`].
    pub fn from_values(
        n_individuals: usize,
        n_periods: usize,
        n_covariates: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != n_individuals * n_periods * n_covariates {
            return Err(Error::DimensionMismatch(format!(
                "expected {} design values, got {}",
                n_individuals * n_periods * n_covariates,
                values.len()
            )));
        }
        Ok(Self {
            n_individuals,
            n_periods,
            n_covariates,
            values,
        })
    }

    pub fn n_individuals(&self) -> usize {
        self.n_individuals
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn n_covariates(&self) -> usize {
        self.n_covariates
    }

    /// Design row `x_it`, length `P`.
    #[inline]
    pub fn row(&self, i: usize, t: usize) -> &[f64] {
        let p = self.n_covariates;
        let c = (i - 1) * self.n_periods + (t - 1);
        &self.values[c * p..(c + 1) * p]
    }
}

/// Builds the design rows by prepending the intercept to each cell's
/// regressors.
pub fn build_design(panel: &PanelData) -> DesignMatrix {
    let (n, t, p) = (panel.n_individuals, panel.n_periods, panel.n_covariates);
    let mut values = Vec::with_capacity(n * t * p);
    for i in 1..=n {
        for tt in 1..=t {
            values.push(1.0);
            values.extend_from_slice(panel.regressors(i, tt));
        }
    }
    DesignMatrix {
        n_individuals: n,
        n_periods: t,
        n_covariates: p,
        values,
    }
}

/// The heterogeneous coefficient array `beta` with shape `(N, T, P)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    n_individuals: usize,
    n_periods: usize,
    n_covariates: usize,
    values: Vec<f64>,
}

impl CoefficientField {
    pub fn zeros(n_individuals: usize, n_periods: usize, n_covariates: usize) -> Self {
        Self {
            n_individuals,
            n_periods,
            n_covariates,
            values: vec![0.0; n_individuals * n_periods * n_covariates],
        }
    }

    pub fn from_values(
        n_individuals: usize,
        n_periods: usize,
        n_covariates: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != n_individuals * n_periods * n_covariates {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coefficient values, got {}",
                n_individuals * n_periods * n_covariates,
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(
                "coefficient field entries must be finite".into(),
            ));
        }
        Ok(Self {
            n_individuals,
            n_periods,
            n_covariates,
            values,
        })
    }

    /// Solver-internal constructor that skips the finiteness sweep; the
    /// ADMM loop checks its iterates explicitly.
    pub(crate) fn from_values_unchecked(
        n_individuals: usize,
        n_periods: usize,
        n_covariates: usize,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(values.len(), n_individuals * n_periods * n_covariates);
        Self {
            n_individuals,
            n_periods,
            n_covariates,
            values,
        }
    }

    pub fn n_individuals(&self) -> usize {
        self.n_individuals
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn n_covariates(&self) -> usize {
        self.n_covariates
    }

    #[inline]
    fn offset(&self, i: usize, t: usize) -> usize {
        ((i - 1) * self.n_periods + (t - 1)) * self.n_covariates
    }

    /// `beta_it`, length `P`.
    #[inline]
    pub fn cell(&self, i: usize, t: usize) -> &[f64] {
        let o = self.offset(i, t);
        &self.values[o..o + self.n_covariates]
    }

    #[inline]
    pub fn cell_mut(&mut self, i: usize, t: usize) -> &mut [f64] {
        let o = self.offset(i, t);
        let p = self.n_covariates;
        &mut self.values[o..o + p]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_individuals == other.n_individuals
            && self.n_periods == other.n_periods
            && self.n_covariates == other.n_covariates
    }

    /// Entrywise sup-norm distance, used as the iterate-change criterion.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        debug_assert!(self.same_shape(other));
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// One cross-sectional pair `(i, j)` at period `t`, with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndividualPair {
    pub i: usize,
    pub j: usize,
    pub t: usize,
}

/// One temporal pair `(t, t')` for individual `i`, with `t < t'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodPair {
    pub i: usize,
    pub t: usize,
    pub t_prime: usize,
}

/// Deterministic (lexicographic) enumeration of all pairwise differences.
///
/// `individual_pairs` has `T * N(N-1)/2` entries ordered by `(i, j, t)`;
/// `period_pairs` has `N * T(T-1)/2` entries ordered by `(i, t, t')`.
#[derive(Debug, Clone)]
pub struct FusionIndex {
    n_individuals: usize,
    n_periods: usize,
    pub individual_pairs: Vec<IndividualPair>,
    pub period_pairs: Vec<PeriodPair>,
    /// Flat row-major cell ids per individual pair, for the solver's hot
    /// loops.
    pub(crate) individual_cells: Vec<(u32, u32)>,
    pub(crate) period_cells: Vec<(u32, u32)>,
}

impl FusionIndex {
    pub fn n_individuals(&self) -> usize {
        self.n_individuals
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }
}

/// Enumerates both pair lists for an `N x T` lattice.
pub fn build_fusion_index(n_individuals: usize, n_periods: usize) -> Result<FusionIndex> {
    if n_individuals < 2 || n_periods < 2 {
        return Err(Error::InvalidArgument(format!(
            "fusion index needs N >= 2 and T >= 2, got N={n_individuals}, T={n_periods}"
        )));
    }
    let n = n_individuals;
    let t = n_periods;
    let mut individual_pairs = Vec::with_capacity(t * n * (n - 1) / 2);
    for i in 1..=n {
        for j in (i + 1)..=n {
            for tt in 1..=t {
                individual_pairs.push(IndividualPair { i, j, t: tt });
            }
        }
    }
    let mut period_pairs = Vec::with_capacity(n * t * (t - 1) / 2);
    for i in 1..=n {
        for tt in 1..=t {
            for tp in (tt + 1)..=t {
                period_pairs.push(PeriodPair {
                    i,
                    t: tt,
                    t_prime: tp,
                });
            }
        }
    }
    let cell = |i: usize, tt: usize| ((i - 1) * t + (tt - 1)) as u32;
    let individual_cells = individual_pairs
        .iter()
        .map(|p| (cell(p.i, p.t), cell(p.j, p.t)))
        .collect();
    let period_cells = period_pairs
        .iter()
        .map(|p| (cell(p.i, p.t), cell(p.i, p.t_prime)))
        .collect();
    Ok(FusionIndex {
        n_individuals,
        n_periods,
        individual_pairs,
        period_pairs,
        individual_cells,
        period_cells,
    })
}

/// Flat storage for one `P`-vector per pair (used for rho, delta and the
/// dual variables).
#[derive(Debug, Clone, PartialEq)]
pub struct PairValues {
    dim: usize,
    values: Vec<f64>,
}

impl PairValues {
    pub fn zeros(n_pairs: usize, dim: usize) -> Self {
        Self {
            dim,
            values: vec![0.0; n_pairs * dim],
        }
    }

    pub fn n_pairs(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.values.len() / self.dim
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn pair(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn pair_mut(&mut self, k: usize) -> &mut [f64] {
        let d = self.dim;
        &mut self.values[k * d..(k + 1) * d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Evaluates all pairwise differences of a coefficient field: the entry for
/// `(i, j, t)` is `beta_it - beta_jt`, the entry for `(i, t, t')` is
/// `beta_it - beta_it'`.
pub fn fused_differences(
    beta: &CoefficientField,
    idx: &FusionIndex,
) -> (PairValues, PairValues) {
    let p = beta.n_covariates();
    let values = beta.values();
    let mut ind = PairValues::zeros(idx.individual_pairs.len(), p);
    for (out, &(a, b)) in ind
        .values_mut()
        .chunks_exact_mut(p)
        .zip(&idx.individual_cells)
    {
        let a = &values[a as usize * p..a as usize * p + p];
        let b = &values[b as usize * p..b as usize * p + p];
        for q in 0..p {
            out[q] = a[q] - b[q];
        }
    }
    let mut per = PairValues::zeros(idx.period_pairs.len(), p);
    for (out, &(a, b)) in per
        .values_mut()
        .chunks_exact_mut(p)
        .zip(&idx.period_cells)
    {
        let a = &values[a as usize * p..a as usize * p + p];
        let b = &values[b as usize * p..b as usize * p + p];
        for q in 0..p {
            out[q] = a[q] - b[q];
        }
    }
    (ind, per)
}

/// A mutually exclusive, exhaustive assignment of lattice cells to blocks,
/// together with one coefficient vector per block.
///
/// Labels are contiguous `1..=L` and ordered by each block's smallest cell
/// in row-major `(i, t)` order, so two partitions of the same lattice are
/// structurally equal iff their label arrays are equal.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPartition {
    n_individuals: usize,
    n_periods: usize,
    n_blocks: usize,
    assignment: Vec<usize>,
    block_values: Vec<Vec<f64>>,
}

impl BlockPartition {
    /// Validates a pre-canonicalized partition.
    pub fn new(
        n_individuals: usize,
        n_periods: usize,
        assignment: Vec<usize>,
        block_values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let cells = n_individuals * n_periods;
        if assignment.len() != cells {
            return Err(Error::DimensionMismatch(format!(
                "expected {cells} cell labels, got {}",
                assignment.len()
            )));
        }
        let n_blocks = block_values.len();
        if n_blocks == 0 {
            return Err(Error::InvalidArgument("partition needs at least one block".into()));
        }
        let mut seen = vec![false; n_blocks];
        let mut next_expected = 1;
        for &label in &assignment {
            if label == 0 || label > n_blocks {
                return Err(Error::InvalidArgument(format!(
                    "cell label {label} outside 1..={n_blocks}"
                )));
            }
            if !seen[label - 1] {
                if label != next_expected {
                    return Err(Error::InvalidArgument(
                        "block labels must be ordered by first appearance".into(),
                    ));
                }
                seen[label - 1] = true;
                next_expected += 1;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument(
                "every block label must be used by at least one cell".into(),
            ));
        }
        let dim = block_values[0].len();
        if block_values.iter().any(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch(
                "block coefficient vectors must share one dimension".into(),
            ));
        }
        if block_values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "block coefficient values must be finite".into(),
            ));
        }
        Ok(Self {
            n_individuals,
            n_periods,
            n_blocks,
            assignment,
            block_values,
        })
    }

    /// Builds a canonical partition from arbitrary raw labels: blocks are
    /// renumbered `1..=L` in order of first appearance over row-major cells,
    /// and `value_of` supplies each raw label's coefficient vector.
    pub fn from_raw_labels(
        n_individuals: usize,
        n_periods: usize,
        raw_labels: &[usize],
        mut value_of: impl FnMut(usize) -> Vec<f64>,
    ) -> Result<Self> {
        let cells = n_individuals * n_periods;
        if raw_labels.len() != cells {
            return Err(Error::DimensionMismatch(format!(
                "expected {cells} raw labels, got {}",
                raw_labels.len()
            )));
        }
        let mut relabel: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
        let mut assignment = Vec::with_capacity(cells);
        let mut block_values = Vec::new();
        for &raw in raw_labels {
            let next = relabel.len() + 1;
            let label = *relabel.entry(raw).or_insert_with(|| {
                block_values.push(value_of(raw));
                next
            });
            assignment.push(label);
        }
        Self::new(n_individuals, n_periods, assignment, block_values)
    }

    pub fn n_individuals(&self) -> usize {
        self.n_individuals
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    /// Block label of cell `(i, t)`, in `1..=n_blocks`.
    #[inline]
    pub fn label(&self, i: usize, t: usize) -> usize {
        self.assignment[(i - 1) * self.n_periods + (t - 1)]
    }

    /// Row-major label array.
    pub fn labels(&self) -> &[usize] {
        &self.assignment
    }

    /// Coefficient vector of block `l` (1-based).
    pub fn block_value(&self, l: usize) -> &[f64] {
        &self.block_values[l - 1]
    }

    pub fn block_values(&self) -> &[Vec<f64>] {
        &self.block_values
    }

    /// Number of cells in block `l` (1-based).
    pub fn block_size(&self, l: usize) -> usize {
        self.assignment.iter().filter(|&&x| x == l).count()
    }

    /// True when both partitions group cells identically, ignoring the
    /// block coefficient values.
    pub fn same_blocks(&self, other: &Self) -> bool {
        self.n_individuals == other.n_individuals
            && self.n_periods == other.n_periods
            && self.assignment == other.assignment
    }

    /// Expands the per-block vectors into a full coefficient field.
    pub fn expand(&self) -> CoefficientField {
        let p = self.block_values[0].len();
        let mut field = CoefficientField::zeros(self.n_individuals, self.n_periods, p);
        for i in 1..=self.n_individuals {
            for t in 1..=self.n_periods {
                let l = self.label(i, t);
                field.cell_mut(i, t).copy_from_slice(&self.block_values[l - 1]);
            }
        }
        field
    }
}
