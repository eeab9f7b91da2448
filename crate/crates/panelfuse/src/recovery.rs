//! Block-structure recovery from a converged ADMM state, the post (pooled
//! within-block OLS) estimator, and chi-square inference on block
//! coefficients.
//!
//! Equality of cells is read off the fused auxiliary variables: the
//! proximal operators set `rho`/`delta` to exactly zero for fused pairs, so
//! the zero pattern defines a graph on the lattice whose connected
//! components are the recovered blocks. Because `delta` spans all `t < t'`
//! pairs (not only adjacent ones), cohorts of nonadjacent periods merge
//! automatically.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::ContinuousCDF;

use crate::admm::FusedState;
use crate::error::{Error, Result};
use crate::panel::{BlockPartition, CoefficientField, DesignMatrix, FusionIndex, PanelData};

/// Fused-norm tolerance below which a pair counts as exactly merged;
/// absorbs floating-point residue on top of the prox operators' exact
/// zeros.
pub const DEFAULT_TOL_FUSE: f64 = 1e-6;

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(len: usize) -> Self {
        Self {
            parent: (0..len).collect(),
            size: vec![1; len],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Groups lattice cells into blocks: cells are connected whenever the
/// fused variable of a pair containing them has norm at most `tol_fuse`.
/// Each block's coefficient vector is the mean of `beta` over its cells.
pub fn recover_blocks(state: &FusedState, idx: &FusionIndex, tol_fuse: f64) -> BlockPartition {
    let n = idx.n_individuals();
    let t = idx.n_periods();
    let p = state.beta.n_covariates();
    let cell = |i: usize, tt: usize| (i - 1) * t + (tt - 1);

    let mut uf = UnionFind::new(n * t);
    for (k, pair) in idx.individual_pairs.iter().enumerate() {
        let norm: f64 = state.rho.pair(k).iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= tol_fuse {
            uf.union(cell(pair.i, pair.t), cell(pair.j, pair.t));
        }
    }
    for (k, pair) in idx.period_pairs.iter().enumerate() {
        let norm: f64 = state.delta.pair(k).iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= tol_fuse {
            uf.union(cell(pair.i, pair.t), cell(pair.i, pair.t_prime));
        }
    }

    let roots: Vec<usize> = (0..n * t).map(|c| uf.find(c)).collect();
    let mut sums: std::collections::HashMap<usize, (Vec<f64>, usize)> =
        std::collections::HashMap::new();
    for i in 1..=n {
        for tt in 1..=t {
            let entry = sums
                .entry(roots[cell(i, tt)])
                .or_insert_with(|| (vec![0.0; p], 0));
            for (s, v) in entry.0.iter_mut().zip(state.beta.cell(i, tt)) {
                *s += v;
            }
            entry.1 += 1;
        }
    }

    BlockPartition::from_raw_labels(n, t, &roots, |root| {
        let (sum, count) = &sums[&root];
        sum.iter().map(|v| v / *count as f64).collect()
    })
    .expect("connected components always form a valid partition")
}

/// Symmetric block-diagonal covariance of the stacked block coefficients,
/// stored row-major with dimension `L * P`.
#[derive(Debug, Clone)]
pub struct Covariance {
    dim: usize,
    values: Vec<f64>,
}

impl Covariance {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.dim + col]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn from_values(dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "covariance needs {}x{} = {} entries, got {}",
                dim,
                dim,
                dim * dim,
                values.len()
            )));
        }
        Ok(Self { dim, values })
    }
}

/// Pooled within-block OLS refit on a recovered (or known) partition,
/// with the residual variance and the block-diagonal coefficient
/// covariance.
#[derive(Debug, Clone)]
pub struct PostEstimate {
    pub partition: BlockPartition,
    /// One coefficient vector per block, in block-label order.
    pub alpha: Vec<Vec<f64>>,
    /// `alpha` expanded back onto the lattice.
    pub beta: CoefficientField,
    /// Residual standard deviation estimate.
    pub sigma_hat: f64,
    pub covariance: Covariance,
}

impl PostEstimate {
    /// `alpha` flattened block-major, length `L * P`.
    pub fn alpha_flat(&self) -> Vec<f64> {
        self.alpha.iter().flatten().copied().collect()
    }

    pub fn sigma2_hat(&self) -> f64 {
        self.sigma_hat * self.sigma_hat
    }
}

/// Per-block pooled least squares: for each block, regress the block's
/// outcomes on its design rows. The residual variance uses
/// `NT - L * P` degrees of freedom.
pub fn post_estimate(
    panel: &PanelData,
    design: &DesignMatrix,
    partition: &BlockPartition,
) -> Result<PostEstimate> {
    let (n, t, p) = (
        panel.n_individuals(),
        panel.n_periods(),
        panel.n_covariates(),
    );
    if partition.n_individuals() != n || partition.n_periods() != t {
        return Err(Error::DimensionMismatch(
            "partition lattice does not match the panel".into(),
        ));
    }
    let l = partition.n_blocks();
    let observations = n * t;
    let parameters = l * p;
    if observations <= parameters {
        return Err(Error::InsufficientDof {
            observations,
            parameters,
        });
    }

    let mut grams = vec![DMatrix::<f64>::zeros(p, p); l];
    let mut rhs = vec![DVector::<f64>::zeros(p); l];
    let mut counts = vec![0usize; l];
    for i in 1..=n {
        for tt in 1..=t {
            let label = partition.label(i, tt) - 1;
            let x = design.row(i, tt);
            let y = panel.outcome(i, tt);
            counts[label] += 1;
            for q in 0..p {
                rhs[label][q] += x[q] * y;
                for r in 0..p {
                    grams[label][(q, r)] += x[q] * x[r];
                }
            }
        }
    }

    let mut alpha = Vec::with_capacity(l);
    let mut cov = vec![0.0; parameters * parameters];
    let mut gram_inverses = Vec::with_capacity(l);
    for (b, gram) in grams.into_iter().enumerate() {
        let chol = gram.cholesky().ok_or(Error::SingularBlockGram {
            block: b + 1,
            cells: counts[b],
            coefficients: p,
        })?;
        alpha.push(chol.solve(&rhs[b]).as_slice().to_vec());
        gram_inverses.push(chol.inverse());
    }

    let mut rss = 0.0;
    for i in 1..=n {
        for tt in 1..=t {
            let label = partition.label(i, tt) - 1;
            let x = design.row(i, tt);
            let fitted: f64 = (0..p).map(|q| x[q] * alpha[label][q]).sum();
            let r = panel.outcome(i, tt) - fitted;
            rss += r * r;
        }
    }
    let sigma2 = rss / (observations - parameters) as f64;
    let sigma_hat = sigma2.sqrt();

    for (b, inv) in gram_inverses.iter().enumerate() {
        for q in 0..p {
            for r in 0..p {
                let row = b * p + q;
                let col = b * p + r;
                cov[row * parameters + col] = sigma2 * inv[(q, r)];
            }
        }
    }

    let mut beta = CoefficientField::zeros(n, t, p);
    for i in 1..=n {
        for tt in 1..=t {
            let label = partition.label(i, tt) - 1;
            beta.cell_mut(i, tt).copy_from_slice(&alpha[label]);
        }
    }

    Ok(PostEstimate {
        partition: partition.clone(),
        alpha,
        beta,
        sigma_hat,
        covariance: Covariance {
            dim: parameters,
            values: cov,
        },
    })
}

/// A linear hypothesis `B alpha = 0` with `B` of full row rank `q`.
#[derive(Debug, Clone)]
pub struct HypothesisSpec {
    q: usize,
    dim: usize,
    rows: Vec<f64>,
}

impl HypothesisSpec {
    /// Validates shape and (numerically) full row rank.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let q = rows.len();
        if q == 0 {
            return Err(Error::InvalidArgument(
                "contrast matrix needs at least one row".into(),
            ));
        }
        let dim = rows[0].len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch(
                "contrast rows must share one positive length".into(),
            ));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "contrast entries must be finite".into(),
            ));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let m = DMatrix::from_row_slice(q, dim, &flat);
        let svd = m.clone().svd(false, false);
        let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&s| s > max_sv * 1e-10)
            .count();
        if rank < q {
            return Err(Error::InvalidArgument(format!(
                "contrast matrix has rank {rank} < {q}; rows are linearly dependent"
            )));
        }
        Ok(Self { q, dim, rows: flat })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.q, self.dim, &self.rows)
    }
}

/// Result of the chi-square block-coefficient test.
#[derive(Debug, Clone, Copy)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn quadratic_form(est: &PostEstimate, hyp: &HypothesisSpec, center: &[f64]) -> Result<f64> {
    let dim = est.covariance.dim();
    if hyp.dim() != dim {
        return Err(Error::DimensionMismatch(format!(
            "contrast has {} columns but the estimate stacks {} coefficients",
            hyp.dim(),
            dim
        )));
    }
    let b = hyp.matrix();
    let v = DMatrix::from_row_slice(dim, dim, est.covariance.values());
    let alpha = DVector::from_vec(est.alpha_flat());
    let target = &b * alpha - DVector::from_column_slice(center);
    let middle = &b * v * b.transpose();
    let chol = middle
        .cholesky()
        .ok_or_else(|| Error::SingularSystem("contrast covariance B V B^T".into()))?;
    let solved = chol.solve(&target);
    Ok(target.dot(&solved).max(0.0))
}

/// Chi-square statistic for `H0: B alpha = 0` with its upper-tail p-value.
pub fn chi_square_test(est: &PostEstimate, hyp: &HypothesisSpec) -> Result<ChiSquareTest> {
    let statistic = quadratic_form(est, hyp, &vec![0.0; hyp.q()])?;
    Ok(ChiSquareTest {
        statistic,
        dof: hyp.q(),
        p_value: chi_square_upper_tail(hyp.q(), statistic),
    })
}

/// Membership test of `iota` in the `100(1 - tau)%` confidence region for
/// `B alpha`.
pub fn confidence_region_contains(
    est: &PostEstimate,
    hyp: &HypothesisSpec,
    iota: &[f64],
    tau: f64,
) -> Result<bool> {
    if iota.len() != hyp.q() {
        return Err(Error::DimensionMismatch(format!(
            "expected {} target values, got {}",
            hyp.q(),
            iota.len()
        )));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tau must lie in (0, 1), got {tau}"
        )));
    }
    let value = quadratic_form(est, hyp, iota)?;
    Ok(value <= chi_square_quantile(hyp.q(), 1.0 - tau))
}

/// Upper-tail probability of the chi-square distribution with `dof`
/// degrees of freedom, via the regularized upper incomplete gamma
/// function.
pub fn chi_square_upper_tail(dof: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    statrs::function::gamma::gamma_ur(dof as f64 / 2.0, x / 2.0)
}

/// `p`-quantile of the chi-square distribution with `dof` degrees of
/// freedom.
pub fn chi_square_quantile(dof: usize, p: f64) -> f64 {
    statrs::distribution::ChiSquared::new(dof as f64)
        .expect("dof >= 1")
        .inverse_cdf(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admm::FusedState;
    use crate::panel::{build_design, build_fusion_index, PairValues};
    use approx::assert_relative_eq;

    fn state_with(
        n: usize,
        t: usize,
        p: usize,
        idx: &FusionIndex,
        rho_values: impl Fn(usize) -> f64,
        delta_values: impl Fn(usize) -> f64,
    ) -> FusedState {
        let mut rho = PairValues::zeros(idx.individual_pairs.len(), p);
        for k in 0..rho.n_pairs() {
            rho.pair_mut(k)[0] = rho_values(k);
        }
        let mut delta = PairValues::zeros(idx.period_pairs.len(), p);
        for k in 0..delta.n_pairs() {
            delta.pair_mut(k)[0] = delta_values(k);
        }
        FusedState {
            beta: CoefficientField::zeros(n, t, p),
            rho,
            delta,
            nu: PairValues::zeros(idx.individual_pairs.len(), p),
            upsilon: PairValues::zeros(idx.period_pairs.len(), p),
            iteration: 1,
            primal_residual: 0.0,
        }
    }

    #[test]
    fn all_fused_gives_single_block() {
        let idx = build_fusion_index(3, 3).unwrap();
        let state = state_with(3, 3, 1, &idx, |_| 0.0, |_| 0.0);
        let part = recover_blocks(&state, &idx, DEFAULT_TOL_FUSE);
        assert_eq!(part.n_blocks(), 1);
    }

    #[test]
    fn nothing_fused_gives_singletons() {
        let idx = build_fusion_index(3, 3).unwrap();
        let state = state_with(3, 3, 1, &idx, |_| 1.0, |_| 1.0);
        let part = recover_blocks(&state, &idx, DEFAULT_TOL_FUSE);
        assert_eq!(part.n_blocks(), 9);
    }

    #[test]
    fn hand_case_two_by_two() {
        // rho zero only for (1,2,t=1); delta zero only for (i=2, 1, 2):
        // components {(1,1),(2,1),(2,2)} and {(1,2)}
        let idx = build_fusion_index(2, 2).unwrap();
        let state = state_with(
            2,
            2,
            1,
            &idx,
            |k| if k == 0 { 0.0 } else { 1.0 },
            |k| if k == 1 { 0.0 } else { 1.0 },
        );
        // pair order check: individual pairs [(1,2,1), (1,2,2)],
        // period pairs [(1,1,2), (2,1,2)]
        assert_eq!(idx.individual_pairs[0].t, 1);
        assert_eq!(idx.period_pairs[1].i, 2);

        let part = recover_blocks(&state, &idx, DEFAULT_TOL_FUSE);
        assert_eq!(part.n_blocks(), 2);
        assert_eq!(part.label(1, 1), 1);
        assert_eq!(part.label(2, 1), 1);
        assert_eq!(part.label(2, 2), 1);
        assert_eq!(part.label(1, 2), 2);
    }

    #[test]
    fn recovered_labels_form_partition() {
        let idx = build_fusion_index(4, 3).unwrap();
        let state = state_with(4, 3, 1, &idx, |k| (k % 3) as f64, |k| ((k + 1) % 2) as f64);
        let part = recover_blocks(&state, &idx, 0.5);
        let mut seen = vec![0usize; part.n_blocks()];
        for &l in part.labels() {
            assert!(l >= 1 && l <= part.n_blocks());
            seen[l - 1] += 1;
        }
        assert_eq!(seen.iter().sum::<usize>(), 12);
        assert!(seen.iter().all(|&c| c > 0));
    }

    #[test]
    fn tolerance_stable_inside_gap() {
        // nonzero norms are all >= 0.9; zeros are exact, so any tolerance
        // in (0, 0.9) recovers the same partition
        let idx = build_fusion_index(3, 3).unwrap();
        let state = state_with(
            3,
            3,
            1,
            &idx,
            |k| if k % 2 == 0 { 0.0 } else { 0.9 },
            |k| if k % 3 == 0 { 0.0 } else { 1.4 },
        );
        let base = recover_blocks(&state, &idx, 1e-9);
        for tol in [1e-7, 1e-4, 0.1, 0.89] {
            assert!(base.same_blocks(&recover_blocks(&state, &idx, tol)));
        }
    }

    fn two_block_panel() -> (PanelData, DesignMatrix, BlockPartition) {
        // individuals 1..2 are block 1, 3..4 block 2; noiseless
        let n = 4;
        let t = 3;
        let alpha = [[1.0, -0.5], [2.0, 0.75]];
        let mut y = Vec::new();
        let mut z = Vec::new();
        let mut labels = Vec::new();
        for i in 1..=n {
            let block = if i <= 2 { 0 } else { 1 };
            for tt in 1..=t {
                let zv = ((i * 5 + tt * 3) as f64 * 0.73).sin() * 2.0;
                z.push(zv);
                y.push(alpha[block][0] + zv * alpha[block][1]);
                labels.push(block + 1);
            }
        }
        let panel = PanelData::new(n, t, 2, y, z).unwrap();
        let design = build_design(&panel);
        let part = BlockPartition::new(
            n,
            t,
            labels,
            vec![alpha[0].to_vec(), alpha[1].to_vec()],
        )
        .unwrap();
        (panel, design, part)
    }

    #[test]
    fn noiseless_post_estimate_is_exact() {
        let (panel, design, part) = two_block_panel();
        let est = post_estimate(&panel, &design, &part).unwrap();
        assert_relative_eq!(est.alpha[0][0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(est.alpha[0][1], -0.5, epsilon = 1e-10);
        assert_relative_eq!(est.alpha[1][0], 2.0, epsilon = 1e-10);
        assert_relative_eq!(est.alpha[1][1], 0.75, epsilon = 1e-10);
        assert!(est.sigma_hat < 1e-10);
        // expanded field honors the assignment
        for i in 1..=4 {
            for t in 1..=3 {
                let l = est.partition.label(i, t);
                assert_eq!(est.beta.cell(i, t), est.alpha[l - 1].as_slice());
            }
        }
    }

    #[test]
    fn single_block_intercept_only_is_grand_mean() {
        let y = vec![1.0, 2.0, 3.0, 4.0, 5.0, 7.0];
        let panel = PanelData::new(2, 3, 1, y.clone(), vec![]).unwrap();
        let design = build_design(&panel);
        let part = BlockPartition::new(2, 3, vec![1; 6], vec![vec![0.0]]).unwrap();
        let est = post_estimate(&panel, &design, &part).unwrap();
        let mean = y.iter().sum::<f64>() / 6.0;
        assert_relative_eq!(est.alpha[0][0], mean, epsilon = 1e-12);
    }

    /// Independent normal-equations oracle for one block.
    fn ols_oracle(xs: &[Vec<f64>], ys: &[f64]) -> Vec<f64> {
        let p = xs[0].len();
        let mut gram = DMatrix::<f64>::zeros(p, p);
        let mut rhs = DVector::<f64>::zeros(p);
        for (x, &y) in xs.iter().zip(ys) {
            for q in 0..p {
                rhs[q] += x[q] * y;
                for r in 0..p {
                    gram[(q, r)] += x[q] * x[r];
                }
            }
        }
        gram.lu().solve(&rhs).unwrap().as_slice().to_vec()
    }

    #[test]
    fn post_estimate_matches_per_block_ols_oracle() {
        let (panel, design, part) = two_block_panel();
        // perturb outcomes so the fit is no longer exact
        let mut y = panel.outcomes().to_vec();
        for (k, v) in y.iter_mut().enumerate() {
            *v += ((k * 31) as f64 * 0.17).sin() * 0.3;
        }
        let mut z = Vec::new();
        for i in 1..=4 {
            for t in 1..=3 {
                z.extend_from_slice(panel.regressors(i, t));
            }
        }
        let panel = PanelData::new(4, 3, 2, y, z).unwrap();
        let est = post_estimate(&panel, &design, &part).unwrap();

        for block in 1..=2 {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for i in 1..=4 {
                for t in 1..=3 {
                    if part.label(i, t) == block {
                        xs.push(design.row(i, t).to_vec());
                        ys.push(panel.outcome(i, t));
                    }
                }
            }
            let oracle = ols_oracle(&xs, &ys);
            for q in 0..2 {
                assert_relative_eq!(est.alpha[block - 1][q], oracle[q], epsilon = 1e-10);
            }
            // within-block residuals orthogonal to the block's regressors
            for q in 0..2 {
                let mut dot = 0.0;
                for (x, &yv) in xs.iter().zip(&ys) {
                    let fitted: f64 =
                        (0..2).map(|r| x[r] * est.alpha[block - 1][r]).sum();
                    dot += x[q] * (yv - fitted);
                }
                assert!(dot.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn post_estimate_rejects_singular_block() {
        // one block holds a single cell but P = 2
        let (panel, design, _) = two_block_panel();
        let mut labels = vec![1usize; 12];
        labels[0] = 2;
        let labels: Vec<usize> = labels
            .iter()
            .map(|&l| if l == 2 { 1 } else { 2 })
            .collect(); // cell (1,1) first => label 1 singleton
        let part =
            BlockPartition::new(4, 3, labels, vec![vec![0.0; 2], vec![0.0; 2]]).unwrap();
        match post_estimate(&panel, &design, &part) {
            Err(Error::SingularBlockGram { block, cells, .. }) => {
                assert_eq!(block, 1);
                assert_eq!(cells, 1);
            }
            other => panic!("expected singular block error, got {other:?}"),
        }
    }

    #[test]
    fn post_estimate_rejects_insufficient_dof() {
        let y = vec![1.0, 2.0, 3.0, 4.0];
        let panel = PanelData::new(2, 2, 2, y, vec![0.5; 4]).unwrap();
        let design = build_design(&panel);
        let part = BlockPartition::new(
            2,
            2,
            vec![1, 1, 2, 2],
            vec![vec![0.0; 2], vec![0.0; 2]],
        )
        .unwrap();
        assert!(matches!(
            post_estimate(&panel, &design, &part),
            Err(Error::InsufficientDof { .. })
        ));
    }

    fn noisy_two_block_estimate() -> PostEstimate {
        let (panel, design, part) = two_block_panel();
        let mut y = panel.outcomes().to_vec();
        for (k, v) in y.iter_mut().enumerate() {
            *v += ((k * 7) as f64).sin() * 0.4;
        }
        let mut z = Vec::new();
        for i in 1..=4 {
            for t in 1..=3 {
                z.extend_from_slice(panel.regressors(i, t));
            }
        }
        let panel = PanelData::new(4, 3, 2, y, z).unwrap();
        post_estimate(&panel, &design, &part).unwrap()
    }

    #[test]
    fn chi_square_null_point_gives_zero_statistic() {
        let est = noisy_two_block_estimate();
        let a = est.alpha_flat();
        // row orthogonal to alpha by construction: (a1, -a0, 0, 0)
        let hyp = HypothesisSpec::new(vec![vec![a[1], -a[0], 0.0, 0.0]]).unwrap();
        let test = chi_square_test(&est, &hyp).unwrap();
        assert!(test.statistic < 1e-18);
        assert_relative_eq!(test.p_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn chi_square_selector_equals_squared_ratio() {
        let est = noisy_two_block_estimate();
        for j in 0..4 {
            let mut row = vec![0.0; 4];
            row[j] = 1.0;
            let hyp = HypothesisSpec::new(vec![row]).unwrap();
            let test = chi_square_test(&est, &hyp).unwrap();
            let se = est.covariance.get(j, j).sqrt();
            let ratio = est.alpha_flat()[j] / se;
            assert_relative_eq!(test.statistic, ratio * ratio, max_relative = 1e-10);
            assert_eq!(test.dof, 1);
        }
    }

    #[test]
    fn chi_square_block_difference_on_separated_fit() {
        // noiseless two-block fit, tiny noise for a positive sigma
        let (panel, design, part) = two_block_panel();
        let mut y = panel.outcomes().to_vec();
        for (k, v) in y.iter_mut().enumerate() {
            *v += ((k * 13) as f64).sin() * 1e-4;
        }
        let mut z = Vec::new();
        for i in 1..=4 {
            for t in 1..=3 {
                z.extend_from_slice(panel.regressors(i, t));
            }
        }
        let panel = PanelData::new(4, 3, 2, y, z).unwrap();
        let est = post_estimate(&panel, &design, &part).unwrap();
        let hyp = HypothesisSpec::new(vec![
            vec![1.0, 0.0, -1.0, 0.0],
            vec![0.0, 1.0, 0.0, -1.0],
        ])
        .unwrap();
        let test = chi_square_test(&est, &hyp).unwrap();
        assert!(test.statistic > 1e6);
        assert!(test.p_value < 1e-10);
    }

    #[test]
    fn chi_square_invariant_under_row_scaling() {
        let est = noisy_two_block_estimate();
        let hyp = HypothesisSpec::new(vec![vec![1.0, 2.0, -1.0, 0.5]]).unwrap();
        let scaled = HypothesisSpec::new(vec![vec![37.0, 74.0, -37.0, 18.5]]).unwrap();
        let a = chi_square_test(&est, &hyp).unwrap();
        let b = chi_square_test(&est, &scaled).unwrap();
        assert_relative_eq!(a.statistic, b.statistic, max_relative = 1e-10);
    }

    #[test]
    fn hypothesis_rejects_rank_deficient_rows() {
        assert!(HypothesisSpec::new(vec![
            vec![1.0, 0.0, -1.0, 0.0],
            vec![2.0, 0.0, -2.0, 0.0],
        ])
        .is_err());
    }

    #[test]
    fn confidence_region_center_and_degenerate_tau() {
        let est = noisy_two_block_estimate();
        let hyp = HypothesisSpec::new(vec![vec![0.0, 1.0, 0.0, 0.0]]).unwrap();
        let center = hyp.matrix() * DVector::from_vec(est.alpha_flat());
        for tau in [0.5, 0.05, 1e-6] {
            assert!(confidence_region_contains(&est, &hyp, center.as_slice(), tau).unwrap());
        }
        // tau near 1 shrinks the region to (almost) the center alone
        let off = [center[0] + 1e-3];
        assert!(!confidence_region_contains(&est, &hyp, &off, 1.0 - 1e-9).unwrap());
    }

    #[test]
    fn scalar_region_matches_normal_interval() {
        let est = noisy_two_block_estimate();
        let j = 2;
        let mut row = vec![0.0; 4];
        row[j] = 1.0;
        let hyp = HypothesisSpec::new(vec![row]).unwrap();
        let se = est.covariance.get(j, j).sqrt();
        let center = est.alpha_flat()[j];
        // z quantile at 97.5%
        let z = 1.959_963_984_540_054;
        let inside = center + (z - 1e-6) * se;
        let outside = center + (z + 1e-6) * se;
        assert!(confidence_region_contains(&est, &hyp, &[inside], 0.05).unwrap());
        assert!(!confidence_region_contains(&est, &hyp, &[outside], 0.05).unwrap());
        let inside = center - (z - 1e-6) * se;
        let outside = center - (z + 1e-6) * se;
        assert!(confidence_region_contains(&est, &hyp, &[inside], 0.05).unwrap());
        assert!(!confidence_region_contains(&est, &hyp, &[outside], 0.05).unwrap());
    }
}
