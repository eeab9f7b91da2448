//! Structured linear solves for the coefficient update.
//!
//! The normal operator is `X^T X + psi * Omega^T Omega + phi * Phi^T Phi`.
//! Its matvec never touches a pair list: `X^T X` acts cell-wise as rank-one
//! blocks `x_it x_it^T`, the individual-fusion part acts per period as
//! `psi * (N * v_it - sum_j v_jt)` and the period-fusion part per individual
//! as `phi * (T * v_it - sum_t' v_it')`, which is the Kronecker identity
//! `E^T E = N I - 1 1^T` (and its temporal twin) applied directly. One
//! application costs `O(NTP)`.
//!
//! The default path is a preconditioned conjugate gradient on this
//! operator. The preconditioner exploits the fusion part's exact
//! eigenstructure: on each coefficient component the lattice splits into
//! grand mean, row deviations, column deviations and the double-centered
//! residual, with fusion eigenvalues `0`, `psi*N`, `phi*T` and
//! `psi*N + phi*T`; `(A + c I)^{-1}` is therefore a four-way projection
//! scaled per subspace, applied in `O(NTP)`. A dense assemble-and-factor
//! route is kept as a small-instance oracle. The fusion part alone
//! annihilates lattice-constant fields, so only the combined operator is
//! (generically) positive definite.

use crate::error::{Error, Result};
use crate::panel::{DesignMatrix, FusionIndex, PairValues, PanelData};

/// Matrix-free normal operator.
pub(crate) struct NormalOperator<'a> {
    design: &'a DesignMatrix,
    psi: f64,
    phi: f64,
}

impl<'a> NormalOperator<'a> {
    pub(crate) fn new(design: &'a DesignMatrix, psi: f64, phi: f64) -> Self {
        Self { design, psi, phi }
    }

    fn dims(&self) -> (usize, usize, usize) {
        (
            self.design.n_individuals(),
            self.design.n_periods(),
            self.design.n_covariates(),
        )
    }

    pub(crate) fn len(&self) -> usize {
        let (n, t, p) = self.dims();
        n * t * p
    }

    /// `out = (X^T X + psi Omega^T Omega + phi Phi^T Phi) v`.
    pub(crate) fn apply(&self, v: &[f64], out: &mut [f64]) {
        let (n, t, p) = self.dims();
        let mut scratch = Scratch::new(n, t, p);
        self.apply_with_scratch(v, out, &mut scratch);
    }

    fn apply_with_scratch(&self, v: &[f64], out: &mut [f64], scratch: &mut Scratch) {
        let (n, t, p) = self.dims();
        debug_assert_eq!(v.len(), n * t * p);

        scratch.period_sums.iter_mut().for_each(|s| *s = 0.0);
        scratch.individual_sums.iter_mut().for_each(|s| *s = 0.0);
        for i in 0..n {
            for tt in 0..t {
                let base = (i * t + tt) * p;
                for q in 0..p {
                    scratch.period_sums[tt * p + q] += v[base + q];
                    scratch.individual_sums[i * p + q] += v[base + q];
                }
            }
        }

        let nf = n as f64;
        let tf = t as f64;
        for i in 0..n {
            for tt in 0..t {
                let base = (i * t + tt) * p;
                let x = self.design.row(i + 1, tt + 1);
                let dot: f64 = (0..p).map(|q| x[q] * v[base + q]).sum();
                for q in 0..p {
                    let fusion = self.psi * (nf * v[base + q] - scratch.period_sums[tt * p + q])
                        + self.phi * (tf * v[base + q] - scratch.individual_sums[i * p + q]);
                    out[base + q] = x[q] * dot + fusion;
                }
            }
        }
    }

    /// Shift `c` for the spectral preconditioner `(A + c I)^{-1}`: the
    /// average diagonal entry of `X^T X`, floored away from zero.
    fn preconditioner_shift(&self) -> f64 {
        let (n, t, p) = self.dims();
        let mut trace = 0.0;
        for i in 1..=n {
            for tt in 1..=t {
                trace += self.design.row(i, tt).iter().map(|x| x * x).sum::<f64>();
            }
        }
        let mean = trace / (n * t * p) as f64;
        let scale = 1.0 + self.psi * n as f64 + self.phi * t as f64;
        mean.max(1e-8 * scale)
    }

    /// `out = (A + c I)^{-1} r` via the four-way lattice decomposition.
    fn apply_preconditioner(&self, c: f64, r: &[f64], out: &mut [f64], scratch: &mut Scratch) {
        let (n, t, p) = self.dims();
        let nf = n as f64;
        let tf = t as f64;
        let inv_mean = 1.0 / c;
        let inv_row = 1.0 / (c + self.psi * nf);
        let inv_col = 1.0 / (c + self.phi * tf);
        let inv_resid = 1.0 / (c + self.psi * nf + self.phi * tf);

        scratch.period_sums.iter_mut().for_each(|v| *v = 0.0);
        scratch.individual_sums.iter_mut().for_each(|v| *v = 0.0);
        let mut grand = vec![0.0; p];
        for i in 0..n {
            for tt in 0..t {
                let base = (i * t + tt) * p;
                for q in 0..p {
                    let v = r[base + q];
                    scratch.period_sums[tt * p + q] += v;
                    scratch.individual_sums[i * p + q] += v;
                    grand[q] += v;
                }
            }
        }
        for g in grand.iter_mut() {
            *g /= nf * tf;
        }
        for i in 0..n {
            for tt in 0..t {
                let base = (i * t + tt) * p;
                for q in 0..p {
                    let mean = grand[q];
                    let row = scratch.individual_sums[i * p + q] / tf - mean;
                    let col = scratch.period_sums[tt * p + q] / nf - mean;
                    let resid = r[base + q] - mean - row - col;
                    out[base + q] =
                        mean * inv_mean + row * inv_row + col * inv_col + resid * inv_resid;
                }
            }
        }
    }
}

/// Reusable buffers for operator and preconditioner applications.
pub(crate) struct Scratch {
    period_sums: Vec<f64>,
    individual_sums: Vec<f64>,
}

impl Scratch {
    fn new(n: usize, t: usize, p: usize) -> Self {
        Self {
            period_sums: vec![0.0; t * p],
            individual_sums: vec![0.0; n * p],
        }
    }
}

/// Reusable conjugate-gradient work vectors for repeated solves of the
/// same-sized system (one ADMM run does one solve per iteration).
pub(crate) struct CgWorkspace {
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Scratch,
}

impl CgWorkspace {
    pub(crate) fn new(n: usize, t: usize, p: usize) -> Self {
        let dim = n * t * p;
        Self {
            r: vec![0.0; dim],
            z: vec![0.0; dim],
            p: vec![0.0; dim],
            ap: vec![0.0; dim],
            rhs: vec![0.0; dim],
            scratch: Scratch::new(n, t, p),
        }
    }

    pub(crate) fn rhs_mut(&mut self) -> &mut Vec<f64> {
        &mut self.rhs
    }
}

/// Preconditioned conjugate gradient with an explicit final residual check.
/// Returns the solution vector; non-convergence surfaces as an error
/// carrying the iteration count and final relative residual.
pub(crate) fn solve_cg(
    op: &NormalOperator<'_>,
    rhs: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iterations: usize,
) -> Result<Vec<f64>> {
    let (n, t, p) = op.dims();
    let mut ws = CgWorkspace::new(n, t, p);
    solve_cg_with_workspace(op, rhs, x0, tol, max_iterations, &mut ws)
}

pub(crate) fn solve_cg_with_workspace(
    op: &NormalOperator<'_>,
    rhs: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iterations: usize,
    ws: &mut CgWorkspace,
) -> Result<Vec<f64>> {
    let n = op.len();
    debug_assert_eq!(rhs.len(), n);
    let rhs_norm = norm2(rhs);
    if rhs_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }

    let shift = op.preconditioner_shift();
    let mut x = match x0 {
        Some(init) => init.to_vec(),
        None => vec![0.0; n],
    };
    let (r, z, p, ap, scratch) = (&mut ws.r, &mut ws.z, &mut ws.p, &mut ws.ap, &mut ws.scratch);

    op.apply_with_scratch(&x, r, scratch);
    for k in 0..n {
        r[k] = rhs[k] - r[k];
    }

    let mut total_iterations = 0usize;
    // restart after convergence of the recursive residual to defeat drift
    for _restart in 0..4 {
        let mut r_norm = norm2(r);
        if r_norm <= tol * rhs_norm {
            return Ok(x);
        }
        op.apply_preconditioner(shift, r, z, scratch);
        p.copy_from_slice(z);
        let mut rz = dot(r, z);
        while total_iterations < max_iterations {
            total_iterations += 1;
            op.apply_with_scratch(p, ap, scratch);
            let pap = dot(p, ap);
            if !(pap > 0.0) {
                return Err(Error::SingularSystem(format!(
                    "conjugate gradient hit a non-positive curvature direction (p^T A p = {pap:.3e})"
                )));
            }
            let alpha = rz / pap;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            r_norm = norm2(r);
            if r_norm <= 0.5 * tol * rhs_norm {
                break;
            }
            op.apply_preconditioner(shift, r, z, scratch);
            let rz_next = dot(r, z);
            let beta = rz_next / rz;
            rz = rz_next;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        // recompute the true residual before trusting convergence
        op.apply_with_scratch(&x, r, scratch);
        for k in 0..n {
            r[k] = rhs[k] - r[k];
        }
        let true_norm = norm2(r);
        if true_norm <= tol * rhs_norm {
            return Ok(x);
        }
        if total_iterations >= max_iterations {
            return Err(Error::SolverDidNotConverge {
                iterations: total_iterations,
                residual: true_norm / rhs_norm,
            });
        }
    }
    op.apply_with_scratch(&x, ap, scratch);
    let res = rhs
        .iter()
        .zip(ap.iter())
        .map(|(b, a)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt();
    Err(Error::SolverDidNotConverge {
        iterations: total_iterations,
        residual: res / rhs_norm,
    })
}

/// Assembles the full `NTP x NTP` normal matrix and factors it. Intended
/// for small instances and as the oracle the Krylov path is tested against.
pub(crate) fn solve_dense(
    design: &DesignMatrix,
    idx: &FusionIndex,
    psi: f64,
    phi: f64,
    rhs: &[f64],
    ridge_epsilon: f64,
) -> Result<Vec<f64>> {
    let (n, t, p) = (
        design.n_individuals(),
        design.n_periods(),
        design.n_covariates(),
    );
    let dim = n * t * p;
    debug_assert_eq!(rhs.len(), dim);
    let mut h = nalgebra::DMatrix::<f64>::zeros(dim, dim);

    for i in 1..=n {
        for tt in 1..=t {
            let x = design.row(i, tt);
            let base = ((i - 1) * t + (tt - 1)) * p;
            for q in 0..p {
                for r in 0..p {
                    h[(base + q, base + r)] += x[q] * x[r];
                }
            }
        }
    }
    for pair in &idx.individual_pairs {
        let a = ((pair.i - 1) * t + (pair.t - 1)) * p;
        let b = ((pair.j - 1) * t + (pair.t - 1)) * p;
        for q in 0..p {
            h[(a + q, a + q)] += psi;
            h[(b + q, b + q)] += psi;
            h[(a + q, b + q)] -= psi;
            h[(b + q, a + q)] -= psi;
        }
    }
    for pair in &idx.period_pairs {
        let a = ((pair.i - 1) * t + (pair.t - 1)) * p;
        let b = ((pair.i - 1) * t + (pair.t_prime - 1)) * p;
        for q in 0..p {
            h[(a + q, a + q)] += phi;
            h[(b + q, b + q)] += phi;
            h[(a + q, b + q)] -= phi;
            h[(b + q, a + q)] -= phi;
        }
    }
    if ridge_epsilon > 0.0 {
        for k in 0..dim {
            h[(k, k)] += ridge_epsilon;
        }
    }

    let b = nalgebra::DVector::from_column_slice(rhs);
    let chol = h.cholesky().ok_or_else(|| {
        Error::SingularSystem(if ridge_epsilon > 0.0 {
            format!("dense normal matrix not positive definite (ridge_epsilon = {ridge_epsilon})")
        } else {
            "dense normal matrix not positive definite; consider a positive ridge_epsilon".into()
        })
    })?;
    Ok(chol.solve(&b).as_slice().to_vec())
}

/// Right-hand side `X^T Y + Omega^T (psi rho - nu) + Phi^T (phi delta - upsilon)`.
/// Passing `None` drops the fused/dual terms (the ridge initializer's case).
pub(crate) fn build_rhs(
    panel: &PanelData,
    design: &DesignMatrix,
    idx: &FusionIndex,
    psi: f64,
    phi: f64,
    fused: Option<(&PairValues, &PairValues, &PairValues, &PairValues)>,
) -> Vec<f64> {
    let (n, t, p) = (
        design.n_individuals(),
        design.n_periods(),
        design.n_covariates(),
    );
    let mut rhs = vec![0.0; n * t * p];
    build_rhs_into(panel, design, idx, psi, phi, fused, &mut rhs);
    rhs
}

pub(crate) fn build_rhs_into(
    panel: &PanelData,
    design: &DesignMatrix,
    idx: &FusionIndex,
    psi: f64,
    phi: f64,
    fused: Option<(&PairValues, &PairValues, &PairValues, &PairValues)>,
    rhs: &mut [f64],
) {
    let (n, t, p) = (
        design.n_individuals(),
        design.n_periods(),
        design.n_covariates(),
    );
    debug_assert_eq!(rhs.len(), n * t * p);
    for i in 1..=n {
        for tt in 1..=t {
            let x = design.row(i, tt);
            let y = panel.outcome(i, tt);
            let base = ((i - 1) * t + (tt - 1)) * p;
            for q in 0..p {
                rhs[base + q] = x[q] * y;
            }
        }
    }
    if let Some((rho, nu, delta, upsilon)) = fused {
        for ((&(a, b), r), v) in idx
            .individual_cells
            .iter()
            .zip(rho.values().chunks_exact(p))
            .zip(nu.values().chunks_exact(p))
        {
            let (a, b) = (a as usize * p, b as usize * p);
            for q in 0..p {
                let val = psi * r[q] - v[q];
                rhs[a + q] += val;
                rhs[b + q] -= val;
            }
        }
        for ((&(a, b), d), u) in idx
            .period_cells
            .iter()
            .zip(delta.values().chunks_exact(p))
            .zip(upsilon.values().chunks_exact(p))
        {
            let (a, b) = (a as usize * p, b as usize * p);
            for q in 0..p {
                let val = phi * d[q] - u[q];
                rhs[a + q] += val;
                rhs[b + q] -= val;
            }
        }
    }
}

#[inline]
fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
