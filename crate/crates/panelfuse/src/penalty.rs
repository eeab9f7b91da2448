//! Concave fused penalties (Lasso, SCAD, MCP) and their grouped proximal
//! operators.
//!
//! Each operator acts on a whole difference vector through its Euclidean
//! norm, so fused differences are shrunk to exactly zero as a group. The
//! SCAD form follows Fan & Li (2001), MCP follows Zhang (2010); both are
//! linear near the origin and constant beyond `a * level`, which is what
//! leaves large between-block differences unbiased.

use crate::error::{Error, Result};

/// Penalty family used for a fusion direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyKind {
    Lasso,
    Scad,
    Mcp,
}

impl PenaltyKind {
    /// Conventional concavity default for the family (unused by Lasso).
    pub fn default_concavity(self) -> f64 {
        match self {
            PenaltyKind::Lasso => f64::INFINITY,
            PenaltyKind::Scad => DEFAULT_SCAD_CONCAVITY,
            PenaltyKind::Mcp => DEFAULT_MCP_CONCAVITY,
        }
    }
}

pub const DEFAULT_SCAD_CONCAVITY: f64 = 3.7;
pub const DEFAULT_MCP_CONCAVITY: f64 = 3.0;

/// A penalty family with its level (`lambda` for individual fusion,
/// `gamma` for period fusion) and concavity parameter `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub level: f64,
    pub concavity: f64,
}

impl PenaltySpec {
    pub fn new(kind: PenaltyKind, level: f64) -> Self {
        Self {
            kind,
            level,
            concavity: kind.default_concavity(),
        }
    }

    pub fn lasso(level: f64) -> Self {
        Self::new(PenaltyKind::Lasso, level)
    }

    pub fn scad(level: f64) -> Self {
        Self::new(PenaltyKind::Scad, level)
    }

    pub fn mcp(level: f64) -> Self {
        Self::new(PenaltyKind::Mcp, level)
    }

    pub fn with_concavity(mut self, a: f64) -> Self {
        self.concavity = a;
        self
    }

    /// Checks the level and the concavity bound against the augmentation
    /// parameter of the constraint this penalty will act on (`psi` for
    /// individual pairs, `phi` for period pairs).
    pub fn validate_for_step(&self, step: f64) -> Result<()> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "proximal step must be a positive finite number, got {step}"
            )));
        }
        if self.level < 0.0 || !self.level.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "penalty level must be nonnegative and finite, got {}",
                self.level
            )));
        }
        match self.kind {
            PenaltyKind::Lasso => Ok(()),
            PenaltyKind::Scad => {
                if self.concavity > 1.0 / step + 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "SCAD concavity a={} must exceed 1/step + 1 = {}",
                        self.concavity,
                        1.0 / step + 1.0
                    )))
                }
            }
            PenaltyKind::Mcp => {
                if self.concavity > 1.0 / step {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "MCP concavity a={} must exceed 1/step = {}",
                        self.concavity,
                        1.0 / step
                    )))
                }
            }
        }
    }
}

#[inline]
fn norm(w: &[f64]) -> f64 {
    w.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Groupwise soft threshold `S(w, t)`: shrinks the norm of `w` by `t`,
/// returning zero once `t >= ||w||`. `S(0, t) = 0`, `S(w, 0) = w`.
pub fn soft_threshold(w: &[f64], t: f64) -> Vec<f64> {
    let mut out = w.to_vec();
    soft_threshold_in_place(&mut out, t);
    out
}

#[inline]
pub(crate) fn soft_threshold_in_place(w: &mut [f64], t: f64) {
    let n = norm(w);
    let factor = if n > t { 1.0 - t / n } else { 0.0 };
    for v in w.iter_mut() {
        *v *= factor;
    }
}

/// Lasso proximal update: `S(w, level / step)`.
pub fn prox_lasso(w: &[f64], level: f64, step: f64) -> Vec<f64> {
    soft_threshold(w, level / step)
}

/// SCAD proximal update (three branches: soft threshold near the origin,
/// rescaled soft threshold in the concave middle, identity past
/// `a * level`). Requires `a > 1/step + 1`.
pub fn prox_scad(w: &[f64], level: f64, step: f64, a: f64) -> Result<Vec<f64>> {
    PenaltySpec::scad(level)
        .with_concavity(a)
        .validate_for_step(step)?;
    let mut out = w.to_vec();
    prox_scad_in_place(&mut out, level, step, a);
    Ok(out)
}

#[inline]
fn prox_scad_in_place(w: &mut [f64], level: f64, step: f64, a: f64) {
    let n = norm(w);
    if n <= level + level / step {
        soft_threshold_in_place(w, level / step);
    } else if n > a * level {
        // pass through unchanged
    } else {
        let t = a * level / ((a - 1.0) * step);
        let denom = 1.0 - 1.0 / ((a - 1.0) * step);
        soft_threshold_in_place(w, t);
        for v in w.iter_mut() {
            *v /= denom;
        }
    }
}

/// MCP proximal update (rescaled soft threshold below `a * level`,
/// identity beyond). Requires `a > 1/step`.
pub fn prox_mcp(w: &[f64], level: f64, step: f64, a: f64) -> Result<Vec<f64>> {
    PenaltySpec::mcp(level)
        .with_concavity(a)
        .validate_for_step(step)?;
    let mut out = w.to_vec();
    prox_mcp_in_place(&mut out, level, step, a);
    Ok(out)
}

#[inline]
fn prox_mcp_in_place(w: &mut [f64], level: f64, step: f64, a: f64) {
    let n = norm(w);
    if n <= a * level {
        soft_threshold_in_place(w, level / step);
        let denom = 1.0 - 1.0 / (a * step);
        for v in w.iter_mut() {
            *v /= denom;
        }
    }
}

/// Dispatching proximal operator. Validates the spec against `step`.
pub fn prox(w: &[f64], spec: &PenaltySpec, step: f64) -> Result<Vec<f64>> {
    spec.validate_for_step(step)?;
    let mut out = w.to_vec();
    prox_in_place(&mut out, spec, step);
    Ok(out)
}

/// In-place dispatch used by the solver's hot loop; assumes the spec has
/// already been validated against `step`.
#[inline]
pub(crate) fn prox_in_place(w: &mut [f64], spec: &PenaltySpec, step: f64) {
    match spec.kind {
        PenaltyKind::Lasso => soft_threshold_in_place(w, spec.level / step),
        PenaltyKind::Scad => prox_scad_in_place(w, spec.level, step, spec.concavity),
        PenaltyKind::Mcp => prox_mcp_in_place(w, spec.level, step, spec.concavity),
    }
}

/// Penalty value at norm `kappa >= 0`. Nondecreasing, concave, zero at
/// zero, and constant once `kappa >= a * level` for SCAD/MCP.
pub fn penalty_value(kappa: f64, spec: &PenaltySpec) -> f64 {
    debug_assert!(kappa >= 0.0);
    let level = spec.level;
    let a = spec.concavity;
    match spec.kind {
        PenaltyKind::Lasso => level * kappa,
        PenaltyKind::Scad => {
            if kappa <= level {
                level * kappa
            } else if kappa <= a * level {
                (2.0 * a * level * kappa - kappa * kappa - level * level) / (2.0 * (a - 1.0))
            } else {
                level * level * (a + 1.0) / 2.0
            }
        }
        PenaltyKind::Mcp => {
            if kappa <= a * level {
                level * kappa - kappa * kappa / (2.0 * a)
            } else {
                a * level * level / 2.0
            }
        }
    }
}
