//! Ridge-fusion initializer for the ADMM iteration.
//!
//! Minimizes `||Y - X beta||^2 / 2 + lambda* ||Omega beta||^2 / 2 +
//! gamma* ||Phi beta||^2 / 2`, a doubly l2-fused least squares with a
//! closed-form solution. It reuses the structured normal-system solver with
//! the fusion weights swapped for `(lambda*, gamma*)` and no auxiliary
//! terms. The combined system is positive definite for generic designs even
//! though the fusion part alone annihilates lattice constants.

use crate::admm::{solve_normal_system, AdmmConfig};
use crate::error::{Error, Result};
use crate::linsys;
use crate::panel::{CoefficientField, DesignMatrix, FusionIndex, PanelData};

/// Ridge-fusion weights; both shrink pairwise differences in l2.
#[derive(Debug, Clone, Copy)]
pub struct RidgeConfig {
    pub lambda_star: f64,
    pub gamma_star: f64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self {
            lambda_star: 1e-3,
            gamma_star: 1e-3,
        }
    }
}

impl RidgeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_star > 0.0 && self.gamma_star > 0.0)
            || !self.lambda_star.is_finite()
            || !self.gamma_star.is_finite()
        {
            return Err(Error::InvalidArgument(format!(
                "ridge weights must be positive and finite, got lambda*={}, gamma*={}",
                self.lambda_star, self.gamma_star
            )));
        }
        Ok(())
    }
}

/// Computes the ridge-fusion initial coefficient field.
///
/// `solver` supplies the linear-solve route and tolerances; its `psi`/`phi`
/// are ignored in favor of the ridge weights.
pub fn ridge_init(
    panel: &PanelData,
    design: &DesignMatrix,
    config: &RidgeConfig,
    solver: &AdmmConfig,
) -> Result<CoefficientField> {
    config.validate()?;
    let idx = crate::panel::build_fusion_index(panel.n_individuals(), panel.n_periods())?;
    ridge_init_with_index(panel, design, &idx, config, solver)
}

/// Same as [`ridge_init`] but reuses a prebuilt fusion index.
pub fn ridge_init_with_index(
    panel: &PanelData,
    design: &DesignMatrix,
    idx: &FusionIndex,
    config: &RidgeConfig,
    solver: &AdmmConfig,
) -> Result<CoefficientField> {
    config.validate()?;
    let ridge_solver = AdmmConfig {
        psi: config.lambda_star,
        phi: config.gamma_star,
        ..*solver
    };
    let rhs = linsys::build_rhs(
        panel,
        design,
        idx,
        config.lambda_star,
        config.gamma_star,
        None,
    );
    solve_normal_system(design, idx, &ridge_solver, &rhs, None)
}
