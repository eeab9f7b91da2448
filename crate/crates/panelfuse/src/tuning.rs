//! Grid sweep over `(gamma, lambda)` with warm starts, modified-BIC
//! scoring, and tuning-parameter selection.
//!
//! Rows (fixed `gamma`) are independent given the shared initializer and
//! run in parallel; within a row the fits proceed in ascending `lambda`
//! order, each warm-started from its predecessor's converged coefficients.
//! Ascending order realizes the bottom-up merge behavior fusion paths
//! share with agglomerative clustering.

use rayon::prelude::*;

use crate::admm::{run_admm, AdmmConfig, FitResult};
use crate::error::{Error, Result};
use crate::panel::{BlockPartition, CoefficientField, DesignMatrix, FusionIndex, PanelData};
use crate::penalty::{PenaltyKind, PenaltySpec};
use crate::recovery::{recover_blocks, DEFAULT_TOL_FUSE};

/// Ascending tuning grids for the two fusion directions.
#[derive(Debug, Clone)]
pub struct TuningGrid {
    gamma_values: Vec<f64>,
    lambda_values: Vec<f64>,
}

impl TuningGrid {
    pub fn new(gamma_values: Vec<f64>, lambda_values: Vec<f64>) -> Result<Self> {
        for (name, values) in [("gamma", &gamma_values), ("lambda", &lambda_values)] {
            if values.is_empty() {
                return Err(Error::InvalidArgument(format!("{name} grid is empty")));
            }
            if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} grid values must be nonnegative and finite"
                )));
            }
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "{name} grid must be strictly ascending"
                )));
            }
        }
        Ok(Self {
            gamma_values,
            lambda_values,
        })
    }

    /// Simulation-study preset: 0.1 to 1.5 in steps of 0.1, both axes.
    pub fn simulation_preset() -> Self {
        let values: Vec<f64> = (1..=15).map(|k| k as f64 * 0.1).collect();
        Self {
            gamma_values: values.clone(),
            lambda_values: values,
        }
    }

    /// Empirical-study preset: 0.2 to 3.0 in steps of 0.2, both axes.
    pub fn empirical_preset() -> Self {
        let values: Vec<f64> = (1..=15).map(|k| k as f64 * 0.2).collect();
        Self {
            gamma_values: values.clone(),
            lambda_values: values,
        }
    }

    pub fn gamma_values(&self) -> &[f64] {
        &self.gamma_values
    }

    pub fn lambda_values(&self) -> &[f64] {
        &self.lambda_values
    }

    pub fn len(&self) -> usize {
        self.gamma_values.len() * self.lambda_values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Modified BIC: `log(SSE / NT) + c_nt * log(NT) / NT * (L_hat * P)`.
///
/// The default charge constant is `c_nt = log(NTP)` (see [`default_cnt`]).
/// An exactly interpolating fit (SSE = 0) has no finite score and is
/// rejected.
pub fn bic_score(fit: &FitResult, panel: &PanelData, l_hat: usize, c_nt: f64) -> Result<f64> {
    bic_from_sse(
        fit.sse,
        panel.n_cells(),
        panel.n_covariates(),
        l_hat,
        c_nt,
    )
}

pub(crate) fn bic_from_sse(
    sse: f64,
    n_cells: usize,
    n_covariates: usize,
    l_hat: usize,
    c_nt: f64,
) -> Result<f64> {
    if l_hat < 1 {
        return Err(Error::InvalidArgument(
            "block count must be at least 1".into(),
        ));
    }
    if sse <= 0.0 {
        return Err(Error::DegenerateFit);
    }
    let nt = n_cells as f64;
    Ok((sse / nt).ln() + c_nt * nt.ln() / nt * (l_hat * n_covariates) as f64)
}

/// The shipped complexity constant `log(NTP)`.
pub fn default_cnt(panel: &PanelData) -> f64 {
    ((panel.n_cells() * panel.n_covariates()) as f64).ln()
}

/// Options for a tuning sweep.
#[derive(Debug, Clone)]
pub struct PathConfig {
    pub penalty_kind: PenaltyKind,
    /// Concavity override; the family default is used when `None`.
    pub concavity: Option<f64>,
    pub admm: AdmmConfig,
    /// Fused-norm tolerance handed to block recovery.
    pub tol_fuse: f64,
    /// BIC charge constant override; `log(NTP)` when `None`.
    pub c_nt: Option<f64>,
}

impl PathConfig {
    pub fn new(penalty_kind: PenaltyKind) -> Self {
        Self {
            penalty_kind,
            concavity: None,
            admm: AdmmConfig::default(),
            tol_fuse: DEFAULT_TOL_FUSE,
            c_nt: None,
        }
    }

    fn spec(&self, level: f64) -> PenaltySpec {
        let mut spec = PenaltySpec::new(self.penalty_kind, level);
        if let Some(a) = self.concavity {
            spec = spec.with_concavity(a);
        }
        spec
    }
}

/// A scored grid point: the fit, its recovered partition, and the BIC.
#[derive(Debug, Clone)]
pub struct ScoredFit {
    pub fit: FitResult,
    pub partition: BlockPartition,
    pub l_hat: usize,
    pub bic: f64,
}

/// Outcome at one `(gamma, lambda)` grid point; failures are recorded, not
/// fatal.
#[derive(Debug)]
pub struct PathPoint {
    pub gamma_index: usize,
    pub lambda_index: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub outcome: Result<ScoredFit>,
}

/// Full sweep result with the BIC-selected grid point.
#[derive(Debug)]
pub struct PathResult {
    grid: TuningGrid,
    points: Vec<PathPoint>,
    selected: usize,
}

impl PathResult {
    pub fn grid(&self) -> &TuningGrid {
        &self.grid
    }

    /// Points in row-major order (`gamma` outer, `lambda` inner).
    pub fn points(&self) -> &[PathPoint] {
        &self.points
    }

    pub fn selected_point(&self) -> &PathPoint {
        &self.points[self.selected]
    }

    pub fn selected_fit(&self) -> &ScoredFit {
        self.selected_point()
            .outcome
            .as_ref()
            .expect("selected point is always a scored fit")
    }

    /// `(gamma, lambda)` of the selected point.
    pub fn selected_params(&self) -> (f64, f64) {
        let p = self.selected_point();
        (p.gamma, p.lambda)
    }
}

/// Sweeps the grid. For each `gamma` row the first fit starts from `init`
/// (normally the ridge-fusion initializer) and subsequent fits warm-start
/// from the previous `lambda`'s converged coefficients. Every successful
/// fit is scored by the modified BIC with `L_hat` from block recovery; the
/// selected point minimizes the BIC, ties going to the smaller
/// `(gamma, lambda)` pair.
pub fn solution_path(
    panel: &PanelData,
    design: &DesignMatrix,
    idx: &FusionIndex,
    grid: &TuningGrid,
    config: &PathConfig,
    init: &CoefficientField,
) -> Result<PathResult> {
    config.admm.validate()?;
    config.spec(grid.lambda_values[0]).validate_for_step(config.admm.psi)?;
    config.spec(grid.gamma_values[0]).validate_for_step(config.admm.phi)?;
    let c_nt = config.c_nt.unwrap_or_else(|| default_cnt(panel));

    let mut points: Vec<PathPoint> = grid
        .gamma_values
        .par_iter()
        .enumerate()
        .flat_map(|(m, &gamma)| {
            let gamma_spec = config.spec(gamma);
            let mut warm = init.clone();
            let mut row = Vec::with_capacity(grid.lambda_values.len());
            for (w, &lambda) in grid.lambda_values.iter().enumerate() {
                let lambda_spec = config.spec(lambda);
                let outcome = run_admm(
                    panel,
                    design,
                    idx,
                    &lambda_spec,
                    &gamma_spec,
                    &config.admm,
                    &warm,
                )
                .and_then(|fit| {
                    warm = fit.state.beta.clone();
                    let partition = recover_blocks(&fit.state, idx, config.tol_fuse);
                    let l_hat = partition.n_blocks();
                    let bic = bic_score(&fit, panel, l_hat, c_nt)?;
                    Ok(ScoredFit {
                        fit,
                        partition,
                        l_hat,
                        bic,
                    })
                });
                row.push(PathPoint {
                    gamma_index: m,
                    lambda_index: w,
                    gamma,
                    lambda,
                    outcome,
                });
            }
            row
        })
        .collect();

    // rayon's flat_map preserves row order, but make the contract explicit
    points.sort_by_key(|p| (p.gamma_index, p.lambda_index));
    let selected = select_best(&points)?;
    Ok(PathResult {
        grid: grid.clone(),
        points,
        selected,
    })
}

/// Index of the minimum-BIC point; earlier (smaller `(gamma, lambda)`)
/// points win ties because the scan keeps strict improvements only.
pub(crate) fn select_best(points: &[PathPoint]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    let mut last_error: Option<String> = None;
    for (k, point) in points.iter().enumerate() {
        match &point.outcome {
            Ok(scored) => {
                if best.map_or(true, |(_, b)| scored.bic < b) {
                    best = Some((k, scored.bic));
                }
            }
            Err(e) => last_error = Some(e.to_string()),
        }
    }
    match best {
        Some((k, _)) => Ok(k),
        None => Err(Error::PathFailed(
            last_error.unwrap_or_else(|| "empty grid".into()),
        )),
    }
}
