//! Outer optimization loops.
//!
//! Every iteration analyzes the current design, forms the objective gradient
//! (compliance, or its tension-only variant), projects it onto the active
//! constraints, and then either runs the optimality-criteria update or takes a
//! projected-gradient step. The projected-gradient residual `‖d‖∞` is
//! computed for both families and drives the common stopping test.

mod oc;
mod pg;

pub use oc::{compute_be, oc_lambda_search, oc_update, OcSearch};
pub use pg::{
    additive_candidate, auto_step, multiplicative_candidate, pg_step_additive, pg_step_multiplicative,
    volume_restore, RESTORE_TOL,
};

use crate::error::{Error, Result};
use crate::grid_fe::Displacements;
use crate::problems::ProblemDefinition;
use crate::projection::Projection;
use crate::simp_model::{Analysis, DesignField, StructuralModel};
use crate::tension_energy::{element_stresses, gauss_jacobians, reduced_energy, tension_gradient, TensionConfig};

pub const DEFAULT_MAX_ITERS: usize = 300;

/// Optimality-criteria settings.
#[derive(Debug, Clone, PartialEq)]
pub struct OcConfig {
    /// ζ: largest relative density change per iteration.
    pub move_limit: f64,
    /// η: exponent on `B_e`.
    pub damping: f64,
    /// Relative volume tolerance of the multiplier search.
    pub inner_tol: f64,
    pub lambda_bracket: (f64, f64),
    /// Stop when the largest density change, or the relative residual
    /// `‖d‖∞ / ‖∇f‖∞`, falls to this value.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for OcConfig {
    fn default() -> Self {
        Self {
            move_limit: 0.2,
            damping: 1.0,
            inner_tol: 1e-9,
            lambda_bracket: (1e-6, 1e6),
            tol: 1e-3,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

impl OcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.move_limit > 0.0 && self.move_limit < 1.0) {
            return Err(Error::param(format!("move limit must lie in (0, 1), got {}", self.move_limit)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::param(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.inner_tol > 0.0) {
            return Err(Error::param(format!("inner tolerance must be positive, got {}", self.inner_tol)));
        }
        let (lo, hi) = self.lambda_bracket;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::param(format!("invalid lambda bracket ({lo}, {hi})")));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgMode {
    Additive,
    Multiplicative,
}

/// Projected-gradient settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PgConfig {
    pub mode: PgMode,
    /// γ. `None` picks [`auto_step`] each iteration for the additive mode and
    /// 1 for the multiplicative mode.
    pub step: Option<f64>,
    /// ζ: largest relative density change per iteration.
    pub move_limit: f64,
    /// Stop when `‖d‖∞ ≤ tol · ‖∇f‖∞`.
    pub tol: f64,
    pub max_iters: usize,
}

impl PgConfig {
    pub fn new(mode: PgMode) -> Self {
        Self {
            mode,
            step: None,
            move_limit: 0.2,
            tol: 1e-2,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.step {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::param(format!("step must be positive, got {g}")));
            }
        }
        if !(self.move_limit > 0.0 && self.move_limit < 1.0) {
            return Err(Error::param(format!("move limit must lie in (0, 1), got {}", self.move_limit)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Oc(OcConfig),
    Pg(PgConfig),
}

impl Optimizer {
    pub const NAMES: [&'static str; 3] = ["oc", "pg-add", "pg-mult"];

    /// Default configuration for a command-line name.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "oc" => Ok(Self::Oc(OcConfig::default())),
            "pg-add" => Ok(Self::Pg(PgConfig::new(PgMode::Additive))),
            "pg-mult" => Ok(Self::Pg(PgConfig::new(PgMode::Multiplicative))),
            other => Err(Error::param(format!(
                "unknown optimizer '{other}' (valid: {})",
                Self::NAMES.join(", ")
            ))),
        }
    }

    pub fn max_iters(&self) -> usize {
        match self {
            Self::Oc(c) => c.max_iters,
            Self::Pg(c) => c.max_iters,
        }
    }

    pub fn tol(&self) -> f64 {
        match self {
            Self::Oc(c) => c.tol,
            Self::Pg(c) => c.tol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Oc(c) => c.validate(),
            Self::Pg(c) => c.validate(),
        }
    }
}

/// One row of the convergence history. Compliance and residual refer to the
/// design entering the iteration; volume and change to the design it accepts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRow {
    pub iter: usize,
    pub compliance: f64,
    pub volume: f64,
    /// `‖d‖∞`.
    pub kkt_inf: f64,
    pub max_change: f64,
    /// OC: the positive multiplier of the inner search. PG: the volume
    /// multiplier of the projection (negative for compliance).
    pub lambda: f64,
    /// Tension-only runs: the reduced energy of the design entering the
    /// iteration.
    pub reduced_energy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceRecord {
    pub rows: Vec<IterationRow>,
}

impl ConvergenceRecord {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Everything the loop knows at one iteration, before the update.
pub struct IterationState<'a> {
    pub iter: usize,
    pub field: &'a DesignField,
    pub analysis: &'a Analysis,
    /// Objective gradient used by the optimizer.
    pub grad: &'a [f64],
    pub projection: &'a Projection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub field: DesignField,
    pub record: ConvergenceRecord,
    pub converged: bool,
    pub compliance: f64,
    pub displacements: Displacements,
    /// Reduced energy of the final design for tension-only runs.
    pub reduced_energy: Option<f64>,
}

fn objective_gradient(
    model: &StructuralModel,
    field: &DesignField,
    analysis: &Analysis,
    tension: Option<&TensionConfig>,
) -> Result<(Vec<f64>, Option<f64>)> {
    match tension {
        None => Ok((model.gradient(field, analysis)?, None)),
        Some(cfg) => {
            let grid = model.grid();
            let stresses = element_stresses(grid, &analysis.displacements, field, model.material())?;
            let dj = gauss_jacobians(grid);
            let g = tension_gradient(field, model.material(), &stresses, &dj, grid.thickness(), cfg)?;
            let w = reduced_energy(field, model.material(), &stresses, &dj, grid.thickness(), cfg)?;
            Ok((g.into_iter().map(|x| -x).collect(), Some(w)))
        }
    }
}

fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Runs the chosen optimizer from the uniform feasible design.
pub fn run_optimization(problem: &ProblemDefinition, optimizer: &Optimizer) -> Result<OptimizationResult> {
    run_optimization_with(problem, optimizer, |_| {})
}

/// As [`run_optimization`], calling `observer` once per iteration before the
/// design is updated.
pub fn run_optimization_with(
    problem: &ProblemDefinition,
    optimizer: &Optimizer,
    mut observer: impl FnMut(&IterationState<'_>),
) -> Result<OptimizationResult> {
    optimizer.validate()?;
    problem.validate()?;
    let mut model = problem.model()?;
    let mut field = problem.initial_field()?;
    let tension = problem.tension.as_ref();
    let tol = optimizer.tol();
    let mut record = ConvergenceRecord::default();
    let mut converged = false;

    for iter in 0..optimizer.max_iters() {
        let step = |e: Error| e.at_iteration(iter);
        let analysis = model.analyze(&field).map_err(step)?;
        let (grad, reduced) = objective_gradient(&model, &field, &analysis, tension).map_err(step)?;
        let projection = Projection::compute(&grad, &field).map_err(step)?;
        observer(&IterationState {
            iter,
            field: &field,
            analysis: &analysis,
            grad: &grad,
            projection: &projection,
        });
        let kkt = projection.direction.inf_norm();
        let mut row = IterationRow {
            iter,
            compliance: analysis.compliance,
            volume: field.volume(),
            kkt_inf: kkt,
            max_change: 0.0,
            lambda: projection.multipliers.lambda_volume,
            reduced_energy: reduced,
        };
        if kkt <= tol * inf_norm(&grad) {
            if let Optimizer::Oc(_) = optimizer {
                row.lambda = -row.lambda;
            }
            record.rows.push(row);
            converged = true;
            break;
        }

        let next = match optimizer {
            Optimizer::Oc(cfg) => {
                let energy: Vec<f64> = grad
                    .iter()
                    .zip(field.elem_volumes())
                    .map(|(g, v)| (-g / v).max(0.0))
                    .collect();
                let search = oc_lambda_search(&field, &energy, cfg).map_err(step)?;
                if !search.attained {
                    return Err(step(Error::Feasibility(format!(
                        "move limits cannot reach the volume target (closest volume {})",
                        search.field.volume()
                    ))));
                }
                row.lambda = search.lambda;
                search.field
            }
            Optimizer::Pg(cfg) => match cfg.mode {
                PgMode::Additive => {
                    let gamma = cfg.step.unwrap_or_else(|| auto_step(&field, &projection.multipliers, cfg.move_limit));
                    pg_step_additive(&field, &projection.direction, gamma, cfg.move_limit).map_err(step)?
                }
                PgMode::Multiplicative => pg_step_multiplicative(
                    &field,
                    &grad,
                    &projection.active,
                    &projection.multipliers,
                    cfg.step.unwrap_or(1.0),
                    cfg.move_limit,
                )
                .map_err(step)?,
            },
        };

        row.max_change = next
            .densities()
            .iter()
            .zip(field.densities())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()));
        row.volume = next.volume();
        record.rows.push(row);
        field = next;
        if matches!(optimizer, Optimizer::Oc(_)) && row.max_change <= tol {
            converged = true;
            break;
        }
    }

    let analysis = model.analyze(&field)?;
    let reduced_energy = match tension {
        Some(cfg) => {
            let grid = model.grid();
            let stresses = element_stresses(grid, &analysis.displacements, &field, model.material())?;
            Some(reduced_energy(
                &field,
                model.material(),
                &stresses,
                &gauss_jacobians(grid),
                grid.thickness(),
                cfg,
            )?)
        }
        None => None,
    };
    Ok(OptimizationResult {
        field,
        record,
        converged,
        compliance: analysis.compliance,
        displacements: analysis.displacements,
        reduced_energy,
    })
}
