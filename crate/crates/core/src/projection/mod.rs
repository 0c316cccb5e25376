//! Gradient projection onto the active volume and box constraints.
//!
//! Constraint rows are ordered volume first, then active lower bounds
//! (gradient `−e_e`) in ascending element order, then active upper bounds
//! (gradient `+e_e`). Multipliers follow the same order. The projected
//! direction is `d = −∇f + Σ λ_k ∇h_k` with multipliers chosen so that `d` is
//! orthogonal to every active constraint gradient.

mod dense;

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};

pub use dense::{
    hestenes_multipliers, least_squares_multipliers, projected_gradient, tangent_uniqueness_probe,
    venkayya_multipliers, venkayya_multipliers_compact, weighted_orthogonality_multipliers,
    weighted_orthogonality_residual,
};

use crate::error::{check_len, Error, Result};
use crate::simp_model::DesignField;

/// Search direction, one component per element.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedDirection {
    pub d: Vec<f64>,
}

impl ProjectedDirection {
    pub fn as_slice(&self) -> &[f64] {
        &self.d
    }

    /// `‖d‖∞`, the first-order stationarity residual.
    pub fn inf_norm(&self) -> f64 {
        kkt_residual(self)
    }
}

/// Which constraints are treated as equalities.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ActiveSet {
    pub volume_active: bool,
    pub lower_active: BTreeSet<usize>,
    pub upper_active: BTreeSet<usize>,
}

impl ActiveSet {
    pub fn volume_only() -> Self {
        Self {
            volume_active: true,
            ..Self::default()
        }
    }

    pub fn num_constraints(&self) -> usize {
        usize::from(self.volume_active) + self.lower_active.len() + self.upper_active.len()
    }

    pub fn is_bound_active(&self, e: usize) -> bool {
        self.lower_active.contains(&e) || self.upper_active.contains(&e)
    }

    /// Checks element ranges, disjointness, and that every active bound is
    /// actually attained by `field`.
    pub fn validate(&self, field: &DesignField) -> Result<()> {
        let n = field.len();
        for &e in self.lower_active.iter().chain(&self.upper_active) {
            if e >= n {
                return Err(Error::param(format!("active bound on element {e} of {n}")));
            }
        }
        if let Some(&e) = self.lower_active.intersection(&self.upper_active).next() {
            return Err(Error::param(format!("element {e} has both bounds active")));
        }
        if let Some(&e) = self.lower_active.iter().find(|&&e| !field.at_lower(e)) {
            return Err(Error::param(format!(
                "lower bound of element {e} marked active at density {}",
                field.densities()[e]
            )));
        }
        if let Some(&e) = self.upper_active.iter().find(|&&e| !field.at_upper(e)) {
            return Err(Error::param(format!(
                "upper bound of element {e} marked active at density {}",
                field.densities()[e]
            )));
        }
        Ok(())
    }

    /// Dense `H` (rows are active constraint gradients).
    pub fn constraint_matrix(&self, field: &DesignField) -> DMatrix<f64> {
        let n = field.len();
        let mut h = DMatrix::zeros(self.num_constraints(), n);
        let mut r = 0;
        if self.volume_active {
            for (e, &v) in field.elem_volumes().iter().enumerate() {
                h[(0, e)] = v;
            }
            r = 1;
        }
        for &e in &self.lower_active {
            h[(r, e)] = -1.0;
            r += 1;
        }
        for &e in &self.upper_active {
            h[(r, e)] = 1.0;
            r += 1;
        }
        h
    }

    fn bound_sign(&self, e: usize) -> Option<f64> {
        if self.lower_active.contains(&e) {
            Some(-1.0)
        } else if self.upper_active.contains(&e) {
            Some(1.0)
        } else {
            None
        }
    }
}

/// Volume multiplier and the multipliers of active bounds keyed by element.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MultiplierSet {
    pub lambda_volume: f64,
    pub lambda_bounds: BTreeMap<usize, f64>,
}

impl MultiplierSet {
    /// Multipliers in the row order of [`ActiveSet::constraint_matrix`].
    pub fn to_vector(&self, active: &ActiveSet) -> DVector<f64> {
        let mut out = Vec::with_capacity(active.num_constraints());
        if active.volume_active {
            out.push(self.lambda_volume);
        }
        for e in active.lower_active.iter().chain(&active.upper_active) {
            out.push(self.lambda_bounds.get(e).copied().unwrap_or(0.0));
        }
        DVector::from_vec(out)
    }
}

/// Closed-form multipliers for the volume row plus unit-vector bound rows.
///
/// Over the free set `F`, `λ_v = Σ_F f_e v_e / Σ_F v_e²`; every active bound
/// then absorbs its own component, `λ_e = s_e (f_e − λ_v v_e)`.
pub fn box_volume_multipliers(grad_f: &[f64], field: &DesignField, active: &ActiveSet) -> Result<MultiplierSet> {
    check_len("objective gradient", field.len(), grad_f.len())?;
    active.validate(field)?;
    let v = field.elem_volumes();
    let mut lambda_volume = 0.0;
    if active.volume_active {
        let (mut num, mut den) = (0.0, 0.0);
        for e in (0..field.len()).filter(|&e| !active.is_bound_active(e)) {
            num += grad_f[e] * v[e];
            den += v[e] * v[e];
        }
        if den == 0.0 {
            // every element is pinned: the volume row is a combination of the bound rows
            return Err(Error::Degenerate {
                row: 0,
                depends_on: (1..=active.lower_active.len() + active.upper_active.len()).collect(),
            });
        }
        lambda_volume = num / den;
    }
    let lambda_bounds = active
        .lower_active
        .iter()
        .map(|&e| (e, -(grad_f[e] - lambda_volume * v[e])))
        .chain(active.upper_active.iter().map(|&e| (e, grad_f[e] - lambda_volume * v[e])))
        .collect();
    Ok(MultiplierSet {
        lambda_volume,
        lambda_bounds,
    })
}

/// `d = −∇f + λ_v v + Σ s_e λ_e e_e`, with components of active bounds set to
/// exactly zero.
pub fn box_volume_direction(
    grad_f: &[f64],
    field: &DesignField,
    active: &ActiveSet,
    multipliers: &MultiplierSet,
) -> Result<ProjectedDirection> {
    check_len("objective gradient", field.len(), grad_f.len())?;
    let lv = if active.volume_active { multipliers.lambda_volume } else { 0.0 };
    let d = grad_f
        .iter()
        .zip(field.elem_volumes())
        .enumerate()
        .map(|(e, (&f, &v))| if active.is_bound_active(e) { 0.0 } else { -f + lv * v })
        .collect();
    let mut d = ProjectedDirection { d };
    if active.volume_active {
        reorthogonalize(&mut d, field, active);
    }
    Ok(d)
}

/// Removes the round-off component of `d` along the free part of `v`.
fn reorthogonalize(d: &mut ProjectedDirection, field: &DesignField, active: &ActiveSet) {
    let (mut dv, mut vv) = (0.0, 0.0);
    for (e, (&di, &v)) in d.d.iter().zip(field.elem_volumes()).enumerate() {
        if !active.is_bound_active(e) {
            dv += di * v;
            vv += v * v;
        }
    }
    if vv == 0.0 {
        return;
    }
    let c = dv / vv;
    for (e, (di, &v)) in d.d.iter_mut().zip(field.elem_volumes()).enumerate() {
        if !active.is_bound_active(e) {
            *di -= c * v;
        }
    }
}

/// Recovers `∇f = −d + Σ λ_k ∇h_k` from a direction and the multipliers that
/// produced it.
fn recover_gradient(field: &DesignField, multipliers: &MultiplierSet, trial: &ProjectedDirection) -> Result<Vec<f64>> {
    check_len("trial direction", field.len(), trial.d.len())?;
    let mut g: Vec<f64> = trial
        .d
        .iter()
        .zip(field.elem_volumes())
        .map(|(&d, &v)| -d + multipliers.lambda_volume * v)
        .collect();
    for (&e, &lam) in &multipliers.lambda_bounds {
        if e >= g.len() {
            return Err(Error::param(format!("bound multiplier for element {e} out of range")));
        }
        let sign = if field.at_lower(e) {
            -1.0
        } else if field.at_upper(e) {
            1.0
        } else {
            return Err(Error::param(format!("bound multiplier given for interior element {e}")));
        };
        g[e] += sign * lam;
    }
    Ok(g)
}

/// Chooses the bounds that must be held so that the projected direction keeps
/// every density inside the box and every bound multiplier has the sign of a
/// genuine contact force (`λ_e ≤ 0`).
///
/// For a candidate volume multiplier `λ`, an element at its lower bound stays
/// pinned iff `v_e λ − f_e < 0` and one at its upper bound iff
/// `v_e λ − f_e > 0`. The volume row's orthogonality condition
/// `Σ_F v_e (v_e λ − f_e) = 0` is nondecreasing in `λ`, so its root is found
/// by one sweep over the sorted breakpoints `f_e / v_e`.
pub fn active_set_update(
    field: &DesignField,
    multipliers: &MultiplierSet,
    trial_direction: &ProjectedDirection,
) -> Result<ActiveSet> {
    let grad = recover_gradient(field, multipliers, trial_direction)?;
    let active = sweep_active_set(&grad, field)?;
    refine_active_set(&grad, field, active)
}

fn sweep_active_set(grad: &[f64], field: &DesignField) -> Result<ActiveSet> {
    let v = field.elem_volumes();
    let n = field.len();
    // Breakpoints: lower-bound elements join the free set above t_e,
    // upper-bound elements leave it at t_e.
    let (mut a, mut b) = (0.0, 0.0);
    let mut events: Vec<(f64, usize, bool)> = Vec::new();
    for e in 0..n {
        let t = grad[e] / v[e];
        if field.at_lower(e) {
            events.push((t, e, false));
        } else {
            if field.at_upper(e) {
                events.push((t, e, true));
            }
            a += v[e] * v[e];
            b += grad[e] * v[e];
        }
    }
    events.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

    let mut lambda = None;
    let mut lo = f64::NEG_INFINITY;
    let mut k = 0;
    loop {
        let hi = events.get(k).map_or(f64::INFINITY, |ev| ev.0);
        if a > 0.0 {
            let root = b / a;
            if root <= hi && root >= lo {
                lambda = Some(root);
                break;
            }
            if root < lo {
                // g already positive on entry to this segment; the root is the breakpoint
                lambda = Some(lo);
                break;
            }
        } else if lo.is_finite() {
            // empty free set on this segment: g ≡ 0, take its left end
            lambda = Some(lo);
            break;
        }
        if k == events.len() {
            break;
        }
        // cross every breakpoint tied at `hi`
        while k < events.len() && events[k].0 == hi {
            let (_, e, upper) = events[k];
            let w = v[e] * v[e];
            if upper {
                a -= w;
                b -= grad[e] * v[e];
            } else {
                a += w;
                b += grad[e] * v[e];
            }
            k += 1;
        }
        if a < 1e-300 {
            a = 0.0;
            b = 0.0;
        }
        lo = hi;
    }
    let lambda = lambda.ok_or_else(|| {
        Error::Feasibility("no volume multiplier keeps the direction inside the box".into())
    })?;

    let mut active = ActiveSet::volume_only();
    for e in 0..n {
        let dt = v[e] * lambda - grad[e];
        if field.at_lower(e) && dt < 0.0 {
            active.lower_active.insert(e);
        } else if field.at_upper(e) && dt > 0.0 {
            active.upper_active.insert(e);
        }
    }
    if active.lower_active.len() + active.upper_active.len() == n {
        // keep the element whose breakpoint sits closest to the root free
        let e = (0..n)
            .min_by(|&x, &y| {
                let dx = (v[x] * lambda - grad[x]).abs();
                let dy = (v[y] * lambda - grad[y]).abs();
                dx.total_cmp(&dy)
            })
            .expect("non-empty field");
        active.lower_active.remove(&e);
        active.upper_active.remove(&e);
    }
    Ok(active)
}

/// Verifies sign conditions at the recomputed multipliers and repairs any
/// violation left by rounding. Each bound may change state at most once.
fn refine_active_set(grad: &[f64], field: &DesignField, mut active: ActiveSet) -> Result<ActiveSet> {
    let n = field.len();
    let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs())).max(f64::MIN_POSITIVE);
    let tol = 1e-10 * scale;
    let mut toggled = BTreeSet::new();
    loop {
        let m = box_volume_multipliers(grad, field, &active)?;
        let v = field.elem_volumes();
        let mut changes = Vec::new();
        for e in 0..n {
            let dt = v[e] * m.lambda_volume - grad[e];
            match active.bound_sign(e) {
                Some(_) if m.lambda_bounds[&e] > tol => changes.push(e),
                None if field.at_lower(e) && dt < -tol => changes.push(e),
                None if field.at_upper(e) && dt > tol => changes.push(e),
                _ => {}
            }
        }
        if changes.is_empty() {
            return Ok(active);
        }
        for e in changes {
            if !toggled.insert(e) {
                return Err(Error::ActiveSetOscillation { toggles: toggled.len() });
            }
            if !active.lower_active.remove(&e) && !active.upper_active.remove(&e) {
                if field.at_lower(e) {
                    active.lower_active.insert(e);
                } else {
                    active.upper_active.insert(e);
                }
            }
        }
    }
}

/// `‖d‖∞`.
pub fn kkt_residual(direction: &ProjectedDirection) -> f64 {
    direction.d.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Full projection of one gradient: active set, multipliers and direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub active: ActiveSet,
    pub multipliers: MultiplierSet,
    pub direction: ProjectedDirection,
}

impl Projection {
    /// Projects `grad_f` onto the tangent space of the constraints that are
    /// active at `field`.
    pub fn compute(grad_f: &[f64], field: &DesignField) -> Result<Self> {
        let trial_set = ActiveSet::volume_only();
        let trial_mult = box_volume_multipliers(grad_f, field, &trial_set)?;
        let trial = box_volume_direction(grad_f, field, &trial_set, &trial_mult)?;
        let active = active_set_update(field, &trial_mult, &trial)?;
        let multipliers = box_volume_multipliers(grad_f, field, &active)?;
        let direction = box_volume_direction(grad_f, field, &active, &multipliers)?;
        Ok(Self {
            active,
            multipliers,
            direction,
        })
    }
}

/// Volume constraint gradient `∂h/∂ρ_e = v_e`.
pub fn volume_constraint_gradient(field: &DesignField) -> Vec<f64> {
    field.elem_volumes().to_vec()
}
