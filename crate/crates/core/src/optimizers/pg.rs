use crate::error::{check_len, Error, Result};
use crate::projection::{ActiveSet, MultiplierSet, ProjectedDirection};
use crate::simp_model::{DesignField, BOUND_TOL};

/// Relative volume tolerance met by [`volume_restore`].
pub const RESTORE_TOL: f64 = 1e-9;

fn clip_moves(old: &[f64], new: &mut [f64], rho_min: f64, zeta: f64) {
    for (n, &o) in new.iter_mut().zip(old) {
        let lo = ((1.0 - zeta) * o).max(rho_min);
        let hi = ((1.0 + zeta) * o).min(1.0);
        *n = n.clamp(lo, hi);
    }
}

/// Step length under which a direction component of `|λ_v| v_e` (a
/// sensitivity twice the volume price) moves the density by `ζ` times the
/// mean density.
pub fn auto_step(field: &DesignField, multipliers: &MultiplierSet, move_limit: f64) -> f64 {
    let n = field.len() as f64;
    let mean_rho = field.volume_target() / field.total_volume();
    let mean_v = field.total_volume() / n;
    let scale = multipliers.lambda_volume.abs() * mean_v;
    if scale > 0.0 && scale.is_finite() {
        move_limit * mean_rho / scale
    } else {
        move_limit
    }
}

/// Unclipped additive candidate `ρ + γd`.
pub fn additive_candidate(field: &DesignField, d: &ProjectedDirection, gamma: f64) -> Result<Vec<f64>> {
    check_len("direction", field.len(), d.d.len())?;
    Ok(field.densities().iter().zip(&d.d).map(|(r, di)| r + gamma * di).collect())
}

/// `ρ ← restore(clip(ρ + γd))`, with each density also held within
/// `[(1−ζ)ρ_e, (1+ζ)ρ_e]`.
pub fn pg_step_additive(field: &DesignField, d: &ProjectedDirection, gamma: f64, move_limit: f64) -> Result<DesignField> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param(format!("step length must be positive, got {gamma}")));
    }
    let mut rho = additive_candidate(field, d, gamma)?;
    clip_moves(field.densities(), &mut rho, field.rho_min(), move_limit);
    volume_restore(&field.with_densities(rho)?)
}

/// Unclipped multiplicative candidate. Free elements are scaled by
/// `(f,ρ_e / (λ_v v_e))^γ`, which exceeds one exactly where the sensitivity is
/// stronger than the volume price; active-bound elements are unchanged.
pub fn multiplicative_candidate(
    field: &DesignField,
    grad_f: &[f64],
    active: &ActiveSet,
    multipliers: &MultiplierSet,
    gamma: f64,
) -> Result<Vec<f64>> {
    check_len("objective gradient", field.len(), grad_f.len())?;
    let lv = multipliers.lambda_volume;
    field
        .densities()
        .iter()
        .zip(grad_f.iter().zip(field.elem_volumes()))
        .enumerate()
        .map(|(e, (&r, (&f, &v)))| {
            if active.is_bound_active(e) {
                return Ok(r);
            }
            if f == 0.0 {
                return Err(Error::Scaling {
                    element: e,
                    reason: "zero objective sensitivity".into(),
                });
            }
            let ratio = f / (lv * v);
            if !(ratio > 0.0 && ratio.is_finite()) {
                return Err(Error::Scaling {
                    element: e,
                    reason: format!("sensitivity {f} and volume multiplier {lv} give ratio {ratio}"),
                });
            }
            Ok(r * ratio.powf(gamma))
        })
        .collect()
}

/// `ρ ← restore(clip(ρ ⊙ ratio^γ))` with the same move limits as the
/// additive step.
pub fn pg_step_multiplicative(
    field: &DesignField,
    grad_f: &[f64],
    active: &ActiveSet,
    multipliers: &MultiplierSet,
    gamma: f64,
    move_limit: f64,
) -> Result<DesignField> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param(format!("step exponent must be positive, got {gamma}")));
    }
    let mut rho = multiplicative_candidate(field, grad_f, active, multipliers, gamma)?;
    clip_moves(field.densities(), &mut rho, field.rho_min(), move_limit);
    volume_restore(&field.with_densities(rho)?)
}

/// Rescales the densities that are strictly inside the box until the volume
/// target is met, re-clipping after every pass.
pub fn volume_restore(field: &DesignField) -> Result<DesignField> {
    let target = field.volume_target();
    let rho_min = field.rho_min();
    let v = field.elem_volumes();
    let mut rho = field.densities().to_vec();
    let interior = |r: f64| r > rho_min + BOUND_TOL && r < 1.0 - BOUND_TOL;

    for _ in 0..=rho.len() + 1 {
        let (mut free, mut fixed) = (0.0, 0.0);
        for (&r, &ve) in rho.iter().zip(v) {
            if interior(r) {
                free += r * ve;
            } else {
                fixed += r * ve;
            }
        }
        let vol = free + fixed;
        if (vol - target).abs() <= RESTORE_TOL * target {
            return field.with_densities(rho);
        }
        if free == 0.0 {
            return Err(Error::Feasibility(format!(
                "volume {vol} cannot be moved to target {target}: every density is at a bound"
            )));
        }
        let s = (target - fixed) / free;
        if !(s > 0.0) {
            return Err(Error::Feasibility(format!(
                "bound densities alone carry volume {fixed}, above the target {target}"
            )));
        }
        for r in rho.iter_mut().filter(|r| interior(**r)) {
            *r = (*r * s).clamp(rho_min, 1.0);
        }
    }
    Err(Error::Feasibility(format!(
        "volume restoration did not reach target {target} within tolerance"
    )))
}
