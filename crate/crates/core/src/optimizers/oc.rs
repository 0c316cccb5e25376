use super::OcConfig;
use crate::error::{check_len, Error, Result};
use crate::simp_model::DesignField;

/// `B_e = energy_e / λ`, where `energy_e = −f,ρ_e / v_e` is the sensitivity
/// per unit element volume.
pub fn compute_be(energy_density: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param(format!("optimality-criteria multiplier must be positive, got {lambda}")));
    }
    Ok(energy_density.iter().map(|&e| e / lambda).collect())
}

fn move_bounds(rho: f64, rho_min: f64, zeta: f64) -> (f64, f64) {
    (((1.0 - zeta) * rho).max(rho_min), ((1.0 + zeta) * rho).min(1.0))
}

fn updated_density(rho: f64, be: f64, rho_min: f64, cfg: &OcConfig) -> f64 {
    let (lo, hi) = move_bounds(rho, rho_min, cfg.move_limit);
    (rho * be.max(0.0).powf(cfg.damping)).clamp(lo, hi)
}

/// `ρ_e ← clip(ρ_e B_e^η, max((1−ζ)ρ_e, ρ_min), min((1+ζ)ρ_e, 1))`.
pub fn oc_update(field: &DesignField, be: &[f64], cfg: &OcConfig) -> Result<DesignField> {
    check_len("B factors", field.len(), be.len())?;
    let rho_min = field.rho_min();
    let rho = field
        .densities()
        .iter()
        .zip(be)
        .map(|(&r, &b)| updated_density(r, b, rho_min, cfg))
        .collect();
    field.with_densities(rho)
}

/// Outcome of the inner multiplier search.
#[derive(Debug, Clone, PartialEq)]
pub struct OcSearch {
    pub lambda: f64,
    pub field: DesignField,
    /// False when the move limits cannot reach the volume target; `field`
    /// is then the closest attainable design.
    pub attained: bool,
}

/// Finds `λ` such that the updated field meets the volume target within
/// `inner_tol·V`. The updated volume is non-increasing in `λ`, so a bracketed
/// bisection (in `log λ`) converges.
pub fn oc_lambda_search(field: &DesignField, energy_density: &[f64], cfg: &OcConfig) -> Result<OcSearch> {
    check_len("energy densities", field.len(), energy_density.len())?;
    cfg.validate()?;
    let rho = field.densities();
    let v = field.elem_volumes();
    let rho_min = field.rho_min();
    let target = field.volume_target();
    let tol = cfg.inner_tol * target;

    let volume_at = |lambda: f64| -> f64 {
        rho.iter()
            .zip(energy_density)
            .zip(v)
            .map(|((&r, &e), &ve)| ve * updated_density(r, e / lambda, rho_min, cfg))
            .sum()
    };
    let field_at = |lambda: f64| -> Result<DesignField> {
        let rho = rho
            .iter()
            .zip(energy_density)
            .map(|(&r, &e)| updated_density(r, e / lambda, rho_min, cfg))
            .collect();
        field.with_densities(rho)
    };

    // reachable volume range under the move limits
    let (mut vmin, mut vmax) = (0.0, 0.0);
    for ((&r, &e), &ve) in rho.iter().zip(energy_density).zip(v) {
        let (lo, hi) = move_bounds(r, rho_min, cfg.move_limit);
        vmin += ve * lo;
        vmax += ve * if e > 0.0 { hi } else { lo };
    }
    if target < vmin - tol || target > vmax + tol {
        let to_upper = target > vmax;
        let rho = rho
            .iter()
            .zip(energy_density)
            .map(|(&r, &e)| {
                let (lo, hi) = move_bounds(r, rho_min, cfg.move_limit);
                if to_upper && e > 0.0 {
                    hi
                } else {
                    lo
                }
            })
            .collect();
        let lambda = if to_upper { cfg.lambda_bracket.0 } else { cfg.lambda_bracket.1 };
        return Ok(OcSearch {
            lambda,
            field: field.with_densities(rho)?,
            attained: false,
        });
    }

    // volume-weighted mean energy balances the unclipped update exactly
    let weight: f64 = rho.iter().zip(v).map(|(r, ve)| r * ve).sum();
    let guess = rho
        .iter()
        .zip(energy_density)
        .zip(v)
        .map(|((r, e), ve)| r * e * ve)
        .sum::<f64>()
        / weight;
    if guess > 0.0 && guess.is_finite() && (volume_at(guess) - target).abs() <= tol {
        return Ok(OcSearch {
            lambda: guess,
            field: field_at(guess)?,
            attained: true,
        });
    }

    let (mut lo, mut hi) = cfg.lambda_bracket;
    if guess > 0.0 && guess.is_finite() {
        if volume_at(guess) > target {
            lo = lo.max(guess);
            hi = hi.max(lo * 10.0);
        } else {
            hi = hi.min(guess);
            lo = lo.min(hi / 10.0);
        }
    }
    let mut expansions = 0;
    while volume_at(lo) < target - tol {
        if expansions == MAX_EXPANSIONS {
            return Err(Error::InnerLoop { lo, hi });
        }
        lo /= 10.0;
        expansions += 1;
    }
    expansions = 0;
    while volume_at(hi) > target + tol {
        if expansions == MAX_EXPANSIONS {
            return Err(Error::InnerLoop { lo, hi });
        }
        hi *= 10.0;
        expansions += 1;
    }

    for _ in 0..MAX_BISECTIONS {
        let mid = (lo * hi).sqrt();
        let vol = volume_at(mid);
        if (vol - target).abs() <= tol {
            return Ok(OcSearch {
                lambda: mid,
                field: field_at(mid)?,
                attained: true,
            });
        }
        if vol > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi <= lo * (1.0 + 4.0 * f64::EPSILON) {
            break;
        }
    }
    Err(Error::InnerLoop { lo, hi })
}

const MAX_EXPANSIONS: usize = 60;
const MAX_BISECTIONS: usize = 400;
