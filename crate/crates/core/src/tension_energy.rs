//! Tension-only sensitivities from reduced principal stresses.
//!
//! Stresses are evaluated at the four Gauss points with the penalized modulus
//! `ρ^p E0`. Compressive principal values are multiplied by a reduction
//! factor `k` before forming the complementary energy density
//! `(σI² − 2ν σI σII + σII²) / E`.

use crate::error::{check_len, Error, Result};
use crate::grid_fe::{gauss_point_stresses, Displacements, StressTensor2D, StructuredGrid};
use crate::simp_model::{effective_modulus, DesignField, SimpMaterial};

/// Principal values `s1 ≥ s2` and the angle of the `s1` axis from x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalStresses {
    pub s1: f64,
    pub s2: f64,
    pub theta: f64,
}

/// Reduction factor applied to compressive principal stresses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensionConfig {
    k: f64,
}

impl TensionConfig {
    pub fn new(k: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&k) {
            return Err(Error::param(format!("reduction factor must lie in [0, 1], got {k}")));
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> f64 {
        self.k
    }
}

pub fn principal_stresses(s: &StressTensor2D) -> PrincipalStresses {
    let c = 0.5 * (s.sxx + s.syy);
    let h = 0.5 * (s.sxx - s.syy);
    let r = h.hypot(s.txy);
    PrincipalStresses {
        s1: c + r,
        s2: c - r,
        theta: 0.5 * s.txy.atan2(h),
    }
}

/// Keeps positive principal values and scales the others by `k`.
pub fn reduce_stresses(ps: &PrincipalStresses, cfg: &TensionConfig) -> (f64, f64) {
    let r = |s: f64| if s > 0.0 { s } else { cfg.k * s };
    (r(ps.s1), r(ps.s2))
}

fn energy_density(s1: f64, s2: f64, nu: f64, modulus: f64) -> f64 {
    (s1 * s1 - 2.0 * nu * s1 * s2 + s2 * s2) / modulus
}

/// Gauss-point stresses of every element at the penalized modulus.
pub fn element_stresses(
    grid: &StructuredGrid,
    u: &Displacements,
    field: &DesignField,
    mat: &SimpMaterial,
) -> Result<Vec<[StressTensor2D; 4]>> {
    check_len("densities", grid.num_elements(), field.len())?;
    field
        .densities()
        .iter()
        .enumerate()
        .map(|(e, &r)| gauss_point_stresses(grid, e, u, effective_modulus(r, mat)?, mat.nu))
        .collect()
}

/// Per-element `detJ · w_g` for the 2×2 rule (all weights are one).
pub fn gauss_jacobians(grid: &StructuredGrid) -> Vec<[f64; 4]> {
    vec![[grid.jacobian_det(); 4]; grid.num_elements()]
}

fn element_energies(
    field: &DesignField,
    mat: &SimpMaterial,
    stresses: &[[StressTensor2D; 4]],
    det_j: &[[f64; 4]],
    thickness: f64,
    k: f64,
) -> Result<Vec<f64>> {
    check_len("element stresses", field.len(), stresses.len())?;
    check_len("Jacobian determinants", field.len(), det_j.len())?;
    let cfg = TensionConfig::new(k)?;
    field
        .densities()
        .iter()
        .zip(stresses.iter().zip(det_j))
        .map(|(&r, (sig, dj))| {
            let modulus = effective_modulus(r, mat)?;
            Ok(sig
                .iter()
                .zip(dj)
                .map(|(s, &w)| {
                    let (a, b) = reduce_stresses(&principal_stresses(s), &cfg);
                    energy_density(a, b, mat.nu, modulus) * w * thickness
                })
                .sum())
        })
        .collect()
}

/// `(p/ρ_e) Σ_g (s̄I² − 2ν s̄I s̄II + s̄II²) / (ρ_e^p E0) · detJ · t` per
/// element. With `k = 1` this is the negated compliance gradient.
pub fn tension_gradient(
    field: &DesignField,
    mat: &SimpMaterial,
    stresses: &[[StressTensor2D; 4]],
    det_j: &[[f64; 4]],
    thickness: f64,
    cfg: &TensionConfig,
) -> Result<Vec<f64>> {
    let energies = element_energies(field, mat, stresses, det_j, thickness, cfg.k)?;
    Ok(field
        .densities()
        .iter()
        .zip(energies)
        .map(|(&r, w)| mat.penalty / r * w)
        .collect())
}

/// Total reduced strain energy `Σ_e Σ_g (…)·detJ·t`. Equals the compliance
/// for `k = 1`.
pub fn reduced_energy(
    field: &DesignField,
    mat: &SimpMaterial,
    stresses: &[[StressTensor2D; 4]],
    det_j: &[[f64; 4]],
    thickness: f64,
    cfg: &TensionConfig,
) -> Result<f64> {
    Ok(element_energies(field, mat, stresses, det_j, thickness, cfg.k)?.iter().sum())
}

/// Fraction of the Gauss-point elastic energy carried by compressive
/// principal stresses: `1 − E(k=0) / E(k=1)`.
pub fn compressive_energy_share(
    field: &DesignField,
    mat: &SimpMaterial,
    stresses: &[[StressTensor2D; 4]],
    det_j: &[[f64; 4]],
    thickness: f64,
) -> Result<f64> {
    let total = reduced_energy(field, mat, stresses, det_j, thickness, &TensionConfig::new(1.0)?)?;
    if total == 0.0 {
        return Ok(0.0);
    }
    let tensile = reduced_energy(field, mat, stresses, det_j, thickness, &TensionConfig::new(0.0)?)?;
    Ok((total - tensile) / total)
}
