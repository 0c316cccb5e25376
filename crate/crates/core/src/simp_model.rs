//! SIMP interpolation, compliance and its sensitivity under enforced equilibrium.

use crate::error::{check_len, Error, Result};
use crate::grid_fe::{
    element_stiffness, Assembler, BoundaryConditions, Displacements, ElementStiffness,
    EquilibriumSolver, GlobalStiffness, StructuredGrid,
};

pub const DEFAULT_RHO_MIN: f64 = 1e-3;
pub const DEFAULT_PENALTY: f64 = 3.0;

/// Tolerance used to decide that a density sits on a bound.
pub const BOUND_TOL: f64 = 1e-12;

/// Element densities with their box bounds and the volume target.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignField {
    rho: Vec<f64>,
    rho_min: f64,
    volume_target: f64,
    elem_volumes: Vec<f64>,
}

impl DesignField {
    pub fn new(rho: Vec<f64>, rho_min: f64, volume_target: f64, elem_volumes: Vec<f64>) -> Result<Self> {
        check_len("element volumes", rho.len(), elem_volumes.len())?;
        if rho.is_empty() {
            return Err(Error::param("design field needs at least one element"));
        }
        if !(rho_min > 0.0 && rho_min < 1.0) {
            return Err(Error::param(format!("rho_min must lie in (0, 1), got {rho_min}")));
        }
        if let Some((e, v)) = elem_volumes.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v.is_finite())) {
            return Err(Error::param(format!("element {e} has non-positive volume {v}")));
        }
        if let Some((e, r)) = rho.iter().enumerate().find(|(_, &r)| !(r >= rho_min && r <= 1.0)) {
            return Err(Error::param(format!("density {r} of element {e} outside [{rho_min}, 1]")));
        }
        let total: f64 = elem_volumes.iter().sum();
        if !(volume_target > 0.0 && volume_target < total) {
            return Err(Error::param(format!(
                "volume target {volume_target} must lie in (0, {total})"
            )));
        }
        Ok(Self {
            rho,
            rho_min,
            volume_target,
            elem_volumes,
        })
    }

    /// Feasible centroid `ρ_e = V / Σ v_e` on a uniform grid.
    pub fn uniform(grid: &StructuredGrid, volume_fraction: f64, rho_min: f64) -> Result<Self> {
        if !(volume_fraction > 0.0 && volume_fraction < 1.0) {
            return Err(Error::param(format!(
                "volume fraction must lie in (0, 1), got {volume_fraction}"
            )));
        }
        let n = grid.num_elements();
        let v = grid.element_volume();
        let target = volume_fraction * v * n as f64;
        Self::new(vec![volume_fraction.max(rho_min); n], rho_min, target, vec![v; n])
    }

    pub fn densities(&self) -> &[f64] {
        &self.rho
    }

    pub fn rho_min(&self) -> f64 {
        self.rho_min
    }

    pub fn volume_target(&self) -> f64 {
        self.volume_target
    }

    pub fn elem_volumes(&self) -> &[f64] {
        &self.elem_volumes
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn volume(&self) -> f64 {
        self.rho.iter().zip(&self.elem_volumes).map(|(r, v)| r * v).sum()
    }

    pub fn total_volume(&self) -> f64 {
        self.elem_volumes.iter().sum()
    }

    pub fn volume_error(&self) -> f64 {
        (self.volume() - self.volume_target).abs() / self.volume_target
    }

    pub fn at_lower(&self, e: usize) -> bool {
        self.rho[e] - self.rho_min <= BOUND_TOL
    }

    pub fn at_upper(&self, e: usize) -> bool {
        1.0 - self.rho[e] <= BOUND_TOL
    }

    /// Same bounds and target, new densities (clipped into the box).
    pub fn with_densities(&self, rho: Vec<f64>) -> Result<Self> {
        check_len("densities", self.rho.len(), rho.len())?;
        if let Some((e, _)) = rho.iter().enumerate().find(|(_, r)| !r.is_finite()) {
            return Err(Error::param(format!("density of element {e} is not finite")));
        }
        let lo = self.rho_min;
        Ok(Self {
            rho: rho.into_iter().map(|r| r.clamp(lo, 1.0)).collect(),
            ..self.clone()
        })
    }
}

/// SIMP material: `E(ρ) = ρ^p E0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpMaterial {
    pub e0: f64,
    pub nu: f64,
    pub penalty: f64,
}

impl SimpMaterial {
    pub fn new(e0: f64, nu: f64, penalty: f64) -> Result<Self> {
        if !(e0.is_finite() && e0 > 0.0) {
            return Err(Error::param(format!("E0 must be positive, got {e0}")));
        }
        if !(0.0..0.5).contains(&nu) {
            return Err(Error::param(format!("nu must lie in [0, 0.5), got {nu}")));
        }
        if !(penalty.is_finite() && penalty >= 1.0) {
            return Err(Error::param(format!("penalty must be >= 1, got {penalty}")));
        }
        Ok(Self { e0, nu, penalty })
    }
}

impl Default for SimpMaterial {
    fn default() -> Self {
        Self {
            e0: 1.0,
            nu: 0.3,
            penalty: DEFAULT_PENALTY,
        }
    }
}

pub fn effective_modulus(rho_e: f64, mat: &SimpMaterial) -> Result<f64> {
    if !(rho_e > 0.0 && rho_e <= 1.0) {
        return Err(Error::param(format!("density {rho_e} outside (0, 1]")));
    }
    Ok(rho_e.powf(mat.penalty) * mat.e0)
}

/// `uᵀ K u`.
pub fn compliance(u: &Displacements, k: &GlobalStiffness) -> Result<f64> {
    check_len("displacements", k.dim(), u.0.len())?;
    Ok(k.quadratic_form(&u.0))
}

/// `f,ρ_e = −(p/ρ_e) ρ_e^p u_eᵀ k0 u_e`, which is never positive.
pub fn compliance_gradient(
    grid: &StructuredGrid,
    u: &Displacements,
    rho: &DesignField,
    mat: &SimpMaterial,
    k0: &ElementStiffness,
) -> Result<Vec<f64>> {
    check_len("densities", grid.num_elements(), rho.len())?;
    check_len("displacements", grid.num_dofs(), u.0.len())?;
    let p = mat.penalty;
    Ok(rho
        .densities()
        .iter()
        .enumerate()
        .map(|(e, &r)| {
            let energy = k0.energy(&u.element_vector(grid, e)).max(0.0);
            -(p / r) * r.powf(p) * energy
        })
        .collect())
}

/// Equilibrium state of one design.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub stiffness: GlobalStiffness,
    pub displacements: Displacements,
    pub compliance: f64,
}

/// Grid, supports, loads and material with the reusable FE machinery
/// (element stiffness, assembly map, symbolic factorization).
#[derive(Debug, Clone)]
pub struct StructuralModel {
    grid: StructuredGrid,
    bc: BoundaryConditions,
    material: SimpMaterial,
    k0: ElementStiffness,
    assembler: Assembler,
    solver: EquilibriumSolver,
}

impl StructuralModel {
    pub fn new(grid: StructuredGrid, bc: BoundaryConditions, material: SimpMaterial) -> Result<Self> {
        bc.validate(&grid)?;
        let k0 = element_stiffness(material.e0, material.nu, &grid)?;
        let assembler = Assembler::new(&grid);
        let solver = EquilibriumSolver::new(grid.num_dofs(), &bc)?;
        Ok(Self {
            grid,
            bc,
            material,
            k0,
            assembler,
            solver,
        })
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    pub fn bc(&self) -> &BoundaryConditions {
        &self.bc
    }

    pub fn material(&self) -> &SimpMaterial {
        &self.material
    }

    pub fn element_stiffness(&self) -> &ElementStiffness {
        &self.k0
    }

    pub fn load(&self) -> &[f64] {
        self.solver.load()
    }

    pub fn analyze(&mut self, field: &DesignField) -> Result<Analysis> {
        let stiffness = self
            .assembler
            .assemble(&self.k0, field.densities(), self.material.penalty)?;
        let displacements = self.solver.solve(&stiffness)?;
        // 2pᵀu − uᵀKu equals uᵀKu at equilibrium, with an error quadratic in the solve error
        let work: f64 = self.solver.load().iter().zip(&displacements.0).map(|(p, u)| p * u).sum();
        let compliance = 2.0 * work - compliance(&displacements, &stiffness)?;
        Ok(Analysis {
            stiffness,
            displacements,
            compliance,
        })
    }

    pub fn gradient(&self, field: &DesignField, analysis: &Analysis) -> Result<Vec<f64>> {
        compliance_gradient(&self.grid, &analysis.displacements, field, &self.material, &self.k0)
    }
}

/// Central difference of compliance in density `e`, re-solving equilibrium at
/// both perturbed designs.
pub fn fd_gradient_oracle(model: &mut StructuralModel, rho: &DesignField, e: usize, step: f64) -> Result<f64> {
    model.grid().check_element(e)?;
    if !(step > 0.0) {
        return Err(Error::param(format!("step must be positive, got {step}")));
    }
    let r = rho.densities()[e];
    if r - step < rho.rho_min() || r + step > 1.0 {
        return Err(Error::param(format!(
            "perturbation ±{step} of density {r} leaves [{}, 1]",
            rho.rho_min()
        )));
    }
    let mut eval = |val: f64| -> Result<f64> {
        let mut d = rho.densities().to_vec();
        d[e] = val;
        let f = DesignField {
            rho: d,
            ..rho.clone()
        };
        Ok(model.analyze(&f)?.compliance)
    };
    let plus = eval(r + step)?;
    let minus = eval(r - step)?;
    Ok((plus - minus) / (2.0 * step))
}
