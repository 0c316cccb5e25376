//! Structured plane-stress finite-element layer.
//!
//! Numbering conventions, fixed so that every output is reproducible:
//!
//! * node `(i, j)` with `0 <= i <= nx`, `0 <= j <= ny` has index `j * (nx + 1) + i`;
//!   `j = 0` is the bottom row.
//! * node `n` owns DOFs `2n` (x) and `2n + 1` (y).
//! * elements are numbered column-major: element `(ex, ey)` has index `ex * ny + ey`.
//! * the four element nodes run counter-clockwise from the bottom-left corner,
//!   and the element DOF vector is `[u0, v0, u1, v1, u2, v2, u3, v3]`.

mod assembly;
mod element;
mod solve;

use std::collections::BTreeSet;

use crate::error::{Error, Result};

pub use assembly::{assemble, Assembler, GlobalStiffness};
pub use element::{
    element_stiffness, gauss_point_stresses, strain_displacement, ElementStiffness, PlaneStress,
    StressTensor2D, GAUSS_POINTS,
};
pub use solve::{solve_equilibrium, EquilibriumSolver};

/// Uniform rectangular mesh of bilinear quadrilaterals.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredGrid {
    nx: usize,
    ny: usize,
    elem_w: f64,
    elem_h: f64,
    thickness: f64,
}

impl StructuredGrid {
    pub fn new(nx: usize, ny: usize, elem_w: f64, elem_h: f64, thickness: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::param(format!(
                "grid needs at least one element per direction, got {nx}x{ny}"
            )));
        }
        for (name, v) in [("elem_w", elem_w), ("elem_h", elem_h), ("thickness", thickness)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            nx,
            ny,
            elem_w,
            elem_h,
            thickness,
        })
    }

    /// Unit-square elements of unit thickness.
    pub fn unit(nx: usize, ny: usize) -> Result<Self> {
        Self::new(nx, ny, 1.0, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn elem_w(&self) -> f64 {
        self.elem_w
    }

    pub fn elem_h(&self) -> f64 {
        self.elem_h
    }

    pub fn thickness(&self) -> f64 {
        self.thickness
    }

    pub fn num_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn num_dofs(&self) -> usize {
        2 * self.num_nodes()
    }

    pub fn num_elements(&self) -> usize {
        self.nx * self.ny
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.nx && j <= self.ny);
        j * (self.nx + 1) + i
    }

    /// Inverse of [`node_index`](Self::node_index).
    pub fn node_coords(&self, node: usize) -> (usize, usize) {
        (node % (self.nx + 1), node / (self.nx + 1))
    }

    pub fn element_index(&self, ex: usize, ey: usize) -> usize {
        debug_assert!(ex < self.nx && ey < self.ny);
        ex * self.ny + ey
    }

    pub fn element_coords(&self, e: usize) -> (usize, usize) {
        (e / self.ny, e % self.ny)
    }

    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        let (i, j) = self.element_coords(e);
        [
            self.node_index(i, j),
            self.node_index(i + 1, j),
            self.node_index(i + 1, j + 1),
            self.node_index(i, j + 1),
        ]
    }

    pub fn element_dofs(&self, e: usize) -> [usize; 8] {
        let n = self.element_nodes(e);
        [
            2 * n[0],
            2 * n[0] + 1,
            2 * n[1],
            2 * n[1] + 1,
            2 * n[2],
            2 * n[2] + 1,
            2 * n[3],
            2 * n[3] + 1,
        ]
    }

    pub fn element_volume(&self) -> f64 {
        self.elem_w * self.elem_h * self.thickness
    }

    /// Jacobian determinant of the reference-to-physical map (constant on a
    /// rectangular element).
    pub fn jacobian_det(&self) -> f64 {
        0.25 * self.elem_w * self.elem_h
    }

    pub(crate) fn check_element(&self, e: usize) -> Result<()> {
        if e < self.num_elements() {
            Ok(())
        } else {
            Err(Error::param(format!(
                "element {e} out of range (grid has {})",
                self.num_elements()
            )))
        }
    }
}

/// Supports and nodal point loads.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryConditions {
    pub fixed_dofs: BTreeSet<usize>,
    pub loads: Vec<(usize, f64)>,
}

impl BoundaryConditions {
    pub fn new(fixed_dofs: impl IntoIterator<Item = usize>, loads: Vec<(usize, f64)>) -> Self {
        Self {
            fixed_dofs: fixed_dofs.into_iter().collect(),
            loads,
        }
    }

    /// Checks index ranges and rejects loads applied to fixed DOFs.
    ///
    /// Whether the supports remove every rigid-body mode is only known once the
    /// reduced system is factored; the solver reports that case.
    pub fn validate(&self, grid: &StructuredGrid) -> Result<()> {
        let ndofs = grid.num_dofs();
        if let Some(&d) = self.fixed_dofs.iter().find(|&&d| d >= ndofs) {
            return Err(Error::Validation(format!(
                "fixed dof {d} out of range (grid has {ndofs} dofs)"
            )));
        }
        for &(d, f) in &self.loads {
            if d >= ndofs {
                return Err(Error::Validation(format!(
                    "loaded dof {d} out of range (grid has {ndofs} dofs)"
                )));
            }
            if !f.is_finite() {
                return Err(Error::Validation(format!("load on dof {d} is not finite")));
            }
            if self.fixed_dofs.contains(&d) {
                return Err(Error::Validation(format!("dof {d} is both fixed and loaded")));
            }
        }
        if self.fixed_dofs.len() >= ndofs {
            return Err(Error::Validation("every dof is fixed".into()));
        }
        Ok(())
    }

    /// Dense global load vector; repeated entries for one DOF are summed.
    pub fn load_vector(&self, ndofs: usize) -> Vec<f64> {
        let mut p = vec![0.0; ndofs];
        for &(d, f) in &self.loads {
            p[d] += f;
        }
        p
    }
}

/// Global nodal displacement vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Displacements(pub Vec<f64>);

impl Displacements {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn element_vector(&self, grid: &StructuredGrid, e: usize) -> [f64; 8] {
        grid.element_dofs(e).map(|d| self.0[d])
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
