use nalgebra::DMatrix;

use super::{ElementStiffness, StructuredGrid};
use crate::error::{check_len, Error, Result};
use crate::simp_model::DesignField;

/// Global stiffness in compressed-row form, both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalStiffness {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl GlobalStiffness {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `xᵀ K x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        super::dot(x, &self.matvec(x))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }
}

/// Precomputed sparsity pattern plus, for every stored entry, the list of
/// element contributions in ascending element order. Each entry is summed in
/// that fixed order, so the assembled values do not depend on how elements are
/// visited and repeated assemblies are bit-identical.
#[derive(Debug, Clone)]
pub struct Assembler {
    grid: StructuredGrid,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    contrib_ptr: Vec<usize>,
    contribs: Vec<(u32, u8)>, // (element, 8*a + b)
}

impl Assembler {
    pub fn new(grid: &StructuredGrid) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let ndofs = grid.num_dofs();

        let mut row_ptr = Vec::with_capacity(ndofs + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for node in 0..grid.num_nodes() {
            let (i, j) = grid.node_coords(node);
            let mut cols = Vec::with_capacity(18);
            for jj in j.saturating_sub(1)..=(j + 1).min(ny) {
                for ii in i.saturating_sub(1)..=(i + 1).min(nx) {
                    let m = grid.node_index(ii, jj);
                    cols.push(2 * m);
                    cols.push(2 * m + 1);
                }
            }
            for _ in 0..2 {
                col_idx.extend_from_slice(&cols);
                row_ptr.push(col_idx.len());
            }
        }

        let mut per_entry: Vec<Vec<(u32, u8)>> = vec![Vec::new(); col_idx.len()];
        for e in 0..grid.num_elements() {
            let dofs = grid.element_dofs(e);
            for (a, &r) in dofs.iter().enumerate() {
                let span = row_ptr[r]..row_ptr[r + 1];
                for (b, &c) in dofs.iter().enumerate() {
                    let k = span.start
                        + col_idx[span.clone()]
                            .binary_search(&c)
                            .expect("element dof pair missing from pattern");
                    per_entry[k].push((e as u32, (8 * a + b) as u8));
                }
            }
        }
        let mut contrib_ptr = Vec::with_capacity(per_entry.len() + 1);
        let mut contribs = Vec::new();
        contrib_ptr.push(0);
        for list in per_entry {
            contribs.extend(list);
            contrib_ptr.push(contribs.len());
        }

        Self {
            grid: grid.clone(),
            row_ptr,
            col_idx,
            contrib_ptr,
            contribs,
        }
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    /// `K = Σ_e scale_e · scatter(k0)`.
    pub fn assemble_scaled(&self, k0: &ElementStiffness, scale: &[f64]) -> Result<GlobalStiffness> {
        check_len("element scale factors", self.grid.num_elements(), scale.len())?;
        let k = k0.k0.as_slice(); // column-major; k0 is symmetric so (a,b) order is immaterial
        let values = self
            .contrib_ptr
            .windows(2)
            .map(|w| {
                self.contribs[w[0]..w[1]]
                    .iter()
                    .map(|&(e, ab)| scale[e as usize] * k[ab as usize])
                    .sum()
            })
            .collect();
        Ok(GlobalStiffness {
            n: self.grid.num_dofs(),
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values,
        })
    }

    /// SIMP assembly `K(ρ) = Σ_e ρ_e^p k0`.
    pub fn assemble(&self, k0: &ElementStiffness, rho: &[f64], penalty: f64) -> Result<GlobalStiffness> {
        check_len("densities", self.grid.num_elements(), rho.len())?;
        if let Some((e, r)) = rho.iter().enumerate().find(|(_, &r)| !(r > 0.0 && r <= 1.0)) {
            return Err(Error::param(format!("density {r} of element {e} outside (0, 1]")));
        }
        let scale: Vec<f64> = rho.iter().map(|r| r.powf(penalty)).collect();
        self.assemble_scaled(k0, &scale)
    }
}

/// One-shot SIMP assembly; optimizers keep an [`Assembler`] instead.
pub fn assemble(
    grid: &StructuredGrid,
    k0: &ElementStiffness,
    rho: &DesignField,
    penalty: f64,
) -> Result<GlobalStiffness> {
    Assembler::new(grid).assemble(k0, rho.densities(), penalty)
}
