use faer::linalg::cholesky::llt::factor::LltError as DenseLltError;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::linalg::LltError;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use super::{BoundaryConditions, Displacements, GlobalStiffness};
use crate::error::{Error, Result};

const RESIDUAL_TOL: f64 = 1e-10;
const MAX_REFINEMENTS: usize = 3;

/// Solves `K u = p` on the free DOFs after eliminating the fixed ones.
///
/// The symbolic factorization depends only on the sparsity pattern and the
/// set of fixed DOFs, so it is computed on the first solve and reused.
#[derive(Debug, Clone)]
pub struct EquilibriumSolver {
    ndofs: usize,
    free: Vec<usize>,
    reduced: Vec<usize>, // usize::MAX for fixed dofs
    load: Vec<f64>,
    symbolic: Option<SymbolicLlt<usize>>,
}

impl EquilibriumSolver {
    pub fn new(ndofs: usize, bc: &BoundaryConditions) -> Result<Self> {
        if let Some(&d) = bc.fixed_dofs.iter().find(|&&d| d >= ndofs) {
            return Err(Error::param(format!("fixed dof {d} out of range")));
        }
        if let Some(&(d, _)) = bc.loads.iter().find(|(d, _)| *d >= ndofs) {
            return Err(Error::param(format!("loaded dof {d} out of range")));
        }
        let mut reduced = vec![usize::MAX; ndofs];
        let mut free = Vec::with_capacity(ndofs - bc.fixed_dofs.len());
        for (d, slot) in reduced.iter_mut().enumerate() {
            if !bc.fixed_dofs.contains(&d) {
                *slot = free.len();
                free.push(d);
            }
        }
        Ok(Self {
            ndofs,
            free,
            reduced,
            load: bc.load_vector(ndofs),
            symbolic: None,
        })
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn solve(&mut self, k: &GlobalStiffness) -> Result<Displacements> {
        if k.dim() != self.ndofs {
            return Err(Error::SizeMismatch {
                what: "stiffness dimension",
                expected: self.ndofs,
                actual: k.dim(),
            });
        }
        let n = self.free.len();
        let p_norm = super::norm2(&self.load);
        if p_norm == 0.0 {
            return Ok(Displacements(vec![0.0; self.ndofs]));
        }

        let mut triplets = Vec::with_capacity(k.nnz() / 2 + n);
        for (rr, &r) in self.free.iter().enumerate() {
            for (c, v) in k.row(r) {
                let rc = self.reduced[c];
                if rc != usize::MAX && rc <= rr {
                    triplets.push(Triplet::new(rr, rc, v));
                }
            }
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::Solve(format!("building reduced matrix: {e:?}")))?;
        let symbolic = match &self.symbolic {
            Some(s) => s.clone(),
            None => {
                let s = SymbolicLlt::try_new(mat.symbolic(), Side::Lower)
                    .map_err(|e| Error::Solve(format!("symbolic factorization: {e:?}")))?;
                self.symbolic = Some(s.clone());
                s
            }
        };
        let llt = Llt::try_new_with_symbolic(symbolic, mat.as_ref(), Side::Lower).map_err(|e| match e {
            LltError::Numeric(DenseLltError::NonPositivePivot { index }) => Error::Solve(format!(
                "reduced stiffness is not positive definite: non-positive pivot at elimination step {index} of {n} \
                 (do the supports remove every rigid-body mode?)"
            )),
            other => Error::Solve(format!("numeric factorization: {other:?}")),
        })?;

        let p_red: Vec<f64> = self.free.iter().map(|&d| self.load[d]).collect();
        let mut rhs = Mat::<f64>::from_fn(n, 1, |i, _| p_red[i]);
        llt.solve_in_place(rhs.as_mut());
        let mut u = vec![0.0; self.ndofs];
        for (rr, &d) in self.free.iter().enumerate() {
            u[d] = rhs[(rr, 0)];
        }

        let mut res = self.residual(k, &u);
        let mut refinements = 0;
        while super::norm2(&res) > RESIDUAL_TOL * p_norm {
            if refinements == MAX_REFINEMENTS {
                return Err(Error::Solve(format!(
                    "residual {:e} exceeds {RESIDUAL_TOL:e}·‖p‖ after {MAX_REFINEMENTS} refinement steps",
                    super::norm2(&res) / p_norm
                )));
            }
            let mut corr = Mat::<f64>::from_fn(n, 1, |i, _| res[i]);
            llt.solve_in_place(corr.as_mut());
            for (rr, &d) in self.free.iter().enumerate() {
                u[d] += corr[(rr, 0)];
            }
            res = self.residual(k, &u);
            refinements += 1;
        }
        Ok(Displacements(u))
    }

    /// `p_r − K_r u_r` on the free DOFs.
    fn residual(&self, k: &GlobalStiffness, u: &[f64]) -> Vec<f64> {
        self.free
            .iter()
            .map(|&r| self.load[r] - k.row(r).map(|(c, v)| v * u[c]).sum::<f64>())
            .collect()
    }
}

/// One-shot equilibrium solve.
pub fn solve_equilibrium(k: &GlobalStiffness, bc: &BoundaryConditions) -> Result<Displacements> {
    EquilibriumSolver::new(k.dim(), bc)?.solve(k)
}

#[cfg(test)]
mod tests {
    use nalgebra::DVector;

    use super::*;
    use crate::grid_fe::{element_stiffness, Assembler, StructuredGrid};

    fn left_fixed(g: &StructuredGrid) -> Vec<usize> {
        (0..=g.ny())
            .flat_map(|j| {
                let n = g.node_index(0, j);
                [2 * n, 2 * n + 1]
            })
            .collect()
    }

    #[test]
    fn zero_load_gives_zero_displacement() {
        let g = StructuredGrid::unit(2, 1).unwrap();
        let k0 = element_stiffness(1.0, 0.3, &g).unwrap();
        let k = Assembler::new(&g).assemble(&k0, &[1.0, 1.0], 3.0).unwrap();
        let u = solve_equilibrium(&k, &BoundaryConditions::new(left_fixed(&g), vec![])).unwrap();
        assert!(u.0.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_element_pull() {
        let g = StructuredGrid::unit(1, 1).unwrap();
        let k0 = element_stiffness(1.0, 0.3, &g).unwrap();
        let k = Assembler::new(&g).assemble(&k0, &[1.0], 3.0).unwrap();
        let bc = BoundaryConditions::new(left_fixed(&g), vec![(2, 1.0), (6, 1.0)]);
        let u = solve_equilibrium(&k, &bc).unwrap();
        for &d in &bc.fixed_dofs {
            assert_eq!(u.0[d], 0.0);
        }
        let r = k.matvec(&u.0);
        let p = bc.load_vector(g.num_dofs());
        let res: f64 = (0..g.num_dofs())
            .filter(|d| !bc.fixed_dofs.contains(d))
            .map(|d| (r[d] - p[d]).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(res <= 1e-10 * 2f64.sqrt());
        assert!(u.0[2] > 0.0 && u.0[6] > 0.0);
    }

    #[test]
    fn cantilever_strip_matches_dense_solve() {
        let g = StructuredGrid::unit(4, 1).unwrap();
        let k0 = element_stiffness(1.0, 0.3, &g).unwrap();
        let rho = [1.0, 0.8, 0.6, 0.9];
        let k = Assembler::new(&g).assemble(&k0, &rho, 3.0).unwrap();
        let tip = g.node_index(4, 1);
        let bc = BoundaryConditions::new(left_fixed(&g), vec![(2 * tip + 1, -1.0)]);
        let u = solve_equilibrium(&k, &bc).unwrap();

        // Independent route: dense reduced system, nalgebra LU.
        let dense = k.to_dense();
        let free: Vec<usize> = (0..g.num_dofs()).filter(|d| !bc.fixed_dofs.contains(d)).collect();
        let kr = dense.select_rows(&free).select_columns(&free);
        let p = bc.load_vector(g.num_dofs());
        let pr = DVector::from_iterator(free.len(), free.iter().map(|&d| p[d]));
        let ur = kr.lu().solve(&pr).unwrap();
        for (i, &d) in free.iter().enumerate() {
            assert!((u.0[d] - ur[i]).abs() <= 1e-10 * ur.amax());
        }
        assert!(u.0[2 * tip + 1] < 0.0);
    }

    #[test]
    fn unsupported_structure_is_a_solve_error() {
        let g = StructuredGrid::unit(2, 1).unwrap();
        let k0 = element_stiffness(1.0, 0.3, &g).unwrap();
        let k = Assembler::new(&g).assemble(&k0, &[1.0, 1.0], 3.0).unwrap();
        // only one dof fixed: rotation and one translation remain
        let bc = BoundaryConditions::new([0], vec![(5, 1.0)]);
        let err = solve_equilibrium(&k, &bc).unwrap_err();
        assert!(matches!(err, Error::Solve(_)), "{err}");
    }
}
