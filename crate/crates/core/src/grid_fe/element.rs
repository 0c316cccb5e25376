use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use super::{Displacements, StructuredGrid};
use crate::error::{Error, Result};

pub type Matrix8 = SMatrix<f64, 8, 8>;
pub type StrainDisplacement = SMatrix<f64, 3, 8>;

const G: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)

/// 2×2 Gauss points in reference coordinates, ordered like the element nodes.
/// All weights are 1.
pub const GAUSS_POINTS: [(f64, f64); 4] = [(-G, -G), (G, -G), (G, G), (-G, G)];

/// Isotropic plane-stress constitutive law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneStress {
    pub youngs: f64,
    pub poisson: f64,
}

impl PlaneStress {
    pub fn new(youngs: f64, poisson: f64) -> Result<Self> {
        if !(youngs.is_finite() && youngs > 0.0) {
            return Err(Error::param(format!("Young's modulus must be positive, got {youngs}")));
        }
        if !(0.0..0.5).contains(&poisson) {
            return Err(Error::param(format!("Poisson ratio must lie in [0, 0.5), got {poisson}")));
        }
        Ok(Self { youngs, poisson })
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let nu = self.poisson;
        let f = self.youngs / (1.0 - nu * nu);
        Matrix3::new(
            f,
            f * nu,
            0.0,
            f * nu,
            f,
            0.0,
            0.0,
            0.0,
            f * 0.5 * (1.0 - nu),
        )
    }

    /// `σ : C⁻¹ : σ`, twice the complementary energy density.
    pub fn stress_energy_density(&self, s: &StressTensor2D) -> f64 {
        let nu = self.poisson;
        (s.sxx * s.sxx + s.syy * s.syy - 2.0 * nu * s.sxx * s.syy
            + 2.0 * (1.0 + nu) * s.txy * s.txy)
            / self.youngs
    }
}

/// In-plane Cauchy stress.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StressTensor2D {
    pub sxx: f64,
    pub syy: f64,
    pub txy: f64,
}

impl StressTensor2D {
    pub fn new(sxx: f64, syy: f64, txy: f64) -> Self {
        Self { sxx, syy, txy }
    }
}

/// Unpenalized element stiffness `K_e^Elastic` shared by every element of a
/// uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementStiffness {
    pub k0: Matrix8,
    /// Orthonormal rigid-body modes: two translations and the rotation about
    /// the element centre.
    rigid: [SVector<f64, 8>; 3],
}

impl ElementStiffness {
    /// `uᵀ k0 u` for an element displacement vector. The rigid-body part of
    /// `u` is removed first, since it only contributes cancellation error.
    pub fn energy(&self, ue: &[f64; 8]) -> f64 {
        let mut u = SVector::<f64, 8>::from_column_slice(ue);
        for r in &self.rigid {
            u -= r * r.dot(&u);
        }
        (u.transpose() * self.k0 * u)[(0, 0)]
    }
}

fn rigid_modes(w: f64, h: f64) -> [SVector<f64, 8>; 3] {
    let xy = [(-0.5 * w, -0.5 * h), (0.5 * w, -0.5 * h), (0.5 * w, 0.5 * h), (-0.5 * w, 0.5 * h)];
    let mut tx = SVector::<f64, 8>::zeros();
    let mut ty = SVector::<f64, 8>::zeros();
    let mut rot = SVector::<f64, 8>::zeros();
    for (a, &(x, y)) in xy.iter().enumerate() {
        tx[2 * a] = 0.5;
        ty[2 * a + 1] = 0.5;
        rot[2 * a] = -y;
        rot[2 * a + 1] = x;
    }
    [tx, ty, rot.normalize()]
}

/// Strain-displacement matrix at a reference point, ε = [εxx, εyy, γxy] = B·u_e.
pub fn strain_displacement(grid: &StructuredGrid, xi: f64, eta: f64) -> StrainDisplacement {
    // dN/dξ and dN/dη for the CCW node order, then chain rule with the
    // diagonal Jacobian of a rectangle.
    let dxi = [-(1.0 - eta), 1.0 - eta, 1.0 + eta, -(1.0 + eta)];
    let deta = [-(1.0 - xi), -(1.0 + xi), 1.0 + xi, 1.0 - xi];
    let sx = 0.5 / grid.elem_w(); // 0.25 * 2/w
    let sy = 0.5 / grid.elem_h();
    let mut b = StrainDisplacement::zeros();
    for a in 0..4 {
        let dx = dxi[a] * sx;
        let dy = deta[a] * sy;
        b[(0, 2 * a)] = dx;
        b[(1, 2 * a + 1)] = dy;
        b[(2, 2 * a)] = dy;
        b[(2, 2 * a + 1)] = dx;
    }
    b
}

/// Bilinear-quad plane-stress stiffness, integrated with 2×2 Gauss quadrature
/// (exact for this element) and scaled by the thickness.
pub fn element_stiffness(e0: f64, nu: f64, grid: &StructuredGrid) -> Result<ElementStiffness> {
    let c = PlaneStress::new(e0, nu)?.matrix();
    let w = grid.jacobian_det() * grid.thickness();
    let mut k0 = Matrix8::zeros();
    for &(xi, eta) in &GAUSS_POINTS {
        let b = strain_displacement(grid, xi, eta);
        k0 += b.transpose() * c * b * w;
    }
    // Remove round-off asymmetry so k0 == k0ᵀ bitwise.
    let k0 = (k0 + k0.transpose()) * 0.5;
    Ok(ElementStiffness {
        k0,
        rigid: rigid_modes(grid.elem_w(), grid.elem_h()),
    })
}

/// Stresses `σ = C·B(ξ_g)·u_e` at the four Gauss points of element `e`.
///
/// `youngs` is the modulus the element actually carries, i.e. the
/// SIMP-effective value `ρ_e^p E0` when recovering stresses of a design.
pub fn gauss_point_stresses(
    grid: &StructuredGrid,
    e: usize,
    u: &Displacements,
    youngs: f64,
    nu: f64,
) -> Result<[StressTensor2D; 4]> {
    grid.check_element(e)?;
    let c = PlaneStress::new(youngs, nu)?.matrix();
    let ue = SVector::<f64, 8>::from(u.element_vector(grid, e));
    Ok(GAUSS_POINTS.map(|(xi, eta)| {
        let s: Vector3<f64> = c * (strain_displacement(grid, xi, eta) * ue);
        StressTensor2D::new(s[0], s[1], s[2])
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_fe::StructuredGrid;

    // Exact ∫BᵀCB dA in physical coordinates for a unit square, E=1, ν=0.3,
    // evaluated symbolically (no quadrature) outside this crate.
    const UNIT_SQUARE_E1_NU03: [[f64; 8]; 8] = [
        [0.4945054945054945, 0.17857142857142858, -0.3021978021978022, -0.013736263736263736, -0.24725274725274726, -0.17857142857142858, 0.054945054945054944, 0.013736263736263736],
        [0.17857142857142858, 0.4945054945054945, 0.013736263736263736, 0.054945054945054944, -0.17857142857142858, -0.24725274725274726, -0.013736263736263736, -0.3021978021978022],
        [-0.3021978021978022, 0.013736263736263736, 0.4945054945054945, -0.17857142857142858, 0.054945054945054944, -0.013736263736263736, -0.24725274725274726, 0.17857142857142858],
        [-0.013736263736263736, 0.054945054945054944, -0.17857142857142858, 0.4945054945054945, 0.013736263736263736, -0.3021978021978022, 0.17857142857142858, -0.24725274725274726],
        [-0.24725274725274726, -0.17857142857142858, 0.054945054945054944, 0.013736263736263736, 0.4945054945054945, 0.17857142857142858, -0.3021978021978022, -0.013736263736263736],
        [-0.17857142857142858, -0.24725274725274726, -0.013736263736263736, -0.3021978021978022, 0.17857142857142858, 0.4945054945054945, 0.013736263736263736, 0.054945054945054944],
        [0.054945054945054944, -0.013736263736263736, -0.24725274725274726, 0.17857142857142858, -0.3021978021978022, 0.013736263736263736, 0.4945054945054945, -0.17857142857142858],
        [0.013736263736263736, -0.3021978021978022, 0.17857142857142858, -0.24725274725274726, -0.013736263736263736, 0.054945054945054944, -0.17857142857142858, 0.4945054945054945],
    ];

    // Same oracle for a 2 × 0.5 element, E=2, ν=0.25, unit thickness.
    const RECT_2X05_E2_NU025: [[f64; 8]; 8] = [
        [1.2444444444444445, 0.3333333333333333, 0.35555555555555557, -0.06666666666666667, -0.6222222222222222, -0.3333333333333333, -0.9777777777777777, 0.06666666666666667],
        [0.3333333333333333, 2.911111111111111, 0.06666666666666667, 1.3555555555555556, -0.3333333333333333, -1.4555555555555555, -0.06666666666666667, -2.811111111111111],
        [0.35555555555555557, 0.06666666666666667, 1.2444444444444445, -0.3333333333333333, -0.9777777777777777, -0.06666666666666667, -0.6222222222222222, 0.3333333333333333],
        [-0.06666666666666667, 1.3555555555555556, -0.3333333333333333, 2.911111111111111, 0.06666666666666667, -2.811111111111111, 0.3333333333333333, -1.4555555555555555],
        [-0.6222222222222222, -0.3333333333333333, -0.9777777777777777, 0.06666666666666667, 1.2444444444444445, 0.3333333333333333, 0.35555555555555557, -0.06666666666666667],
        [-0.3333333333333333, -1.4555555555555555, -0.06666666666666667, -2.811111111111111, 0.3333333333333333, 2.911111111111111, 0.06666666666666667, 1.3555555555555556],
        [-0.9777777777777777, -0.06666666666666667, -0.6222222222222222, 0.3333333333333333, 0.35555555555555557, 0.06666666666666667, 1.2444444444444445, -0.3333333333333333],
        [0.06666666666666667, -2.811111111111111, 0.3333333333333333, -1.4555555555555555, -0.06666666666666667, 1.3555555555555556, -0.3333333333333333, 2.911111111111111],
    ];

    fn assert_table(k: &Matrix8, table: &[[f64; 8]; 8], scale: f64) {
        for r in 0..8 {
            for c in 0..8 {
                let want = table[r][c] * scale;
                assert!(
                    (k[(r, c)] - want).abs() <= 1e-12 * scale.max(1.0),
                    "entry ({r},{c}): {} vs {want}",
                    k[(r, c)]
                );
            }
        }
    }

    #[test]
    fn unit_square_matches_exact_integration() {
        let g = StructuredGrid::unit(1, 1).unwrap();
        let k = element_stiffness(1.0, 0.3, &g).unwrap();
        assert_table(&k.k0, &UNIT_SQUARE_E1_NU03, 1.0);
    }

    #[test]
    fn rectangle_matches_exact_integration_and_scales_with_thickness() {
        let g = StructuredGrid::new(1, 1, 2.0, 0.5, 1.0).unwrap();
        let k = element_stiffness(2.0, 0.25, &g).unwrap();
        assert_table(&k.k0, &RECT_2X05_E2_NU025, 1.0);
        let thin = StructuredGrid::new(1, 1, 2.0, 0.5, 0.1).unwrap();
        let k = element_stiffness(2.0, 0.25, &thin).unwrap();
        assert_table(&k.k0, &RECT_2X05_E2_NU025, 0.1);
    }

    #[test]
    fn symmetric_with_three_rigid_modes() {
        let g = StructuredGrid::new(1, 1, 1.7, 0.6, 2.0).unwrap();
        let k = element_stiffness(210.0, 0.3, &g).unwrap().k0;
        assert_eq!(k, k.transpose());
        let kmax = k.amax();
        // node coordinates (CCW) for the rotation mode
        let xy = [(0.0, 0.0), (1.7, 0.0), (1.7, 0.6), (0.0, 0.6)];
        let mut tx = SVector::<f64, 8>::zeros();
        let mut ty = SVector::<f64, 8>::zeros();
        let mut rot = SVector::<f64, 8>::zeros();
        for (a, &(x, y)) in xy.iter().enumerate() {
            tx[2 * a] = 1.0;
            ty[2 * a + 1] = 1.0;
            rot[2 * a] = -y;
            rot[2 * a + 1] = x;
        }
        for t in [tx, ty, rot] {
            assert!((k * t).amax() <= 1e-12 * kmax);
        }
        let eig = k.symmetric_eigenvalues();
        let zeros = eig.iter().filter(|&&l| l.abs() <= 1e-10 * kmax).count();
        assert_eq!(zeros, 3);
        assert!(eig.iter().all(|&l| l >= -1e-10 * kmax));
    }

    #[test]
    fn rejects_bad_material() {
        let g = StructuredGrid::unit(1, 1).unwrap();
        assert!(element_stiffness(0.0, 0.3, &g).is_err());
        assert!(element_stiffness(1.0, 0.5, &g).is_err());
        assert!(element_stiffness(1.0, -0.1, &g).is_err());
    }

    #[test]
    fn rigid_translation_is_stress_free() {
        let g = StructuredGrid::unit(2, 1).unwrap();
        let u = Displacements((0..g.num_dofs()).map(|d| if d % 2 == 0 { 0.3 } else { -1.1 }).collect());
        for s in gauss_point_stresses(&g, 1, &u, 5.0, 0.3).unwrap() {
            assert!(s.sxx.abs() < 1e-14 && s.syy.abs() < 1e-14 && s.txy.abs() < 1e-14);
        }
    }

    #[test]
    fn uniaxial_stretch_follows_plane_stress_law() {
        let g = StructuredGrid::new(2, 2, 0.5, 0.8, 1.0).unwrap();
        let (e, nu, eps) = (3.0, 0.25, 1e-3);
        let mut u = vec![0.0; g.num_dofs()];
        for n in 0..g.num_nodes() {
            let (i, _) = g.node_coords(n);
            u[2 * n] = eps * i as f64 * g.elem_w();
        }
        let u = Displacements(u);
        for el in 0..g.num_elements() {
            for s in gauss_point_stresses(&g, el, &u, e, nu).unwrap() {
                let sxx = e * eps / (1.0 - nu * nu);
                assert!((s.sxx - sxx).abs() < 1e-14);
                assert!((s.syy - nu * sxx).abs() < 1e-14);
                assert!(s.txy.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn invalid_element_id() {
        let g = StructuredGrid::unit(2, 2).unwrap();
        let u = Displacements(vec![0.0; g.num_dofs()]);
        assert!(gauss_point_stresses(&g, 4, &u, 1.0, 0.3).is_err());
    }
}
