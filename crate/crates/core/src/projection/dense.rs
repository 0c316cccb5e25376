//! Multiplier and projection routines for a general dense set of active
//! constraint gradients, stored as the rows of `H` (S × N).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ProjectedDirection;
use crate::error::{check_len, Error, Result};

/// Relative pivot size below which a constraint row is declared dependent.
const RANK_TOL: f64 = 1e-12;

fn grad_vector(grad_f: &[f64], h: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_len("objective gradient", h.ncols(), grad_f.len())?;
    Ok(DVector::from_column_slice(grad_f))
}

/// Lower Cholesky factor of the Gram matrix `HHᵀ`, failing with the first row
/// that lies in the span of the rows before it.
fn gram_cholesky(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s = h.nrows();
    let gram = h * h.transpose();
    let mut l = DMatrix::<f64>::zeros(s, s);
    for k in 0..s {
        for j in 0..k {
            let mut v = gram[(k, j)];
            for m in 0..j {
                v -= l[(k, m)] * l[(j, m)];
            }
            l[(k, j)] = v / l[(j, j)];
        }
        let diag = gram[(k, k)];
        let pivot = diag - (0..k).map(|m| l[(k, m)].powi(2)).sum::<f64>();
        if !(diag > 0.0) || pivot <= RANK_TOL * diag {
            return Err(dependency_error(&l, &gram, k));
        }
        l[(k, k)] = pivot.sqrt();
    }
    Ok(l)
}

fn dependency_error(l: &DMatrix<f64>, gram: &DMatrix<f64>, k: usize) -> Error {
    if k == 0 || gram[(k, k)] == 0.0 {
        return Error::Degenerate {
            row: k,
            depends_on: Vec::new(),
        };
    }
    // coefficients of row k in terms of rows 0..k: (L Lᵀ) c = G[0..k, k]
    let lk = l.view((0, 0), (k, k)).into_owned();
    let rhs = gram.view((0, k), (k, 1)).into_owned();
    let y = lk.solve_lower_triangular(&rhs).unwrap_or_else(|| rhs.clone());
    let c = lk.transpose().solve_upper_triangular(&y).unwrap_or(y);
    let cmax = c.amax();
    Error::Degenerate {
        row: k,
        depends_on: (0..k).filter(|&j| c[j].abs() > 1e-8 * cmax).collect(),
    }
}

fn cholesky_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let y = l.solve_lower_triangular(b).expect("nonzero pivots");
    l.transpose().solve_upper_triangular(&y).expect("nonzero pivots")
}

/// Multipliers making `−∇f + Hᵀλ` orthogonal to every row of `H`:
/// `λ = (HHᵀ)⁻¹ H∇f`.
pub fn hestenes_multipliers(grad_f: &[f64], h: &DMatrix<f64>) -> Result<DVector<f64>> {
    let g = grad_vector(grad_f, h)?;
    if h.nrows() == 0 {
        return Ok(DVector::zeros(0));
    }
    let l = gram_cholesky(h)?;
    Ok(cholesky_solve(&l, &(h * g)))
}

/// `d = −∇f + Hᵀλ`.
pub fn projected_gradient(grad_f: &[f64], h: &DMatrix<f64>, lambda: &DVector<f64>) -> Result<ProjectedDirection> {
    let g = grad_vector(grad_f, h)?;
    check_len("multipliers", h.nrows(), lambda.len())?;
    let d = -g + h.transpose() * lambda;
    Ok(ProjectedDirection { d: d.as_slice().to_vec() })
}

/// Minimizer of `½‖−∇f + Hᵀλ‖²`, computed from a QR factorization of `Hᵀ`
/// rather than from the normal equations.
pub fn least_squares_multipliers(grad_f: &[f64], h: &DMatrix<f64>) -> Result<DVector<f64>> {
    let g = grad_vector(grad_f, h)?;
    let (s, n) = h.shape();
    if s == 0 {
        return Ok(DVector::zeros(0));
    }
    if s > n {
        // more constraints than variables: some row must be dependent; let the
        // Gram factorization name it
        gram_cholesky(h)?;
    }
    let qr = h.transpose().qr();
    let r = qr.r();
    for k in 0..s {
        let col = h.row(k).norm();
        if !(col > 0.0) || r[(k, k)].abs() <= RANK_TOL.sqrt() * col {
            let rk = r.view((0, 0), (k, k)).into_owned();
            let c = rk
                .solve_upper_triangular(&r.view((0, k), (k, 1)).into_owned())
                .unwrap_or_else(|| DMatrix::zeros(k, 1));
            let cmax = c.amax();
            return Err(Error::Degenerate {
                row: k,
                depends_on: (0..k).filter(|&j| c[j].abs() > 1e-8 * cmax).collect(),
            });
        }
    }
    let qtg = qr.q().transpose() * g;
    Ok(r.solve_upper_triangular(&qtg).expect("checked pivots"))
}

/// Largest normalized `|∇f·r|` over random tangent directions `r ⟂ d`.
///
/// Each sample is projected onto the null space of `H` and then
/// orthogonalized against `d`; near-zero results are redrawn.
pub fn tangent_uniqueness_probe(
    grad_f: &[f64],
    h: &DMatrix<f64>,
    d: &ProjectedDirection,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let g = grad_vector(grad_f, h)?;
    let n = h.ncols();
    check_len("projected direction", n, d.d.len())?;
    let l = if h.nrows() > 0 { Some(gram_cholesky(h)?) } else { None };
    let tangent_dim = n - h.nrows().min(n);
    let dv = DVector::from_column_slice(&d.d);
    let dd = dv.norm_squared();
    let free_dim = if dd > 0.0 { tangent_dim.saturating_sub(1) } else { tangent_dim };
    let gnorm = g.norm();
    if free_dim == 0 || gnorm == 0.0 {
        return Ok(0.0);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < trials {
        attempts += 1;
        if attempts > 100 * trials.max(1) {
            break;
        }
        let w = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let mut r = w.clone();
        if let Some(l) = &l {
            r -= h.transpose() * cholesky_solve(l, &(h * &w));
        }
        if dd > 0.0 {
            r -= &dv * (r.dot(&dv) / dd);
        }
        let rn = r.norm();
        if rn < 1e-14 * w.norm().max(1.0) {
            continue;
        }
        accepted += 1;
        worst = worst.max(g.dot(&r).abs() / (gnorm * rn));
    }
    Ok(worst)
}

fn check_scaling(grad_f: &[f64], x: &[f64]) -> Result<()> {
    check_len("design point", grad_f.len(), x.len())?;
    if let Some(i) = grad_f.iter().position(|&g| g == 0.0 || !g.is_finite()) {
        return Err(Error::Scaling {
            element: i,
            reason: format!("gradient component is {}", grad_f[i]),
        });
    }
    if let Some(i) = x.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::param(format!("design variable {i} must be positive, got {}", x[i])));
    }
    Ok(())
}

fn solve_small(m: DMatrix<f64>, rhs: DVector<f64>, what: &str) -> Result<DVector<f64>> {
    m.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::param(format!("{what} system is singular")))
}

/// Generalized optimality-criteria multipliers from the weighted system
/// `(EᵀAE)λ = EᵀA·1`, with `E_ik = H_ki / ∇f_i` and `A = diag(∇f_i x_i)`,
/// assembled term by term.
pub fn venkayya_multipliers(grad_f: &[f64], h: &DMatrix<f64>, x: &[f64]) -> Result<DVector<f64>> {
    grad_vector(grad_f, h)?;
    check_scaling(grad_f, x)?;
    gram_cholesky(h)?;
    let (s, n) = h.shape();
    let e = DMatrix::from_fn(n, s, |i, k| h[(k, i)] / grad_f[i]);
    let a = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| grad_f[i] * x[i]));
    let lhs = e.transpose() * &a * &e;
    let rhs = e.transpose() * &a * DVector::from_element(n, 1.0);
    solve_small(lhs, rhs, "Venkayya")
}

/// The same multipliers from the compact form `(H·diag(x/∇f)·Hᵀ)λ = Hx`.
pub fn venkayya_multipliers_compact(grad_f: &[f64], h: &DMatrix<f64>, x: &[f64]) -> Result<DVector<f64>> {
    grad_vector(grad_f, h)?;
    check_scaling(grad_f, x)?;
    gram_cholesky(h)?;
    let mut scaled = h.clone();
    for (i, mut col) in scaled.column_iter_mut().enumerate() {
        col *= x[i] / grad_f[i];
    }
    let xv = DVector::from_column_slice(x);
    solve_small(&scaled * h.transpose(), h * xv, "compact Venkayya")
}

/// Multipliers of the design-scaled orthogonality condition
/// `H·diag(x)·(−∇f + Hᵀλ) = 0`.
pub fn weighted_orthogonality_multipliers(grad_f: &[f64], h: &DMatrix<f64>, x: &[f64]) -> Result<DVector<f64>> {
    let g = grad_vector(grad_f, h)?;
    check_len("design point", h.ncols(), x.len())?;
    gram_cholesky(h)?;
    let mut hx = h.clone();
    for (i, mut col) in hx.column_iter_mut().enumerate() {
        col *= x[i];
    }
    solve_small(&hx * h.transpose(), &hx * g, "weighted orthogonality")
}

/// `‖H·diag(x)·(−∇f + Hᵀλ)‖∞`.
pub fn weighted_orthogonality_residual(
    grad_f: &[f64],
    h: &DMatrix<f64>,
    x: &[f64],
    lambda: &DVector<f64>,
) -> Result<f64> {
    let g = grad_vector(grad_f, h)?;
    check_len("design point", h.ncols(), x.len())?;
    check_len("multipliers", h.nrows(), lambda.len())?;
    let mut scaled = -g + h.transpose() * lambda;
    for (s, xi) in scaled.iter_mut().zip(x) {
        *s *= xi;
    }
    Ok((h * scaled).amax())
}
