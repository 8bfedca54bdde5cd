//! Geometry of the space of Hermitian forms: the spectral distance d_k and
//! the center of mass of the moment map.

use super::forms::{FormRepr, HermitianForm};
use super::{fs, SectionBasis};
use crate::error::{Error, Result};
use crate::geometry::{GridP1, Layout};
use crate::potential::ma_density;
use nalgebra::DMatrix;
use num_complex::Complex64;

fn lambdas(h0: &HermitianForm, h1: &HermitianForm) -> Result<Vec<f64>> {
    if h0.k != h1.k || h0.d != h1.d {
        return Err(Error::DimensionMismatch);
    }
    let nus: Vec<f64> = match (h0.repr(), h1.repr()) {
        (FormRepr::Diagonal(a), FormRepr::Diagonal(b)) => {
            a.iter().zip(b).map(|(&x, &y)| y / x).collect()
        }
        _ => {
            let m0 = h0.to_dense();
            let m1 = h1.to_dense();
            let chol = super::forms::checked_cholesky(&m0)?;
            let l = chol.l();
            // M = L⁻¹ H₁ L⁻ᴴ, Hermitian with the generalized eigenvalues of (H₁, H₀)
            let a = l.solve_lower_triangular(&m1).ok_or(Error::GramNotPositive)?;
            let b = l.solve_lower_triangular(&a.adjoint()).ok_or(Error::GramNotPositive)?;
            let m = (b.adjoint() + b) * Complex64::new(0.5, 0.0);
            let eig = m.symmetric_eigen();
            eig.eigenvalues.iter().copied().collect()
        }
    };
    Ok(nus
        .into_iter()
        .map(|nu| -0.5 * nu.max(1e-300).ln())
        .collect())
}

/// Distance on the space of Hermitian forms: sqrt(Σ λ_j²) where
/// (e^{λ_j} s_j) is an H₁-orthonormal basis for an H₀-orthonormal,
/// H₁-orthogonal basis (s_j). Equivalently λ_j = -½ log ν_j with ν_j the
/// generalized eigenvalues of (H₁, H₀).
pub fn dk_distance(h0: &HermitianForm, h1: &HermitianForm) -> Result<f64> {
    let l = lambdas(h0, h1)?;
    Ok(l.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Center of mass μ̄(H) = k ∫ μ(H) MA(FS(H)) for the pointwise moment map
/// (μ(H))_{αβ} = s_α s̄_β / Σ|s_i|² in an H-orthonormal basis.
pub fn center_of_mass(grid: &GridP1, basis: &SectionBasis, h: &HermitianForm) -> Result<DMatrix<Complex64>> {
    let phi = fs(grid, basis, h)?;
    let ma = ma_density(grid, &phi)?;
    let k = basis.k as f64;
    let n = basis.n();
    match h.repr() {
        FormRepr::Diagonal(diag) => {
            let ln_g: Vec<f64> = diag.iter().map(|&v| v.ln()).collect();
            let weights: Vec<f64> = grid.nodes().map(|(_, w)| w).collect();
            let n_u = grid.n_u();
            let mut out = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
            let ma_u: Vec<f64> = match grid.layout() {
                Layout::Invariant { .. } => ma.values().to_vec(),
                Layout::Tensor { n_long, .. } => {
                    // invariant integrand: longitude average of MA
                    (0..n_u)
                        .map(|i| {
                            ma.values()[i * n_long..(i + 1) * n_long].iter().sum::<f64>()
                                / n_long as f64
                        })
                        .collect()
                }
            };
            for i in 0..n_u {
                let terms: Vec<f64> = (0..n)
                    .map(|j| (basis.log_row(j)[i] - ln_g[j]).exp())
                    .collect();
                let rho: f64 = terms.iter().sum();
                let common = 0.5 * weights[i] * ma_u[i] / rho;
                for j in 0..n {
                    out[(j, j)] += Complex64::new(common * terms[j], 0.0);
                }
            }
            Ok(out * Complex64::new(k, 0.0))
        }
        FormRepr::Dense(m) => {
            let (n_u, n_long) = match grid.layout() {
                Layout::Tensor { n_u, n_long } => (n_u, n_long),
                Layout::Invariant { .. } => return Err(Error::DimensionMismatch),
            };
            let chol = super::forms::checked_cholesky(m)?;
            let l = chol.l();
            let weights: Vec<f64> = grid.nodes().map(|(_, w)| w).collect();
            let mut out = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
            let mut v = nalgebra::DVector::from_element(n, Complex64::new(0.0, 0.0));
            for iu in 0..n_u {
                for jl in 0..n_long {
                    let phi_ang = grid.longitude(jl);
                    for j in 0..n {
                        let a = (0.5 * basis.log_row(j)[iu]).exp();
                        let th = j as f64 * phi_ang;
                        v[j] = Complex64::new(a * th.cos(), a * th.sin());
                    }
                    let wv = l.solve_lower_triangular(&v).ok_or(Error::GramNotPositive)?;
                    let norm2: f64 = wv.iter().map(|c| c.norm_sqr()).sum();
                    let scale = 0.5 * weights[iu] / (n_long as f64)
                        * ma.values()[iu * n_long + jl]
                        / norm2;
                    for a in 0..n {
                        for b in 0..n {
                            out[(a, b)] += wv[a] * wv[b].conj() * scale;
                        }
                    }
                }
            }
            Ok(out * Complex64::new(k, 0.0))
        }
    }
}

pub fn com_trace(m: &DMatrix<Complex64>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

/// Spectral norm of μ̄ - Id.
pub fn com_op_norm_minus_id(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut dev = m.clone();
    for i in 0..n {
        dev[(i, i)] -= Complex64::new(1.0, 0.0);
    }
    let herm = (dev.adjoint() + dev.clone()) * Complex64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
}
