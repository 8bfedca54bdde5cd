//! Section bases, the Hilbert and Fubini-Study maps, Bergman functions and
//! the iteration operator.

pub mod balanced;
pub mod forms;
pub mod space;

pub use balanced::{balanced, BalancedRun};
pub use forms::{FormRepr, HermitianForm};
pub use space::{center_of_mass, com_op_norm_minus_id, com_trace, dk_distance};

use crate::error::{Error, Result};
use crate::geometry::{GridField, GridP1, Layout};
use crate::legendre_ln_binomial;
use crate::potential::{MeasureSetting, Weight};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Monomial section basis of H⁰(ℙ¹, kO(d)) with precomputed log-space
/// evaluation tables ln(|z^j|² e^{-kd·φ_ref}) at the grid nodes.
pub struct SectionBasis {
    pub k: u32,
    pub d: u32,
    n_u: usize,
    log_tables: Vec<f64>,
}

impl SectionBasis {
    pub fn new(grid: &GridP1, k: u32, d: u32) -> Result<Self> {
        let kd = (k * d) as usize;
        if grid.n_u() < kd + 2 {
            return Err(Error::ResolutionTooLow { needed: kd + 2, actual: grid.n_u() });
        }
        let n_u = grid.n_u();
        let mut log_tables = vec![0.0; (kd + 1) * n_u];
        let ln2 = std::f64::consts::LN_2;
        for (i, &u) in grid.u_nodes().iter().enumerate() {
            let lm = (1.0 - u).ln();
            let lp = (1.0 + u).ln();
            for j in 0..=kd {
                log_tables[j * n_u + i] = j as f64 * lm + (kd - j) as f64 * lp - kd as f64 * ln2;
            }
        }
        Ok(Self { k, d, n_u, log_tables })
    }

    /// Section count N = kd + 1.
    pub fn n(&self) -> usize {
        (self.k * self.d + 1) as usize
    }

    #[inline]
    pub fn log_row(&self, j: usize) -> &[f64] {
        &self.log_tables[j * self.n_u..(j + 1) * self.n_u]
    }

    /// Σ_j C(kd, j) |z^j|² e^{-kd·φ_ref} should be exactly one pointwise.
    pub fn partition_defect(&self) -> f64 {
        let kd = (self.k * self.d) as usize;
        let mut worst: f64 = 0.0;
        for i in 0..self.n_u {
            let s: f64 = (0..=kd)
                .map(|j| (legendre_ln_binomial(kd, j) + self.log_row(j)[i]).exp())
                .sum();
            worst = worst.max((s - 1.0).abs());
        }
        worst
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|&t| (t - m).exp()).sum::<f64>().ln()
}

/// Hilbert map: Gram matrix of the monomial basis against
/// ∫ · e^{-kφ} μ(φ) ω_FS. Invariant data yields a diagonal form.
pub fn hilb(grid: &GridP1, basis: &SectionBasis, w: &Weight, s: &MeasureSetting) -> Result<HermitianForm> {
    let g = hilb_psi(grid, basis, w, s)?;
    let sigma = s.kind.sigma();
    let factor = (sigma - basis.k as f64) * w.gauge();
    Ok(if factor == 0.0 { g } else { g.scale_log(factor) })
}

/// Gram matrix computed from the field part ψ alone (gauge excluded);
/// the gauge enters only through the exact factor e^{(σ-k)·gauge}.
pub fn hilb_psi(grid: &GridP1, basis: &SectionBasis, w: &Weight, s: &MeasureSetting) -> Result<HermitianForm> {
    if w.degree() != basis.d {
        return Err(Error::DegreeMismatch(w.degree(), basis.d));
    }
    let k = basis.k as f64;
    let (log_mu, _gauge) = s.log_density_split(w)?;
    // ln of e^{-kψ} μ_ψ
    let log_w = log_mu.zip_map(w.psi(), |lm, p| lm - k * p)?;
    match grid.layout() {
        Layout::Invariant { n_u } => {
            let weights: Vec<f64> = grid.nodes().map(|(_, w)| w).collect();
            let mut diag = vec![0.0; basis.n()];
            for (j, gj) in diag.iter_mut().enumerate() {
                let row = basis.log_row(j);
                let mut acc = 0.0;
                for i in 0..n_u {
                    acc += 0.5 * weights[i] * (row[i] + log_w.values()[i]).exp();
                }
                *gj = acc;
            }
            HermitianForm::diagonal(basis.k, basis.d, diag)
        }
        Layout::Tensor { n_u, n_long } => {
            let n = basis.n();
            if n_long < 2 * (n - 1) + 2 {
                return Err(Error::ResolutionTooLow { needed: 2 * n, actual: n_long });
            }
            let wfield = log_w.map(f64::exp);
            let modes = grid_fft(grid, &wfield);
            let weights: Vec<f64> = grid.nodes().map(|(_, w)| w).collect();
            let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
            for i in 0..n {
                for j in i..n {
                    // frequency (j - i), reading Σ_φ W e^{i(i-j)φ} / n_long
                    let t = (j - i) % n_long;
                    let mut acc = Complex64::new(0.0, 0.0);
                    for iu in 0..n_u {
                        let amp = (0.5 * (basis.log_row(i)[iu] + basis.log_row(j)[iu])).exp();
                        acc += modes[iu * n_long + t] * amp * (0.5 * weights[iu]);
                    }
                    m[(i, j)] = acc;
                    if i != j {
                        m[(j, i)] = acc.conj();
                    }
                }
            }
            HermitianForm::dense(basis.k, basis.d, m).map_err(|e| match e {
                Error::DimensionMismatch => Error::GramNotPositive,
                other => other,
            })
        }
    }
}

fn grid_fft(grid: &GridP1, f: &GridField) -> Vec<Complex64> {
    use rustfft::FftPlanner;
    let n_long = grid.n_long();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n_long);
    let n_u = grid.n_u();
    let mut out = vec![Complex64::new(0.0, 0.0); n_u * n_long];
    for i in 0..n_u {
        let mut row: Vec<Complex64> = f.values()[i * n_long..(i + 1) * n_long]
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fft.process(&mut row);
        for (j, v) in row.into_iter().enumerate() {
            out[i * n_long + j] = v / n_long as f64;
        }
    }
    out
}

/// Fubini-Study map: the weight (1/k) log((1/N) Σ |s_i|²) for any
/// orthonormal basis (s_i) of H.
pub fn fs(grid: &GridP1, basis: &SectionBasis, h: &HermitianForm) -> Result<Weight> {
    if h.k != basis.k || h.d != basis.d {
        return Err(Error::DimensionMismatch);
    }
    let k = basis.k as f64;
    let ln_n = (basis.n() as f64).ln();
    let data = match h.repr() {
        FormRepr::Diagonal(diag) => {
            let ln_g: Vec<f64> = diag.iter().map(|&v| v.ln()).collect();
            let mut vals = vec![0.0; grid.n_u()];
            let mut terms = vec![0.0; basis.n()];
            for (i, v) in vals.iter_mut().enumerate() {
                for (j, t) in terms.iter_mut().enumerate() {
                    *t = basis.log_row(j)[i] - ln_g[j];
                }
                *v = (log_sum_exp(&terms) - ln_n) / k;
            }
            match grid.layout() {
                Layout::Invariant { .. } => vals,
                Layout::Tensor { n_u, n_long } => {
                    let mut out = vec![0.0; n_u * n_long];
                    for i in 0..n_u {
                        for j in 0..n_long {
                            out[i * n_long + j] = vals[i];
                        }
                    }
                    out
                }
            }
        }
        FormRepr::Dense(m) => {
            let chol = forms::checked_cholesky(m)?;
            let l = chol.l();
            let (n_u, n_long) = match grid.layout() {
                Layout::Tensor { n_u, n_long } => (n_u, n_long),
                Layout::Invariant { n_u } => (n_u, 0),
            };
            if n_long == 0 {
                return Err(Error::DimensionMismatch);
            }
            let n = basis.n();
            let mut out = vec![0.0; n_u * n_long];
            let mut v = nalgebra::DVector::from_element(n, Complex64::new(0.0, 0.0));
            for iu in 0..n_u {
                for jl in 0..n_long {
                    let phi = grid.longitude(jl);
                    for j in 0..n {
                        let a = (0.5 * basis.log_row(j)[iu]).exp();
                        let th = j as f64 * phi;
                        v[j] = Complex64::new(a * th.cos(), a * th.sin());
                    }
                    let wv = l.solve_lower_triangular(&v).ok_or(Error::GramNotPositive)?;
                    let norm2: f64 = wv.iter().map(|c| c.norm_sqr()).sum();
                    out[iu * n_long + jl] = (norm2.ln() - ln_n) / k;
                }
            }
            out
        }
    };
    let psi = GridField::new(data, grid.layout())?;
    Weight::new(grid, basis.d, psi, 0.0)
}

/// Bergman function ρ = Σ |s_i|² e^{-kφ} for a Hilb(φ)-orthonormal basis.
pub fn bergman_rho(grid: &GridP1, basis: &SectionBasis, w: &Weight, s: &MeasureSetting) -> Result<GridField> {
    let h = hilb_psi(grid, basis, w, s)?;
    let k = basis.k as f64;
    let sigma_g = s.kind.sigma() * w.gauge();
    let field = match h.repr() {
        FormRepr::Diagonal(diag) => {
            let ln_g: Vec<f64> = diag.iter().map(|&v| v.ln()).collect();
            let mut vals = vec![0.0; grid.n_u()];
            for (i, v) in vals.iter_mut().enumerate() {
                let psi_i = w.psi().values()[i];
                *v = (0..basis.n())
                    .map(|j| (basis.log_row(j)[i] - ln_g[j] - k * psi_i - sigma_g).exp())
                    .sum();
            }
            GridField::new(vals, grid.layout())?
        }
        FormRepr::Dense(m) => {
            let chol = forms::checked_cholesky(m)?;
            let l = chol.l();
            let (n_u, n_long) = match grid.layout() {
                Layout::Tensor { n_u, n_long } => (n_u, n_long),
                Layout::Invariant { .. } => return Err(Error::DimensionMismatch),
            };
            let n = basis.n();
            let mut out = vec![0.0; n_u * n_long];
            let mut v = nalgebra::DVector::from_element(n, Complex64::new(0.0, 0.0));
            for iu in 0..n_u {
                for jl in 0..n_long {
                    let phi = grid.longitude(jl);
                    for j in 0..n {
                        let a = (0.5 * basis.log_row(j)[iu]).exp();
                        let th = j as f64 * phi;
                        v[j] = Complex64::new(a * th.cos(), a * th.sin());
                    }
                    let wv = l.solve_lower_triangular(&v).ok_or(Error::GramNotPositive)?;
                    let norm2: f64 = wv.iter().map(|c| c.norm_sqr()).sum();
                    let psi_x = w.psi().values()[iu * n_long + jl];
                    out[iu * n_long + jl] = norm2 * (-k * psi_x - sigma_g).exp();
                }
            }
            GridField::new(out, grid.layout())?
        }
    };
    Ok(field)
}

/// One Bergman increment: F(φ) = (1/k) log(ρ/N), split into the field part
/// (from ψ alone) and the exact gauge part -σ·gauge/k.
pub struct Increment {
    pub field: GridField,
    pub gauge: f64,
}

pub fn f_functional(grid: &GridP1, basis: &SectionBasis, w: &Weight, s: &MeasureSetting) -> Result<Increment> {
    let w0 = Weight::new(grid, w.degree(), w.psi().clone(), 0.0)?;
    let rho = bergman_rho(grid, basis, &w0, s)?;
    let k = basis.k as f64;
    let ln_n = (basis.n() as f64).ln();
    let field = rho.map(|r| (r.ln() - ln_n) / k);
    let gauge = -s.kind.sigma() * w.gauge() / k;
    Ok(Increment { field, gauge })
}

/// One application of the iteration operator T = FS ∘ Hilb. The gauge
/// channel is updated by the exact factor demanded by equivariance.
pub fn iterate_once(grid: &GridP1, basis: &SectionBasis, w: &Weight, s: &MeasureSetting) -> Result<Weight> {
    let h = hilb_psi(grid, basis, w, s)?;
    let next = fs(grid, basis, &h)?;
    let gauge_step = -s.kind.sigma() * w.gauge() / basis.k as f64;
    Weight::new(grid, w.degree(), next.psi().clone(), w.gauge() + gauge_step)
}

/// The Bergman iteration: m applications of T, returning all iterates
/// starting with φ₀ itself.
pub fn iterate(grid: &GridP1, basis: &SectionBasis, w0: &Weight, s: &MeasureSetting, m: usize) -> Result<Vec<Weight>> {
    let mut out = Vec::with_capacity(m + 1);
    out.push(w0.clone());
    for step in 0..m {
        let next = iterate_once(grid, basis, out.last().unwrap(), s)
            .map_err(|e| Error::AtStep { step, source: Box::new(e) })?;
        out.push(next);
    }
    Ok(out)
}
