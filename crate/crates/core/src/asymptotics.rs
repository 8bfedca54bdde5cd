//! Bergman-function expansion checks and the first-order time correction:
//! the two-term coefficient b₁, the expansion residual sweep, the linear
//! parabolic solve for η₁ along a flow, and the per-step consistency
//! residual of the corrected potential φ_t + η₁(t)/k.

use crate::bergman::{bergman_rho, f_functional, SectionBasis};
use crate::error::{Error, Result};
use crate::geometry::{GridField, GridP1};
use crate::krf::{second_time_derivative, FlowCtrl, FlowTrajectory};
use crate::ode::{cubic_hermite, integrate, RhsEval};
use crate::potential::{
    laplacian_phi, ma_density, mean_scalar_curvature, mu_of, scalar_curvature, MeasureSetting,
    Weight,
};

/// Second expansion coefficient b₁ = S(ω_φ)/2 - Δ_φ log(μ(φ)/MA(φ)).
///
/// Δ_φ here is the negative-spectrum Laplacian used everywhere in this
/// crate, so the measure term enters as +Δ_φ log(MA/μ). The sign is pinned
/// by the Richardson oracle on ρ itself and by the order-k⁻³ residual of
/// the corrected potential.
pub fn b1_coefficient(grid: &GridP1, w: &Weight, s: &MeasureSetting) -> Result<GridField> {
    let curv = scalar_curvature(grid, w)?;
    let ma = ma_density(grid, w)?;
    let (log_mu, _) = s.log_density_split(w)?;
    let log_ratio = ma.zip_map(&log_mu, |m, l| m.ln() - l)?;
    let lap = laplacian_phi(grid, w, &log_ratio)?;
    curv.zip_map(&lap, |c, l| 0.5 * c + l)
}

/// Normalized coefficient b̄₁ = b₁ - S̄/2; integrates to zero against MA.
pub fn b1_normalized(grid: &GridP1, w: &Weight, s: &MeasureSetting) -> Result<GridField> {
    let b1 = b1_coefficient(grid, w, s)?;
    Ok(b1.add_constant(-0.5 * mean_scalar_curvature(w.degree())))
}

/// Sup residuals of the two-term expansion ρ μ/MA ≈ k + b₁ over a k-sweep.
#[derive(Debug, Clone)]
pub struct ExpansionReport {
    pub ks: Vec<u32>,
    pub residuals: Vec<f64>,
    /// Fitted log-log slope; present when at least three k values were given.
    pub slope: Option<f64>,
}

/// Least-squares slope of log(err) against log(k).
pub fn loglog_slope(ks: &[f64], errs: &[f64]) -> Option<f64> {
    if ks.len() < 2 || errs.iter().any(|&e| e <= 0.0) {
        return None;
    }
    let n = ks.len() as f64;
    let xs: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn expansion_residual(
    grid: &GridP1,
    w: &Weight,
    s: &MeasureSetting,
    k_list: &[u32],
) -> Result<ExpansionReport> {
    if k_list.len() < 3 {
        return Err(Error::InvalidConfig("expansion sweep needs at least three k values".into()));
    }
    if k_list.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::InvalidConfig("k list must be ascending".into()));
    }
    let b1 = b1_coefficient(grid, w, s)?;
    let ma = ma_density(grid, w)?;
    let mu = mu_of(grid, w, s)?;
    let mut residuals = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let basis = SectionBasis::new(grid, k, w.degree())?;
        let rho = bergman_rho(grid, &basis, w, s)?;
        let lhs = rho.zip_map(&mu, |r, m| r * m)?.zip_map(&ma, |rm, a| rm / a)?;
        let expect = b1.add_constant(k as f64);
        let resid = grid.cl_norm(&lhs.sub(&expect)?, 0)?;
        residuals.push(resid);
    }
    let ksf: Vec<f64> = k_list.iter().map(|&k| k as f64).collect();
    let slope = loglog_slope(&ksf, &residuals);
    Ok(ExpansionReport { ks: k_list.to_vec(), residuals, slope })
}

/// Time-sampled solution of a linear parabolic equation along a flow,
/// with cubic-Hermite dense output.
pub struct CorrectionField {
    times: Vec<f64>,
    snapshots: Vec<GridField>,
    derivatives: Vec<GridField>,
}

impl CorrectionField {
    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn at(&self, t: f64) -> Result<GridField> {
        let horizon = self.horizon();
        if t < 0.0 || t > horizon + 1e-12 {
            return Err(Error::OutOfHorizon { t, horizon });
        }
        if let Some(i) = self.times.iter().position(|&x| x == t) {
            return Ok(self.snapshots[i].clone());
        }
        let idx = match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        let i = idx.min(self.times.len().saturating_sub(2));
        let h = self.times[i + 1] - self.times[i];
        let s = ((t - self.times[i]) / h).clamp(0.0, 1.0);
        let vals: Vec<f64> = (0..self.snapshots[i].values().len())
            .map(|j| {
                cubic_hermite(
                    self.snapshots[i].values()[j],
                    self.derivatives[i].values()[j],
                    self.snapshots[i + 1].values()[j],
                    self.derivatives[i + 1].values()[j],
                    h,
                    s,
                )
            })
            .collect();
        GridField::new(vals, self.snapshots[i].layout())
    }
}

/// Solve η̇ = Δ_t η - σ η + source(t) along the flow, η(0) = 0.
pub fn solve_linear_heat(
    grid: &GridP1,
    traj: &FlowTrajectory,
    source: &dyn Fn(f64) -> Result<GridField>,
    ctrl: &FlowCtrl,
) -> Result<CorrectionField> {
    let band = if ctrl.band_limit > 0 { ctrl.band_limit.min(grid.n_u()) } else { traj.band_limit() };
    let sigma = traj.setting().kind.sigma();
    let layout = grid.layout();
    let d = traj.degree() as f64;
    let mut times = Vec::new();
    let mut snapshots = Vec::new();
    let mut derivatives = Vec::new();
    let zero = grid.constant(0.0);
    integrate(
        zero.values().to_vec(),
        0.0,
        traj.horizon(),
        &ctrl.step,
        |t, y| {
            let eta = GridField::new(y.to_vec(), layout)?;
            let psi_t = traj.dense_output(grid, t)?;
            let ma = ma_density(grid, &psi_t)?;
            let min_ma = ma.values().iter().fold(f64::INFINITY, |m, &v| m.min(v));
            let lap = grid.laplacian_band(&eta, band)?;
            let src = source(t)?;
            let full = lap
                .zip_map(&ma, |l, m| l / m)?
                .zip_map(&eta, |l, e| l - sigma * e)?
                .add(&src)?;
            let projected = grid.project_band(&full, band)?;
            let rho = (band * (band + 1)) as f64 / min_ma.max(1e-6 * d) + 1.0;
            Ok(RhsEval { dydt: projected.values().to_vec(), spectral_radius: rho })
        },
        |t, y, dy| {
            times.push(t);
            snapshots.push(GridField::new(y.to_vec(), layout).expect("layout fixed"));
            derivatives.push(GridField::new(dy.to_vec(), layout).expect("layout fixed"));
        },
    )?;
    Ok(CorrectionField { times, snapshots, derivatives })
}

/// First-order correction η₁: heat equation with the source
/// T₀(t) = b̄₁(φ_t) - φ̈_t / 2 derived from the order-k⁻² consistency of the
/// corrected potential. Validated empirically by the residual slope test.
pub fn solve_eta1(grid: &GridP1, traj: &FlowTrajectory, ctrl: &FlowCtrl) -> Result<CorrectionField> {
    let source = |t: f64| -> Result<GridField> {
        let w = traj.dense_output(grid, t)?;
        let b1n = b1_normalized(grid, &w, traj.setting())?;
        let ddot = second_time_derivative(grid, traj, t)?;
        b1n.zip_map(&ddot, |b, p| b - 0.5 * p)
    };
    solve_linear_heat(grid, traj, &source, ctrl)
}

/// Exact constant channel absorbing the section-count normalization at
/// volume V = d: the closed-form solution of the per-step recursion
/// a ← (1 - σ/k) a + β_k with β_k = -ln(d)/k.
pub fn volume_gauge_channel(sigma: f64, d: u32, k: u32, t: f64) -> f64 {
    let kf = k as f64;
    let beta = -(d as f64).ln() / kf;
    if sigma == 0.0 {
        beta * kf * t
    } else {
        let q: f64 = 1.0 - sigma / kf;
        beta * ((kf * t * q.ln()).exp() - 1.0) / (q - 1.0)
    }
}

/// Sup-norm of the one-step consistency defect of the corrected potential
/// φ̃_t = φ_t + A_k(t) + η(t)/k at level k:
/// sup |(φ̃_{t+1/k} - φ̃_t) - F^{(k)}(φ̃_t)|.
/// Passing `None` for η gives the uncorrected (order-two) ladder rung.
pub fn claim_residual(
    grid: &GridP1,
    traj: &FlowTrajectory,
    eta: Option<&CorrectionField>,
    k: u32,
    t: f64,
) -> Result<f64> {
    let step = 1.0 / k as f64;
    if t < 0.0 || t + step > traj.horizon() + 1e-12 {
        return Err(Error::OutOfHorizon { t: t + step, horizon: traj.horizon() });
    }
    let d = traj.degree();
    let s = traj.setting();
    let sigma = s.kind.sigma();
    let basis = SectionBasis::new(grid, k, d)?;
    let kf = k as f64;

    let eta_at = |tt: f64| -> Result<GridField> {
        match eta {
            Some(e) => e.at(tt),
            None => Ok(grid.constant(0.0)),
        }
    };
    let tilde = |tt: f64| -> Result<(GridField, f64)> {
        let w = traj.dense_output(grid, tt)?;
        let psi = w.psi().add(&eta_at(tt)?.scale(1.0 / kf))?;
        let gauge = w.gauge() + volume_gauge_channel(sigma, d, k, tt);
        Ok((psi, gauge))
    };

    let (psi0, g0) = tilde(t)?;
    let (psi1, g1) = tilde(t + step)?;
    let w0 = Weight::new(grid, d, psi0.clone(), g0)?;
    let f = f_functional(grid, &basis, &w0, s)?;
    let dg = g1 - g0;
    let defect = psi1
        .zip_map(&psi0, |a, b| a - b)?
        .zip_map(&f.field, |lhs, ff| lhs + dg - ff - f.gauge)?;
    Ok(defect.sup_norm())
}
