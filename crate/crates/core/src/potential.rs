//! Weights on O(d), their Monge-Ampère densities, curvature quantities,
//! measure settings and the sup-distance.
//!
//! A weight is stored as a relative potential ψ = φ - d·φ_ref against the
//! reference Fubini-Study weight φ_ref = log(1+|z|²), plus an explicit
//! additive constant (the gauge) kept separate so that constant-shift
//! bookkeeping stays exact.

use crate::error::{Error, Result};
use crate::geometry::{GridField, GridP1};

/// Measure rule φ ↦ μ(φ).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SettingKind {
    /// Fixed smooth measure, mass d.
    S0,
    /// Relative canonical measure e^{+(φ - d·φ_ref)} · base.
    SPlus,
    /// Relative anti-canonical measure e^{-(φ - d·φ_ref)} · base.
    SMinus,
}

impl SettingKind {
    /// Sign carried by the measure under φ → φ + c: μ(φ+c) = e^{σc} μ(φ).
    pub fn sigma(self) -> f64 {
        match self {
            SettingKind::S0 => 0.0,
            SettingKind::SPlus => 1.0,
            SettingKind::SMinus => -1.0,
        }
    }
}

/// A measure setting: the kind together with its base density against ω_FS.
#[derive(Debug, Clone)]
pub struct MeasureSetting {
    pub kind: SettingKind,
    base: GridField,
}

impl MeasureSetting {
    /// Fixed measure for the S0 setting; the density must be positive with
    /// total mass d (so stationary points of the flow can exist).
    pub fn fixed(grid: &GridP1, density: GridField, d: u32) -> Result<Self> {
        if density.values().iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidConfig("S0 density must be positive".into()));
        }
        let mass = grid.integrate(&density)?;
        if (mass - d as f64).abs() > 1e-8 * d as f64 {
            return Err(Error::InvalidConfig(format!(
                "S0 measure has mass {mass}, expected {d}"
            )));
        }
        Ok(Self { kind: SettingKind::S0, base: density })
    }

    /// Fixed measure rescaled to mass d.
    pub fn fixed_normalized(grid: &GridP1, density: GridField, d: u32) -> Result<Self> {
        if density.values().iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidConfig("S0 density must be positive".into()));
        }
        let mass = grid.integrate(&density)?;
        Self::fixed(grid, density.scale(d as f64 / mass), d)
    }

    /// μ := MA(φ) for a fixed weight φ (the measure does not follow the
    /// argument afterwards; this is still an S0 setting).
    pub fn s0_from_ma(grid: &GridP1, w: &Weight) -> Result<Self> {
        let ma = ma_density(grid, w)?;
        Self::fixed(grid, ma, w.degree())
    }

    /// Canonical-type setting with an explicit positive base factor.
    pub fn canonical(kind: SettingKind, base: GridField) -> Result<Self> {
        if kind == SettingKind::S0 {
            return Err(Error::InvalidConfig("use `fixed` for S0".into()));
        }
        if base.values().iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidConfig("base density must be positive".into()));
        }
        Ok(Self { kind, base })
    }

    /// S- base calibrated so the reference round weight solves MA(φ) = μ(φ).
    pub fn sminus_calibrated(grid: &GridP1, d: u32) -> Self {
        Self { kind: SettingKind::SMinus, base: grid.constant(d as f64) }
    }

    /// S+ with the same constant base; the round weight is then stationary.
    pub fn splus_default(grid: &GridP1, d: u32) -> Self {
        Self { kind: SettingKind::SPlus, base: grid.constant(d as f64) }
    }

    pub fn base(&self) -> &GridField {
        &self.base
    }

    /// log μ density as a function of the field part ψ alone.
    pub fn log_density_field(&self, psi: &GridField) -> Result<GridField> {
        let logb = self.base.map(f64::ln);
        Ok(match self.kind {
            SettingKind::S0 => logb,
            SettingKind::SPlus => logb.zip_map(psi, |b, p| b + p)?,
            SettingKind::SMinus => logb.zip_map(psi, |b, p| b - p)?,
        })
    }

    /// log μ(φ) density split as (field part from ψ, gauge part). The gauge
    /// part is σ·gauge, kept symbolic so shift laws hold exactly.
    pub fn log_density_split(&self, w: &Weight) -> Result<(GridField, f64)> {
        let field = self.log_density_field(w.psi())?;
        Ok((field, self.kind.sigma() * w.gauge()))
    }
}

/// A smooth weight on O(d) with strictly positive curvature.
#[derive(Debug, Clone)]
pub struct Weight {
    degree: u32,
    psi: GridField,
    gauge: f64,
}

impl Weight {
    /// Construct and verify Kähler positivity; weights failing positivity
    /// are rejected rather than projected.
    pub fn new(grid: &GridP1, degree: u32, psi: GridField, gauge: f64) -> Result<Self> {
        let w = Self { degree, psi, gauge };
        let ma = ma_density(grid, &w)?;
        let min = ma.values().iter().fold(f64::INFINITY, |m, &v| m.min(v));
        if !(min > 0.0) {
            return Err(Error::NotKahler { min_density: min });
        }
        Ok(w)
    }

    /// The reference round weight d · log(1+|z|²).
    pub fn reference(grid: &GridP1, degree: u32) -> Self {
        Self { degree, psi: grid.constant(0.0), gauge: 0.0 }
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn psi(&self) -> &GridField {
        &self.psi
    }

    pub fn gauge(&self) -> f64 {
        self.gauge
    }

    /// φ + c with the constant kept on the gauge channel.
    pub fn add_constant(&self, c: f64) -> Weight {
        Weight { degree: self.degree, psi: self.psi.clone(), gauge: self.gauge + c }
    }

    /// Replace the field part, keeping gauge. Positivity is re-checked.
    pub fn with_psi(&self, grid: &GridP1, psi: GridField) -> Result<Weight> {
        Weight::new(grid, self.degree, psi, self.gauge)
    }

    /// ψ + gauge folded into one field (loses the symbolic split).
    pub fn relative_potential(&self) -> GridField {
        self.psi.add_constant(self.gauge)
    }
}

/// Density of the Monge-Ampère measure against ω_FS: d + Δψ for n = 1.
pub fn ma_density(grid: &GridP1, w: &Weight) -> Result<GridField> {
    let lap = grid.laplacian_band(w.psi(), grid.n_u())?;
    let ma = lap.add_constant(w.degree() as f64);
    let min = ma.values().iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if !(min > 0.0) {
        return Err(Error::NotKahler { min_density: min });
    }
    Ok(ma)
}

/// Density of μ(φ) against ω_FS, gauge factor folded in.
pub fn mu_of(grid: &GridP1, w: &Weight, s: &MeasureSetting) -> Result<GridField> {
    let (logf, g) = s.log_density_split(w)?;
    let _ = grid;
    Ok(logf.map(|v| (v + g).exp()))
}

/// Scalar curvature of ω_φ, normalized so that the mean against MA(φ)/d
/// equals 2/d for every weight.
pub fn scalar_curvature(grid: &GridP1, w: &Weight) -> Result<GridField> {
    let ma = ma_density(grid, w)?;
    let log_ma = ma.map(f64::ln);
    let lap = grid.laplacian_band(&log_ma, grid.n_u())?;
    lap.zip_map(&ma, |l, m| (2.0 - l) / m)
}

/// Mean scalar curvature S̄, fixed by the section-count identity
/// N_k = d(k + S̄/2) on the projective line.
pub fn mean_scalar_curvature(d: u32) -> f64 {
    2.0 / d as f64
}

/// Laplacian with respect to ω_φ: Δ_φ f = (Δ_ref f) / ma(φ).
pub fn laplacian_phi(grid: &GridP1, w: &Weight, f: &GridField) -> Result<GridField> {
    let ma = ma_density(grid, w)?;
    let lap = grid.laplacian_band(f, grid.n_u())?;
    lap.zip_map(&ma, |l, m| l / m)
}

/// Sup-distance d(φ, ψ) = sup |φ - ψ|, gauge included.
pub fn sup_distance(a: &Weight, b: &Weight) -> Result<f64> {
    if a.degree() != b.degree() {
        return Err(Error::DegreeMismatch(a.degree(), b.degree()));
    }
    let dg = a.gauge() - b.gauge();
    let diff = a.psi().zip_map(b.psi(), |x, y| x - y + dg)?;
    Ok(diff.sup_norm())
}

/// Precomputed per-weight quantities shared by the flow right-hand side.
pub struct FlowRhsCache {
    pub ma: GridField,
    pub log_mu_field: GridField,
    pub log_mu_gauge: f64,
}

impl FlowRhsCache {
    pub fn build(grid: &GridP1, w: &Weight, s: &MeasureSetting) -> Result<Self> {
        let ma = ma_density(grid, w)?;
        let (log_mu_field, log_mu_gauge) = s.log_density_split(w)?;
        Ok(Self { ma, log_mu_field, log_mu_gauge })
    }

    /// log(MA(φ)/μ(φ)) with the gauge term folded in.
    pub fn log_ratio(&self) -> Result<GridField> {
        let g = self.log_mu_gauge;
        self.ma.zip_map(&self.log_mu_field, |m, l| m.ln() - l - g)
    }
}
