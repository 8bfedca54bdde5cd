//! Discretization of the projective line as the round sphere.
//!
//! Coordinates: u = cosθ with |z|^2 = (1-u)/(1+u), plus an optional
//! equispaced longitude ring for non-invariant fields. The reference area
//! measure is the unit-volume Fubini-Study form, du dφ / 4π in these
//! coordinates. Quadrature is Gauss-Legendre in u (exact to degree
//! 2 n_u - 1) and trapezoid in longitude.

pub mod gauss;
pub mod legendre;

use crate::error::{Error, Result};
use legendre::{alf_scan, LegendreTables};
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Sample layout of a field: invariant (u only) or full tensor grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Invariant { n_u: usize },
    Tensor { n_u: usize, n_long: usize },
}

impl Layout {
    pub fn len(&self) -> usize {
        match *self {
            Layout::Invariant { n_u } => n_u,
            Layout::Tensor { n_u, n_long } => n_u * n_long,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_u(&self) -> usize {
        match *self {
            Layout::Invariant { n_u } | Layout::Tensor { n_u, .. } => n_u,
        }
    }
}

/// A real scalar field sampled on the grid, with an optional declared
/// band limit (largest Legendre degree present plus one).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    data: Vec<f64>,
    layout: Layout,
    pub band_limit: Option<usize>,
}

impl GridField {
    pub fn new(data: Vec<f64>, layout: Layout) -> Result<Self> {
        if data.len() != layout.len() {
            return Err(Error::DimensionMismatch);
        }
        Ok(Self { data, layout, band_limit: None })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField {
            data: self.data.iter().map(|&v| f(v)).collect(),
            layout: self.layout,
            band_limit: None,
        }
    }

    pub fn zip_map(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Result<GridField> {
        if self.layout != other.layout {
            return Err(Error::DimensionMismatch);
        }
        Ok(GridField {
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
            layout: self.layout,
            band_limit: None,
        })
    }

    pub fn scale(&self, c: f64) -> GridField {
        let mut out = self.map(|v| c * v);
        out.band_limit = self.band_limit;
        out
    }

    pub fn add(&self, other: &GridField) -> Result<GridField> {
        let mut out = self.zip_map(other, |a, b| a + b)?;
        out.band_limit = match (self.band_limit, other.band_limit) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        Ok(out)
    }

    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        let mut out = self.zip_map(other, |a, b| a - b)?;
        out.band_limit = match (self.band_limit, other.band_limit) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        Ok(out)
    }

    pub fn add_constant(&self, c: f64) -> GridField {
        let mut out = self.map(|v| v + c);
        out.band_limit = self.band_limit;
        out
    }
}

/// A single real mode c · P̄_l^{|m|}(u) · trig(mφ), with cos for m ≥ 0 and
/// sin for m < 0. The u-factor is orthonormal against du.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub l: usize,
    pub m: i32,
    pub c: f64,
}

/// Quadrature and differentiation backend on the round sphere.
pub struct GridP1 {
    n_u: usize,
    n_long: usize,
    u_nodes: Vec<f64>,
    u_weights: Vec<f64>,
    leg: LegendreTables,
    /// Relative spectral-tail threshold above which differentiation refuses.
    pub tail_tol: f64,
}

impl GridP1 {
    /// Invariant-only grid (longitude count 0).
    pub fn invariant(n_u: usize) -> Self {
        Self::build(n_u, 0)
    }

    /// Tensor grid with an equispaced longitude ring.
    pub fn tensor(n_u: usize, n_long: usize) -> Self {
        assert!(n_long >= 4, "longitude ring too small");
        Self::build(n_u, n_long)
    }

    /// Default resolution for Bergman computations at tensor power k on O(d).
    pub fn auto(k: u32, d: u32) -> Self {
        Self::invariant(256.max(8 * (k as usize) * (d as usize)))
    }

    pub fn auto_tensor(k: u32, d: u32) -> Self {
        let n_u = 48.max(4 * (k as usize) * (d as usize));
        Self::tensor(n_u, 2 * n_u)
    }

    fn build(n_u: usize, n_long: usize) -> Self {
        let (u_nodes, u_weights) = gauss::gauss_legendre(n_u);
        let leg = LegendreTables::build(&u_nodes, n_u);
        Self { n_u, n_long, u_nodes, u_weights, leg, tail_tol: 1e-9 }
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_long(&self) -> usize {
        self.n_long
    }

    pub fn is_invariant(&self) -> bool {
        self.n_long == 0
    }

    pub fn layout(&self) -> Layout {
        if self.n_long == 0 {
            Layout::Invariant { n_u: self.n_u }
        } else {
            Layout::Tensor { n_u: self.n_u, n_long: self.n_long }
        }
    }

    /// Quadrature nodes as (u, weight) pairs.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.u_nodes.iter().copied().zip(self.u_weights.iter().copied())
    }

    pub fn u_nodes(&self) -> &[f64] {
        &self.u_nodes
    }

    pub fn longitude(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI * j as f64 / self.n_long.max(1) as f64
    }

    fn check_layout(&self, f: &GridField) -> Result<()> {
        if f.layout() != self.layout() {
            return Err(Error::DimensionMismatch);
        }
        Ok(())
    }

    // ----- field constructors -----

    pub fn constant(&self, c: f64) -> GridField {
        let mut f = GridField::new(vec![c; self.layout().len()], self.layout()).unwrap();
        f.band_limit = Some(1);
        f
    }

    pub fn field_from_fn(&self, func: impl Fn(f64, f64) -> f64) -> GridField {
        let data = match self.layout() {
            Layout::Invariant { .. } => self.u_nodes.iter().map(|&u| func(u, 0.0)).collect(),
            Layout::Tensor { n_u, n_long } => {
                let mut d = Vec::with_capacity(n_u * n_long);
                for &u in &self.u_nodes {
                    for j in 0..n_long {
                        d.push(func(u, self.longitude(j)));
                    }
                }
                d
            }
        };
        GridField::new(data, self.layout()).unwrap()
    }

    /// Build a field from a finite list of real modes.
    pub fn field_from_modes(&self, modes: &[Mode]) -> Result<GridField> {
        let lmax = modes.iter().map(|m| m.l).max().unwrap_or(0) + 1;
        if lmax > self.n_u {
            return Err(Error::ResolutionTooLow { needed: lmax, actual: self.n_u });
        }
        let mut out = self.constant(0.0);
        if self.is_invariant() {
            if modes.iter().any(|m| m.m != 0) {
                return Err(Error::DimensionMismatch);
            }
            let mut coeffs = vec![0.0; lmax];
            for m in modes {
                coeffs[m.l] += m.c;
            }
            out = GridField::new(self.leg.synthesize(&coeffs, 0), self.layout())?;
        } else {
            for mode in modes {
                let mabs = mode.m.unsigned_abs() as usize;
                if mode.l < mabs {
                    return Err(Error::InvalidConfig(format!(
                        "mode (l={}, m={}) has l < |m|",
                        mode.l, mode.m
                    )));
                }
                if 2 * mabs >= self.n_long.max(1) {
                    return Err(Error::ResolutionTooLow { needed: 2 * mabs + 1, actual: self.n_long });
                }
                let mut ucol = vec![0.0; self.n_u];
                for (i, &u) in self.u_nodes.iter().enumerate() {
                    alf_scan(mabs, mode.l - mabs + 1, u, |l, v| {
                        if l == mode.l {
                            ucol[i] = v[0];
                        }
                    });
                }
                for i in 0..self.n_u {
                    for j in 0..self.n_long {
                        let phi = self.longitude(j);
                        let trig = if mode.m >= 0 {
                            (mabs as f64 * phi).cos()
                        } else {
                            (mabs as f64 * phi).sin()
                        };
                        out.values_mut()[i * self.n_long + j] += mode.c * ucol[i] * trig;
                    }
                }
            }
        }
        out.band_limit = Some(lmax);
        Ok(out)
    }

    /// Project a field onto the mode basis; inverse of `field_from_modes`
    /// for band-limited fields.
    pub fn field_to_modes(&self, f: &GridField, lmax: usize, mmax: usize) -> Result<Vec<Mode>> {
        self.check_layout(f)?;
        let mut out = Vec::new();
        if self.is_invariant() {
            let coeffs = self.leg.analyze(&self.u_weights, f.values(), lmax.min(self.n_u));
            for (l, c) in coeffs.into_iter().enumerate() {
                out.push(Mode { l, m: 0, c });
            }
            return Ok(out);
        }
        let modes = self.fft_rows(f);
        for m in 0..=mmax.min(self.n_long / 2) {
            let col = self.mode_column(&modes, m as i32);
            let mut table = vec![vec![0.0; self.n_u]; lmax.saturating_sub(m)];
            for (i, &u) in self.u_nodes.iter().enumerate() {
                alf_scan(m, lmax.saturating_sub(m), u, |l, v| table[l - m][i] = v[0]);
            }
            for l in m..lmax {
                let a: Complex64 = (0..self.n_u)
                    .map(|i| col[i] * self.u_weights[i] * table[l - m][i])
                    .sum();
                // f ⊃ a e^{imφ} + ā e^{-imφ} = 2Re(a) cos(mφ) - 2Im(a) sin(mφ)
                if m == 0 {
                    out.push(Mode { l, m: 0, c: a.re });
                } else {
                    out.push(Mode { l, m: m as i32, c: 2.0 * a.re });
                    out.push(Mode { l, m: -(m as i32), c: -2.0 * a.im });
                }
            }
        }
        Ok(out)
    }

    // ----- integration -----

    /// ∫ f against the reference Fubini-Study area form.
    pub fn integrate(&self, f: &GridField) -> Result<f64> {
        self.check_layout(f)?;
        if !f.is_finite() {
            return Err(Error::NonFiniteField);
        }
        Ok(match self.layout() {
            Layout::Invariant { .. } => {
                0.5 * f
                    .values()
                    .iter()
                    .zip(&self.u_weights)
                    .map(|(v, w)| v * w)
                    .sum::<f64>()
            }
            Layout::Tensor { n_u, n_long } => {
                let mut acc = 0.0;
                for i in 0..n_u {
                    let row: f64 = f.values()[i * n_long..(i + 1) * n_long].iter().sum();
                    acc += self.u_weights[i] * row;
                }
                acc / (2.0 * n_long as f64)
            }
        })
    }

    /// ∫ f · dens against the reference form.
    pub fn integrate_against(&self, f: &GridField, dens: &GridField) -> Result<f64> {
        self.integrate(&f.zip_map(dens, |a, b| a * b)?)
    }

    // ----- spectral machinery -----

    fn analyze_invariant(&self, f: &GridField) -> Vec<f64> {
        self.leg.analyze(&self.u_weights, f.values(), self.n_u)
    }

    fn tail_is_large(&self, coeffs: &[f64], scale: f64) -> bool {
        let n = coeffs.len();
        if n < 4 {
            return false;
        }
        let tail = coeffs[n - 2].abs().max(coeffs[n - 1].abs());
        tail > self.tail_tol * (scale + 1e-300)
    }

    /// Index past the last coefficient that stands above the relative
    /// roundoff floor. Differentiation amplifies degree-l noise by powers
    /// of l, so trailing noise modes are dropped before synthesis.
    fn noise_cutoff(coeffs: &[f64], declared: Option<usize>) -> usize {
        if let Some(b) = declared {
            return b.min(coeffs.len());
        }
        let max = coeffs.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
        let floor = 1e-14 * max;
        let mut cut = 1;
        for (l, &c) in coeffs.iter().enumerate() {
            if c.abs() > floor {
                cut = l + 1;
            }
        }
        cut
    }

    fn fft_rows(&self, f: &GridField) -> Vec<Complex64> {
        let n_long = self.n_long;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n_long);
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_u * n_long];
        for i in 0..self.n_u {
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

    fn ifft_rows(&self, modes: &[Complex64]) -> GridField {
        let n_long = self.n_long;
        let mut planner = FftPlanner::new();
        let ifft = planner.plan_fft_inverse(n_long);
        let mut data = vec![0.0; self.n_u * n_long];
        for i in 0..self.n_u {
            let mut row: Vec<Complex64> = modes[i * n_long..(i + 1) * n_long].to_vec();
            ifft.process(&mut row);
            for (j, v) in row.into_iter().enumerate() {
                data[i * n_long + j] = v.re;
            }
        }
        GridField::new(data, self.layout()).unwrap()
    }

    fn mode_column(&self, modes: &[Complex64], m: i32) -> Vec<Complex64> {
        let n_long = self.n_long as i32;
        let j = if m >= 0 { m } else { m + n_long } as usize;
        (0..self.n_u).map(|i| modes[i * self.n_long + j]).collect()
    }

    fn freq_of(&self, j: usize) -> i32 {
        let n = self.n_long as i32;
        let j = j as i32;
        if j <= n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Laplacian against the reference metric: (√-1/2π) ∂∂̄ f = (Δf) ω_FS.
    /// Invariant fields: Δf = ((1-u²) f')'.
    pub fn laplacian_ref(&self, f: &GridField) -> Result<GridField> {
        self.laplacian_impl(f, self.n_u, true)
    }

    /// Band-limited Laplacian without the resolution guard; modes at or
    /// above `limit` are discarded. Used by the time-steppers.
    pub fn laplacian_band(&self, f: &GridField, limit: usize) -> Result<GridField> {
        self.laplacian_impl(f, limit.min(self.n_u), false)
    }

    fn laplacian_impl(&self, f: &GridField, limit: usize, guard: bool) -> Result<GridField> {
        self.check_layout(f)?;
        if !f.is_finite() {
            return Err(Error::NonFiniteField);
        }
        match self.layout() {
            Layout::Invariant { .. } => {
                let mut coeffs = self.analyze_invariant(f);
                if guard && self.tail_is_large(&coeffs, f.sup_norm()) {
                    return Err(Error::ResolutionTooLow { needed: 2 * self.n_u, actual: self.n_u });
                }
                coeffs.truncate(Self::noise_cutoff(&coeffs, f.band_limit).min(limit));
                for (l, c) in coeffs.iter_mut().enumerate() {
                    *c *= -((l * (l + 1)) as f64);
                }
                let mut out = GridField::new(self.leg.synthesize(&coeffs, 0), self.layout())?;
                out.band_limit = Some(limit);
                Ok(out)
            }
            Layout::Tensor { n_u, n_long } => {
                let modes = self.fft_rows(f);
                let mut out_modes = vec![Complex64::new(0.0, 0.0); n_u * n_long];
                for j in 0..n_long {
                    let m = self.freq_of(j).unsigned_abs() as usize;
                    if m >= limit {
                        continue;
                    }
                    let col = self.mode_column(&modes, self.freq_of(j));
                    let rows = limit - m;
                    let mut table = vec![vec![0.0; n_u]; rows];
                    for (i, &u) in self.u_nodes.iter().enumerate() {
                        alf_scan(m, rows, u, |l, v| table[l - m][i] = v[0]);
                    }
                    let coeffs: Vec<Complex64> = (m..limit)
                        .map(|l| {
                            (0..n_u)
                                .map(|i| col[i] * self.u_weights[i] * table[l - m][i])
                                .sum()
                        })
                        .collect();
                    let mags: Vec<f64> = coeffs.iter().map(|a| a.norm()).collect();
                    let cut = Self::noise_cutoff(&mags, f.band_limit.map(|b| b.saturating_sub(m)));
                    let tail_a = mags[cut.saturating_sub(2)..cut].iter().fold(0.0f64, |a, &b| a.max(b));
                    if guard
                        && limit == self.n_u
                        && cut + 2 >= rows
                        && tail_a > self.tail_tol * (f.sup_norm() + 1e-300)
                    {
                        return Err(Error::ResolutionTooLow { needed: 2 * n_u, actual: n_u });
                    }
                    let mut acc = vec![Complex64::new(0.0, 0.0); n_u];
                    for (idx, &a) in coeffs.iter().enumerate().take(cut) {
                        let l = m + idx;
                        let lam = -((l * (l + 1)) as f64);
                        for i in 0..n_u {
                            acc[i] += a * lam * table[idx][i];
                        }
                    }
                    for i in 0..n_u {
                        out_modes[i * n_long + j] = acc[i];
                    }
                }
                Ok(self.ifft_rows(&out_modes))
            }
        }
    }

    /// Project a field onto modes below `limit`.
    pub fn project_band(&self, f: &GridField, limit: usize) -> Result<GridField> {
        self.check_layout(f)?;
        match self.layout() {
            Layout::Invariant { .. } => {
                let mut coeffs = self.analyze_invariant(f);
                coeffs.truncate(limit);
                let mut out = GridField::new(self.leg.synthesize(&coeffs, 0), self.layout())?;
                out.band_limit = Some(limit);
                Ok(out)
            }
            Layout::Tensor { n_u, n_long } => {
                let modes = self.fft_rows(f);
                let mut out_modes = vec![Complex64::new(0.0, 0.0); n_u * n_long];
                for j in 0..n_long {
                    let m = self.freq_of(j).unsigned_abs() as usize;
                    if m >= limit {
                        continue;
                    }
                    let col = self.mode_column(&modes, self.freq_of(j));
                    let rows = limit - m;
                    let mut table = vec![vec![0.0; n_u]; rows];
                    for (i, &u) in self.u_nodes.iter().enumerate() {
                        alf_scan(m, rows, u, |l, v| table[l - m][i] = v[0]);
                    }
                    let mut acc = vec![Complex64::new(0.0, 0.0); n_u];
                    for l in m..limit {
                        let a: Complex64 = (0..n_u)
                            .map(|i| col[i] * self.u_weights[i] * table[l - m][i])
                            .sum();
                        for i in 0..n_u {
                            acc[i] += a * table[l - m][i];
                        }
                    }
                    for i in 0..n_u {
                        out_modes[i * n_long + j] = acc[i];
                    }
                }
                let mut out = self.ifft_rows(&out_modes);
                out.band_limit = Some(limit);
                Ok(out)
            }
        }
    }

    /// Resample a field onto another grid through its mode expansion.
    pub fn resample(&self, f: &GridField, target: &GridP1) -> Result<GridField> {
        let lmax = self.n_u.min(target.n_u);
        let mmax = if self.is_invariant() { 0 } else { self.n_long / 2 - 1 };
        let modes = self.field_to_modes(f, lmax, mmax)?;
        let kept: Vec<Mode> = modes.into_iter().filter(|m| m.c != 0.0).collect();
        target.field_from_modes(&kept)
    }

    /// Map a field through the antipodal symmetry (u, φ) → (-u, φ+π).
    pub fn antipodal(&self, f: &GridField) -> Result<GridField> {
        self.check_layout(f)?;
        let mut out = f.clone();
        match self.layout() {
            Layout::Invariant { n_u } => {
                for i in 0..n_u {
                    out.values_mut()[i] = f.values()[n_u - 1 - i];
                }
            }
            Layout::Tensor { n_u, n_long } => {
                for i in 0..n_u {
                    for j in 0..n_long {
                        let j2 = (j + n_long / 2) % n_long;
                        out.values_mut()[i * n_long + j] = f.values()[(n_u - 1 - i) * n_long + j2];
                    }
                }
            }
        }
        Ok(out)
    }

    // ----- C^l norms -----

    /// C^l norm with respect to the reference round metric: the maximum of
    /// sup |∂_θ^j f| over j ≤ l (invariant path, l ≤ 4) or of the frame
    /// derivative magnitudes (tensor path, l ≤ 2).
    pub fn cl_norm(&self, f: &GridField, l: usize) -> Result<f64> {
        self.check_layout(f)?;
        if !f.is_finite() {
            return Err(Error::NonFiniteField);
        }
        let max_l = if self.is_invariant() { 4 } else { 2 };
        if l > max_l {
            return Err(Error::UnsupportedOrder(l, max_l));
        }
        let mut norm = f.sup_norm();
        if l == 0 {
            return Ok(norm);
        }
        match self.layout() {
            Layout::Invariant { n_u } => {
                let mut coeffs = self.analyze_invariant(f);
                coeffs.truncate(Self::noise_cutoff(&coeffs, f.band_limit));
                let d: Vec<Vec<f64>> =
                    (1..=l).map(|j| self.leg.synthesize(&coeffs, j)).collect();
                let deriv = |j: usize, i: usize| -> f64 { d[j - 1][i] };
                for i in 0..n_u {
                    let u = self.u_nodes[i];
                    let s2 = 1.0 - u * u;
                    let s = s2.sqrt();
                    let f1 = deriv(1, i);
                    let mut sups = [0.0f64; 4];
                    sups[0] = (s * f1).abs();
                    if l >= 2 {
                        let f2 = deriv(2, i);
                        sups[1] = (s2 * f2 - u * f1).abs();
                        if l >= 3 {
                            let f3 = deriv(3, i);
                            sups[2] = (s * (s2 * f3 - 3.0 * u * f2 - f1)).abs();
                            if l >= 4 {
                                let f4 = deriv(4, i);
                                sups[3] = (s2 * s2 * f4 - 6.0 * u * s2 * f3
                                    + (7.0 * u * u - 4.0) * f2
                                    + u * f1)
                                    .abs();
                            }
                        }
                    }
                    for j in 0..l {
                        norm = norm.max(sups[j]);
                    }
                }
                Ok(norm)
            }
            Layout::Tensor { n_u, n_long } => {
                let sd = self.tensor_derivatives(f)?;
                for i in 0..n_u {
                    let u = self.u_nodes[i];
                    let s2 = 1.0 - u * u;
                    let s = s2.sqrt();
                    for j in 0..n_long {
                        let p = i * n_long + j;
                        let grad = (s * sd.fu[p]).hypot(sd.fphi[p] / s);
                        if l >= 1 {
                            norm = norm.max(grad);
                        }
                        if l >= 2 {
                            let h_tt = s2 * sd.fuu[p] - u * sd.fu[p];
                            let h_tp = -sd.fuphi[p] - u * sd.fphi[p] / s2;
                            let h_pp = sd.fphiphi[p] / s2 - u * sd.fu[p];
                            let hess =
                                (h_tt * h_tt + 2.0 * h_tp * h_tp + h_pp * h_pp).sqrt();
                            norm = norm.max(hess);
                        }
                    }
                }
                Ok(norm)
            }
        }
    }

    fn tensor_derivatives(&self, f: &GridField) -> Result<TensorDerivatives> {
        let n_u = self.n_u;
        let n_long = self.n_long;
        let modes = self.fft_rows(f);
        let zero = vec![Complex64::new(0.0, 0.0); n_u * n_long];
        let mut m_fu = zero.clone();
        let mut m_fuu = zero.clone();
        let mut m_fphi = zero.clone();
        let mut m_fuphi = zero.clone();
        let mut m_fphiphi = zero;
        let limit = self.n_u;
        for j in 0..n_long {
            let m = self.freq_of(j);
            let mabs = m.unsigned_abs() as usize;
            if mabs >= limit {
                continue;
            }
            let col = self.mode_column(&modes, m);
            let rows = limit - mabs;
            let mut tv = vec![vec![[0.0f64; 3]; n_u]; rows];
            for (i, &u) in self.u_nodes.iter().enumerate() {
                alf_scan(mabs, rows, u, |l, v| tv[l - mabs][i] = v);
            }
            let im = Complex64::new(0.0, m as f64);
            let coeffs: Vec<Complex64> = (mabs..limit)
                .map(|l| {
                    (0..n_u)
                        .map(|i| col[i] * self.u_weights[i] * tv[l - mabs][i][0])
                        .sum()
                })
                .collect();
            let mags: Vec<f64> = coeffs.iter().map(|a| a.norm()).collect();
            let cut = Self::noise_cutoff(&mags, f.band_limit.map(|b| b.saturating_sub(mabs)));
            for (idx, &a) in coeffs.iter().enumerate().take(cut) {
                if a.norm() == 0.0 {
                    continue;
                }
                for i in 0..n_u {
                    let p = i * n_long + j;
                    let [v, dv, ddv] = tv[idx][i];
                    m_fu[p] += a * dv;
                    m_fuu[p] += a * ddv;
                    m_fphi[p] += a * im * v;
                    m_fuphi[p] += a * im * dv;
                    m_fphiphi[p] += a * im * im * v;
                }
            }
        }
        Ok(TensorDerivatives {
            fu: self.ifft_rows_raw(&m_fu),
            fuu: self.ifft_rows_raw(&m_fuu),
            fphi: self.ifft_rows_raw(&m_fphi),
            fuphi: self.ifft_rows_raw(&m_fuphi),
            fphiphi: self.ifft_rows_raw(&m_fphiphi),
        })
    }

    fn ifft_rows_raw(&self, modes: &[Complex64]) -> Vec<f64> {
        self.ifft_rows(modes).data
    }

    /// Self-consistency check: compare an integral on this grid against a
    /// doubled grid. Returns the absolute difference.
    pub fn quadrature_self_check(&self, f: &GridField) -> Result<f64> {
        let fine = if self.is_invariant() {
            GridP1::invariant(2 * self.n_u)
        } else {
            GridP1::tensor(2 * self.n_u, 2 * self.n_long)
        };
        let coarse_val = self.integrate(f)?;
        let f_fine = self.resample(f, &fine)?;
        let fine_val = fine.integrate(&f_fine)?;
        Ok((coarse_val - fine_val).abs())
    }
}

struct TensorDerivatives {
    fu: Vec<f64>,
    fuu: Vec<f64>,
    fphi: Vec<f64>,
    fuphi: Vec<f64>,
    fphiphi: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_volume_is_one() {
        let g = GridP1::invariant(32);
        assert!((g.integrate(&g.constant(1.0)).unwrap() - 1.0).abs() < 1e-14);
        let g2 = GridP1::tensor(16, 32);
        assert!((g2.integrate(&g2.constant(1.0)).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn odd_function_integrates_to_zero() {
        let g = GridP1::invariant(48);
        let f = g.field_from_fn(|u, _| u);
        assert!(g.integrate(&f).unwrap().abs() < 1e-15);
    }

    #[test]
    fn radial_closed_form() {
        // (1+|z|^2)^{-1} = (1+u)/2 integrates to 1/2
        let g = GridP1::invariant(64);
        let f = g.field_from_fn(|u, _| (1.0 + u) / 2.0);
        assert!((g.integrate(&f).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn laplacian_of_constant_and_u() {
        let g = GridP1::invariant(48);
        let lap_c = g.laplacian_ref(&g.constant(3.0)).unwrap();
        assert!(lap_c.sup_norm() < 1e-12);
        let f = g.field_from_modes(&[Mode { l: 1, m: 0, c: 1.0 }]).unwrap();
        let lap = g.laplacian_ref(&f).unwrap();
        // first nonzero eigenvalue is -2 under this normalization
        let diff = lap.add(&f.scale(2.0)).unwrap();
        assert!(diff.sup_norm() < 1e-13, "{}", diff.sup_norm());
        // same through raw samples, where trailing noise modes are clipped
        let raw = g.field_from_fn(|u, _| u);
        let lap2 = g.laplacian_ref(&raw).unwrap();
        for (i, &u) in g.u_nodes().iter().enumerate() {
            assert!((lap2.values()[i] + 2.0 * u).abs() < 1e-11);
        }
    }

    #[test]
    fn laplacian_integrates_to_zero() {
        let g = GridP1::invariant(64);
        let f = g.field_from_fn(|u, _| (1.3 * u).sin() + 0.2 * u * u * u);
        let lap = g.laplacian_ref(&f).unwrap();
        assert!(g.integrate(&lap).unwrap().abs() < 1e-12);
    }

    #[test]
    fn tensor_laplacian_eigenfunction() {
        let g = GridP1::tensor(24, 48);
        let f = g.field_from_modes(&[Mode { l: 3, m: 2, c: 0.7 }]).unwrap();
        let lap = g.laplacian_ref(&f).unwrap();
        let want = f.scale(-12.0);
        let diff = lap.sub(&want).unwrap();
        assert!(diff.sup_norm() < 1e-10, "{}", diff.sup_norm());
    }

    #[test]
    fn non_finite_field_rejected() {
        let g = GridP1::invariant(16);
        let mut f = g.constant(1.0);
        f.values_mut()[3] = f64::NAN;
        assert!(matches!(g.integrate(&f), Err(Error::NonFiniteField)));
    }

    #[test]
    fn mode_roundtrip_invariant() {
        let g = GridP1::invariant(32);
        let modes = [Mode { l: 1, m: 0, c: 0.4 }, Mode { l: 5, m: 0, c: -1.2 }];
        let f = g.field_from_modes(&modes).unwrap();
        let back = g.field_to_modes(&f, 8, 0).unwrap();
        for mode in back {
            let expect = modes.iter().find(|m| m.l == mode.l).map(|m| m.c).unwrap_or(0.0);
            assert!((mode.c - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn mode_roundtrip_tensor() {
        let g = GridP1::tensor(20, 40);
        let modes = [
            Mode { l: 2, m: 1, c: 0.3 },
            Mode { l: 4, m: -2, c: -0.5 },
            Mode { l: 3, m: 0, c: 1.0 },
        ];
        let f = g.field_from_modes(&modes).unwrap();
        let back = g.field_to_modes(&f, 6, 3).unwrap();
        for mode in back {
            let expect = modes
                .iter()
                .find(|m| m.l == mode.l && m.m == mode.m)
                .map(|m| m.c)
                .unwrap_or(0.0);
            assert!(
                (mode.c - expect).abs() < 1e-12,
                "l={} m={}: {} vs {expect}",
                mode.l,
                mode.m,
                mode.c
            );
        }
    }

    #[test]
    fn cl_norm_of_constant_and_monotonicity() {
        let g = GridP1::invariant(48);
        let c = g.constant(-2.5);
        for l in 0..=4 {
            assert!((g.cl_norm(&c, l).unwrap() - 2.5).abs() < 1e-14);
        }
        let f = g.field_from_fn(|u, _| (2.0 * u).sin());
        let mut prev = 0.0;
        for l in 0..=4 {
            let n = g.cl_norm(&f, l).unwrap();
            assert!(n >= prev);
            prev = n;
        }
        assert!(matches!(g.cl_norm(&f, 5), Err(Error::UnsupportedOrder(5, 4))));
    }

    #[test]
    fn resample_preserves_band_limited_fields() {
        let g = GridP1::invariant(32);
        let h = GridP1::invariant(57);
        let f = g.field_from_modes(&[Mode { l: 4, m: 0, c: 0.9 }]).unwrap();
        let rf = g.resample(&f, &h).unwrap();
        let direct = h.field_from_modes(&[Mode { l: 4, m: 0, c: 0.9 }]).unwrap();
        assert!(rf.sub(&direct).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn antipodal_square_is_identity() {
        let g = GridP1::tensor(10, 12);
        let f = g.field_from_fn(|u, p| u * p.cos() + u * u);
        let twice = g.antipodal(&g.antipodal(&f).unwrap()).unwrap();
        assert!(twice.sub(&f).unwrap().sup_norm() < 1e-15);
    }
}
