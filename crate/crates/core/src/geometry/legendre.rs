//! Legendre and associated-Legendre evaluation tables and transforms.
//!
//! All bases are orthonormal against du on [-1, 1]:
//! ∫ P̄_l^m P̄_{l'}^m du = δ_{ll'}.

/// ln(n!) accumulated termwise; adequate precision for the section counts used here.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// ln of the binomial coefficient C(n, k).
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Evaluation tables for the orthonormal Legendre basis (m = 0) and its
/// u-derivatives up to order four, sampled at a fixed node set.
pub struct LegendreTables {
    pub n_u: usize,
    /// Number of basis rows (degrees 0..lmax-1).
    pub lmax: usize,
    /// tables[j] is the order-j derivative table, row-major [l * n_u + i].
    tables: [Vec<f64>; 5],
}

impl LegendreTables {
    pub fn build(nodes: &[f64], lmax: usize) -> Self {
        let n_u = nodes.len();
        let mut tables: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; lmax * n_u]);
        for (i, &u) in nodes.iter().enumerate() {
            // p[j][l] = d^j/du^j P_l(u), unnormalized, rolled over l.
            let mut prev = [0.0f64; 5];
            let mut curr = [0.0f64; 5];
            prev[0] = 1.0;
            curr[0] = u;
            curr[1] = 1.0;
            for l in 0..lmax {
                let row = if l == 0 { &prev } else { &curr };
                let norm = ((2 * l + 1) as f64 / 2.0).sqrt();
                for j in 0..5 {
                    tables[j][l * n_u + i] = norm * row[j];
                }
                if l >= 1 && l + 1 < lmax {
                    // l+1 step: (l+1) P_{l+1}^{(j)} = (2l+1)(u P_l^{(j)} + j P_l^{(j-1)}) - l P_{l-1}^{(j)}
                    let mut next = [0.0f64; 5];
                    let a = (2 * l + 1) as f64;
                    let b = l as f64;
                    let c = (l + 1) as f64;
                    for j in 0..5 {
                        let lower = if j == 0 { 0.0 } else { j as f64 * curr[j - 1] };
                        next[j] = (a * (u * curr[j] + lower) - b * prev[j]) / c;
                    }
                    prev = curr;
                    curr = next;
                }
            }
        }
        Self { n_u, lmax, tables }
    }

    #[inline]
    pub fn row(&self, deriv: usize, l: usize) -> &[f64] {
        &self.tables[deriv][l * self.n_u..(l + 1) * self.n_u]
    }

    /// Coefficients of f against the orthonormal basis, using the supplied
    /// quadrature weights (exact when f is a polynomial resolved by the rule).
    pub fn analyze(&self, weights: &[f64], values: &[f64], out_len: usize) -> Vec<f64> {
        let mut coeffs = vec![0.0; out_len.min(self.lmax)];
        for (l, c) in coeffs.iter_mut().enumerate() {
            let row = self.row(0, l);
            *c = values
                .iter()
                .zip(weights)
                .zip(row)
                .map(|((f, w), p)| f * w * p)
                .sum();
        }
        coeffs
    }

    /// Pointwise samples of the order-`deriv` u-derivative of Σ a_l P̄_l.
    pub fn synthesize(&self, coeffs: &[f64], deriv: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_u];
        for (l, &a) in coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let row = self.row(deriv, l);
            for (o, p) in out.iter_mut().zip(row) {
                *o += a * p;
            }
        }
        out
    }
}

/// Orthonormal associated Legendre values P̄_l^m(u) together with first and
/// second u-derivatives, for l = m..m+count-1 at a single node.
/// Rows are produced through a callback to avoid materializing tables.
pub fn alf_scan(m: usize, count: usize, u: f64, mut emit: impl FnMut(usize, [f64; 3])) {
    if count == 0 {
        return;
    }
    let s2 = 1.0 - u * u;
    // ln c_m for the sectoral seed c_m (1-u^2)^{m/2}
    let ln_c = 0.5 * (ln_factorial(2 * m + 1) - std::f64::consts::LN_2)
        - m as f64 * std::f64::consts::LN_2
        - ln_factorial(m);
    let p_mm = (ln_c + 0.5 * m as f64 * s2.ln()).exp();
    let dp_mm = if m == 0 { 0.0 } else { -(m as f64) * u * p_mm / s2 };
    let ddp_mm = if m == 0 {
        0.0
    } else {
        -(m as f64) * p_mm / (s2 * s2) * (1.0 - (m as f64 - 1.0) * u * u)
    };
    let mut prev = [p_mm, dp_mm, ddp_mm];
    emit(m, prev);
    if count == 1 {
        return;
    }
    let r = ((2 * m + 3) as f64).sqrt();
    let mut curr = [
        r * u * prev[0],
        r * (prev[0] + u * prev[1]),
        r * (2.0 * prev[1] + u * prev[2]),
    ];
    emit(m + 1, curr);
    let c = |l: usize| -> f64 {
        let lf = l as f64;
        let mf = m as f64;
        ((lf * lf - mf * mf) / (4.0 * lf * lf - 1.0)).sqrt()
    };
    for l in (m + 2)..(m + count) {
        let cl = c(l);
        let cl1 = c(l - 1);
        let next = [
            (u * curr[0] - cl1 * prev[0]) / cl,
            (curr[0] + u * curr[1] - cl1 * prev[1]) / cl,
            (2.0 * curr[1] + u * curr[2] - cl1 * prev[2]) / cl,
        ];
        prev = curr;
        curr = next;
        emit(l, curr);
    }
}
