//! Hermitian forms on the section space H⁰(ℙ¹, kO(d)) in the monomial basis.

use crate::error::{Error, Result};
use crate::hexfloat::{format_hex, parse_hex};
use nalgebra::{Cholesky, DMatrix, Dyn};
use num_complex::Complex64;

/// Cholesky factorization that actually verifies positive-definiteness.
/// (For complex matrices the plain factorization happily takes square
/// roots of negative pivots, so the pivots are checked explicitly.)
pub(crate) fn checked_cholesky(m: &DMatrix<Complex64>) -> Result<Cholesky<Complex64, Dyn>> {
    let chol = m.clone().cholesky().ok_or(Error::GramNotPositive)?;
    let l = chol.l_dirty();
    for i in 0..m.nrows() {
        let p = l[(i, i)];
        if !(p.re > 0.0) || p.im.abs() > 1e-12 * p.re || !p.re.is_finite() {
            return Err(Error::GramNotPositive);
        }
    }
    Ok(chol)
}

/// Storage for a positive-definite Hermitian form. Torus-invariant data
/// produces diagonal Gram matrices; the diagonal representation keeps all
/// downstream work O(N).
#[derive(Debug, Clone)]
pub enum FormRepr {
    Diagonal(Vec<f64>),
    Dense(DMatrix<Complex64>),
}

#[derive(Debug, Clone)]
pub struct HermitianForm {
    pub k: u32,
    pub d: u32,
    repr: FormRepr,
}

impl HermitianForm {
    pub fn diagonal(k: u32, d: u32, diag: Vec<f64>) -> Result<Self> {
        if diag.len() != (k * d + 1) as usize {
            return Err(Error::DimensionMismatch);
        }
        if diag.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::GramNotPositive);
        }
        Ok(Self { k, d, repr: FormRepr::Diagonal(diag) })
    }

    /// Dense constructor; verifies Hermitian symmetry to 1e-14 (relative)
    /// and positive-definiteness via Cholesky.
    pub fn dense(k: u32, d: u32, m: DMatrix<Complex64>) -> Result<Self> {
        let n = (k * d + 1) as usize;
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch);
        }
        let scale = m.iter().fold(0.0f64, |a, v| a.max(v.norm()));
        for i in 0..n {
            for j in 0..n {
                if (m[(i, j)] - m[(j, i)].conj()).norm() > 1e-14 * scale.max(1e-300) {
                    return Err(Error::DimensionMismatch);
                }
            }
        }
        checked_cholesky(&m)?;
        Ok(Self { k, d, repr: FormRepr::Dense(m) })
    }

    pub fn n(&self) -> usize {
        (self.k * self.d + 1) as usize
    }

    pub fn repr(&self) -> &FormRepr {
        &self.repr
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.repr, FormRepr::Diagonal(_))
    }

    pub fn diag(&self) -> Option<&[f64]> {
        match &self.repr {
            FormRepr::Diagonal(d) => Some(d),
            FormRepr::Dense(_) => None,
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        match &self.repr {
            FormRepr::Diagonal(d) => {
                DMatrix::from_fn(d.len(), d.len(), |i, j| {
                    if i == j {
                        Complex64::new(d[i], 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
            }
            FormRepr::Dense(m) => m.clone(),
        }
    }

    /// Multiply the form by e^a.
    pub fn scale_log(&self, a: f64) -> Self {
        let f = a.exp();
        let repr = match &self.repr {
            FormRepr::Diagonal(d) => FormRepr::Diagonal(d.iter().map(|v| v * f).collect()),
            FormRepr::Dense(m) => FormRepr::Dense(m.map(|v| v * f)),
        };
        Self { k: self.k, d: self.d, repr }
    }

    /// Text serialization: row-major, full-precision hex floats.
    pub fn write_text(&self) -> String {
        let mut out = String::from("hermitian-form v1\n");
        match &self.repr {
            FormRepr::Diagonal(d) => {
                out.push_str(&format!("k {} d {} n {} diag\n", self.k, self.d, d.len()));
                let row: Vec<String> = d.iter().map(|&v| format_hex(v)).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
            FormRepr::Dense(m) => {
                out.push_str(&format!("k {} d {} n {} dense\n", self.k, self.d, m.nrows()));
                for i in 0..m.nrows() {
                    let row: Vec<String> = (0..m.ncols())
                        .map(|j| format!("{},{}", format_hex(m[(i, j)].re), format_hex(m[(i, j)].im)))
                        .collect();
                    out.push_str(&row.join(" "));
                    out.push('\n');
                }
            }
        }
        out
    }

    pub fn parse_text(s: &str) -> Result<Self> {
        let mut lines = s.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty form file".into()))?;
        if header.trim() != "hermitian-form v1" {
            return Err(Error::Parse(format!("bad header: {header}")));
        }
        let meta = lines.next().ok_or_else(|| Error::Parse("missing metadata".into()))?;
        let toks: Vec<&str> = meta.split_whitespace().collect();
        if toks.len() != 7 || toks[0] != "k" || toks[2] != "d" || toks[4] != "n" {
            return Err(Error::Parse(format!("bad metadata: {meta}")));
        }
        let k: u32 = toks[1].parse().map_err(|_| Error::Parse("bad k".into()))?;
        let d: u32 = toks[3].parse().map_err(|_| Error::Parse("bad d".into()))?;
        let n: usize = toks[5].parse().map_err(|_| Error::Parse("bad n".into()))?;
        match toks[6] {
            "diag" => {
                let row = lines.next().ok_or_else(|| Error::Parse("missing diagonal".into()))?;
                let vals: Result<Vec<f64>> = row.split_whitespace().map(parse_hex).collect();
                let vals = vals?;
                if vals.len() != n {
                    return Err(Error::Parse("diagonal length mismatch".into()));
                }
                Self::diagonal(k, d, vals)
            }
            "dense" => {
                let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
                for i in 0..n {
                    let row = lines.next().ok_or_else(|| Error::Parse("missing row".into()))?;
                    let entries: Vec<&str> = row.split_whitespace().collect();
                    if entries.len() != n {
                        return Err(Error::Parse(format!("row {i} length mismatch")));
                    }
                    for (j, e) in entries.iter().enumerate() {
                        let (re, im) = e
                            .split_once(',')
                            .ok_or_else(|| Error::Parse(format!("bad entry {e}")))?;
                        m[(i, j)] = Complex64::new(parse_hex(re)?, parse_hex(im)?);
                    }
                }
                Self::dense(k, d, m)
            }
            other => Err(Error::Parse(format!("unknown representation {other}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_roundtrip_bit_exact() {
        let h = HermitianForm::diagonal(4, 1, vec![0.5, 0.25, 1.0 / 3.0, 0.125, 7e-3]).unwrap();
        let text = h.write_text();
        let back = HermitianForm::parse_text(&text).unwrap();
        assert_eq!(text, back.write_text());
        assert_eq!(h.diag().unwrap(), back.diag().unwrap());
    }

    #[test]
    fn dense_roundtrip_and_validation() {
        let n = 3;
        let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0 + i as f64, 0.0);
        }
        m[(0, 1)] = Complex64::new(0.1, 0.2);
        m[(1, 0)] = Complex64::new(0.1, -0.2);
        let h = HermitianForm::dense(2, 1, m).unwrap();
        let back = HermitianForm::parse_text(&h.write_text()).unwrap();
        assert_eq!(h.write_text(), back.write_text());
        // non-positive rejected
        let bad = DMatrix::from_fn(3, 3, |i, j| {
            if i == j { Complex64::new(-1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
        });
        assert!(matches!(HermitianForm::dense(2, 1, bad), Err(Error::GramNotPositive)));
    }
}
