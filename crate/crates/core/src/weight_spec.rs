//! Reproducible weight specifications: a finite list of (mode, coefficient)
//! pairs defining ψ, shared by the CLI config format and the random test
//! generators.

use crate::error::{Error, Result};
use crate::geometry::{GridP1, Mode};
use crate::potential::Weight;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A weight described by Legendre (plus optional longitude Fourier) modes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightSpec {
    pub modes: Vec<Mode>,
    pub gauge: f64,
}

impl WeightSpec {
    pub fn invariant(modes: &[(usize, f64)]) -> Self {
        Self {
            modes: modes.iter().map(|&(l, c)| Mode { l, m: 0, c }).collect(),
            gauge: 0.0,
        }
    }

    pub fn build(&self, grid: &GridP1, degree: u32) -> Result<Weight> {
        let psi = grid.field_from_modes(&self.modes)?;
        Weight::new(grid, degree, psi, self.gauge)
    }

    /// Parse "2:0.15, 3:-0.1" (invariant) or "2,1:0.05" ((l,m) pairs).
    pub fn parse(s: &str) -> Result<Self> {
        let mut modes = Vec::new();
        for item in s.split(',').collect::<Vec<_>>().chunk_by(|a, _| !a.contains(':')) {
            // re-join pieces of an "l,m:c" entry split by the comma
            let joined = item.join(",");
            let t = joined.trim();
            if t.is_empty() {
                continue;
            }
            let (idx, coeff) = t
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("mode entry `{t}` missing ':'")))?;
            let c: f64 = coeff
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad coefficient in `{t}`")))?;
            let (l, m) = match idx.split_once(',') {
                Some((ls, ms)) => (
                    ls.trim().parse().map_err(|_| Error::Parse(format!("bad l in `{t}`")))?,
                    ms.trim().parse().map_err(|_| Error::Parse(format!("bad m in `{t}`")))?,
                ),
                None => (
                    idx.trim().parse().map_err(|_| Error::Parse(format!("bad l in `{t}`")))?,
                    0,
                ),
            };
            modes.push(Mode { l, m, c });
        }
        Ok(Self { modes, gauge: 0.0 })
    }

    pub fn format(&self) -> String {
        self.modes
            .iter()
            .map(|m| {
                if m.m == 0 {
                    format!("{}:{}", m.l, m.c)
                } else {
                    format!("{},{}:{}", m.l, m.m, m.c)
                }
            })
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Deterministic RNG for test weights.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random invariant spec with Kähler positivity guaranteed by construction:
/// coefficients are scaled so that sup |Δψ| ≤ margin · d.
pub fn random_invariant_spec(rng: &mut ChaCha8Rng, d: u32, lmax: usize, margin: f64) -> WeightSpec {
    let lmax = lmax.max(1);
    let mut raw: Vec<(usize, f64)> = (1..=lmax)
        .map(|l| (l, rng.gen_range(-1.0..1.0)))
        .collect();
    // sup |P̄_l| on [-1,1] is P̄_l(1) = sqrt((2l+1)/2); Δ scales by l(l+1)
    let budget: f64 = raw
        .iter()
        .map(|&(l, c)| {
            let lf = l as f64;
            c.abs() * lf * (lf + 1.0) * ((2.0 * lf + 1.0) / 2.0).sqrt()
        })
        .sum();
    let scale = margin * d as f64 / budget.max(1e-12);
    for (_, c) in raw.iter_mut() {
        *c *= scale;
    }
    WeightSpec::invariant(&raw)
}

/// Random positive weight on a grid; retries until positivity holds
/// (guaranteed by the margin, the loop is a safety net).
pub fn random_weight(grid: &GridP1, rng: &mut ChaCha8Rng, d: u32, lmax: usize, margin: f64) -> Weight {
    loop {
        let spec = random_invariant_spec(rng, d, lmax, margin);
        if let Ok(w) = spec.build(grid, d) {
            return w;
        }
    }
}
