//! Numerical laboratory for the Bergman iteration and the Kähler-Ricci flow
//! on the projective line with the O(d) polarization.
//!
//! The crate discretizes weights on O(d) → ℙ¹, realizes the Hilbert and
//! Fubini-Study maps between weights and Hermitian forms on the section
//! spaces, solves the reference Monge-Ampère evolution equation, and checks
//! the Bergman-kernel expansion together with its first-order correction.

pub mod asymptotics;
pub mod bergman;
pub mod error;
pub mod geometry;
pub mod hexfloat;
pub mod krf;
pub mod ode;
pub mod potential;
pub mod weight_spec;

pub use error::{Error, Result};
pub use geometry::legendre::ln_binomial as legendre_ln_binomial;
pub use geometry::{GridField, GridP1, Layout, Mode};
pub use potential::{MeasureSetting, SettingKind, Weight};
