//! Embedded Bogacki-Shampine 3(2) integrator with PI step control,
//! shared by the flow solver and the linear parabolic solver.

use crate::error::{Error, Result};

/// Step-control parameters.
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Force a fixed step (disables the embedded error control).
    pub fixed_dt: Option<f64>,
    pub safety: f64,
    /// Fraction of the explicit stability interval to use.
    pub stability_fraction: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            dt_init: 1e-6,
            dt_min: 1e-13,
            dt_max: 1e-2,
            fixed_dt: None,
            safety: 0.85,
            stability_fraction: 0.9,
        }
    }
}

/// Right-hand side evaluation: derivative plus an estimate of the spectral
/// radius of the linearization (0 means no stability cap).
pub struct RhsEval {
    pub dydt: Vec<f64>,
    pub spectral_radius: f64,
}

/// Cubic Hermite interpolation on [0, h] at fraction s ∈ [0, 1].
pub fn cubic_hermite(y0: f64, dy0: f64, y1: f64, dy1: f64, h: f64, s: f64) -> f64 {
    let (s2, s3) = (s * s, s * s * s);
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * dy0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * dy1
}

/// Integrate y' = f(t, y) from t0 to t1. `on_accept` receives every accepted
/// node (t, y, y'). The initial node is reported too.
///
/// A rejected right-hand side (an Err) is treated like a failed step: the
/// step is halved until `dt_min`, at which point the error is surfaced.
pub fn integrate<F>(
    mut y: Vec<f64>,
    t0: f64,
    t1: f64,
    ctrl: &StepControl,
    mut rhs: F,
    mut on_accept: impl FnMut(f64, &[f64], &[f64]),
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<RhsEval>,
{
    assert!(t1 >= t0);
    let n = y.len();
    let mut t = t0;
    let first = rhs(t0, &y)?;
    let mut k1 = first.dydt;
    on_accept(t0, &y, &k1);
    if t1 == t0 {
        return Ok(y);
    }

    // explicit 3-stage third-order method: real-axis stability ≈ 2.51
    let stab_interval = 2.51;
    let mut dt = ctrl.fixed_dt.unwrap_or(ctrl.dt_init).min(t1 - t0);
    if first.spectral_radius > 0.0 && ctrl.fixed_dt.is_none() {
        dt = dt.min(ctrl.stability_fraction * stab_interval / first.spectral_radius);
    }
    let mut err_prev: f64 = 1.0;

    let mut buf = vec![0.0; n];
    while t < t1 {
        dt = dt.min(t1 - t);
        let attempt = (|| -> Result<(Vec<f64>, Vec<f64>, f64, f64)> {
            for i in 0..n {
                buf[i] = y[i] + 0.5 * dt * k1[i];
            }
            let k2 = rhs(t + 0.5 * dt, &buf)?.dydt;
            for i in 0..n {
                buf[i] = y[i] + 0.75 * dt * k2[i];
            }
            let k3 = rhs(t + 0.75 * dt, &buf)?.dydt;
            let mut y_next = vec![0.0; n];
            for i in 0..n {
                y_next[i] = y[i] + dt * (2.0 / 9.0 * k1[i] + 1.0 / 3.0 * k2[i] + 4.0 / 9.0 * k3[i]);
            }
            let next_eval = rhs(t + dt, &y_next)?;
            let k4 = next_eval.dydt;
            // embedded second-order error estimate
            let mut err: f64 = 0.0;
            for i in 0..n {
                let e = dt
                    * (-5.0 / 72.0 * k1[i] + 1.0 / 12.0 * k2[i] + 1.0 / 9.0 * k3[i]
                        - 1.0 / 8.0 * k4[i]);
                let scale = ctrl.abs_tol + ctrl.rel_tol * y[i].abs().max(y_next[i].abs());
                err += (e / scale) * (e / scale);
            }
            let err_norm = (err / n as f64).sqrt();
            Ok((y_next, k4, err_norm, next_eval.spectral_radius))
        })();

        match attempt {
            Ok((y_next, k4, err_norm, rho)) => {
                if err_norm <= 1.0 || ctrl.fixed_dt.is_some() {
                    t += dt;
                    y = y_next;
                    k1 = k4;
                    on_accept(t, &y, &k1);
                    if ctrl.fixed_dt.is_none() {
                        let e = err_norm.max(1e-10);
                        let fac = ctrl.safety * e.powf(-0.7 / 3.0) * err_prev.powf(0.4 / 3.0);
                        dt *= fac.clamp(0.2, 5.0);
                        dt = dt.min(ctrl.dt_max);
                        if rho > 0.0 {
                            dt = dt.min(ctrl.stability_fraction * stab_interval / rho);
                        }
                        err_prev = e;
                    }
                } else {
                    let fac = ctrl.safety * err_norm.powf(-1.0 / 3.0);
                    dt *= fac.clamp(0.1, 0.9);
                    if dt < ctrl.dt_min {
                        return Err(Error::MinStepReached { t, dt });
                    }
                }
            }
            Err(Error::NotKahler { .. }) | Err(Error::PositivityLost { .. }) => {
                dt *= 0.5;
                if dt < ctrl.dt_min {
                    return Err(Error::MinStepReached { t, dt });
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(y)
}
