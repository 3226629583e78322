//! Exact amplitudes of the two-level sweep `H(tau) = (tau/2) sz + sqrt(beta) sx`.
//!
//! With the state written as (up, down) and the system prepared in the down
//! state at `tau_i`, the propagator is `[[a*, -b*], [b, a]]`: `a` is the
//! amplitude to remain down and `|b|^2` the transition probability.

use std::f64::consts::{FRAC_PI_4, PI};

use serde::Serialize;

use super::gamma::log_gamma;
use super::pcf::pcf_d_polar;
use crate::linalg::{C64, I};
use crate::{Error, Result};

/// Tolerance on `|a|^2 + |b|^2 - 1` enforced on every evaluation.
pub const UNITARITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CayleyKlein {
    pub a: C64,
    pub b: C64,
    /// Propagated special-function error estimate on `a` and `b`.
    pub est_error: f64,
}

impl CayleyKlein {
    pub fn norm_defect(&self) -> f64 {
        (self.a.norm_sqr() + self.b.norm_sqr() - 1.0).abs()
    }

    pub fn transition_probability(&self) -> f64 {
        self.b.norm_sqr()
    }

    /// 2x2 propagator in the (up, down) basis, row-major.
    pub fn matrix(&self) -> [[C64; 2]; 2] {
        [[self.a.conj(), -self.b.conj()], [self.b, self.a]]
    }
}

/// `D_nu(e^{-i pi/4} tau)` and `D_nu(e^{3 i pi/4} tau)`, arguments built in polar form.
fn pair(nu: C64, tau: f64) -> Result<[(C64, f64); 2]> {
    let (r, th_plus, th_minus) = if tau >= 0.0 {
        (tau, -FRAC_PI_4, 3.0 * FRAC_PI_4)
    } else {
        (-tau, 3.0 * FRAC_PI_4, -FRAC_PI_4)
    };
    let p = pcf_d_polar(nu, r, th_plus)?;
    let m = pcf_d_polar(nu, r, th_minus)?;
    Ok([(p.value, p.est_error), (m.value, m.est_error)])
}

/// The `tau_i`-dependent factors, shared across a time series.
struct Initial {
    beta: f64,
    pref_a: C64,
    pref_b: C64,
    /// `D_{-1+i beta}(z_i)`, `D_{-1+i beta}(-z_i)`
    dm1: [(C64, f64); 2],
    /// `D_{i beta}(z_i)`, `D_{i beta}(-z_i)`
    d0: [(C64, f64); 2],
}

impl Initial {
    fn new(beta: f64) -> Result<Self> {
        if !(beta >= 0.0) {
            return Err(Error::NegativeParameter(beta));
        }
        let lg = log_gamma(C64::new(1.0, -beta))?;
        let pref_a = (lg - 0.5 * (2.0 * PI).ln()).exp();
        let pref_b = if beta > 0.0 {
            (lg - 0.5 * (2.0 * PI * beta).ln() + I * FRAC_PI_4).exp()
        } else {
            C64::new(0.0, 0.0)
        };
        Ok(Initial {
            beta,
            pref_a,
            pref_b,
            dm1: [(C64::new(0.0, 0.0), 0.0); 2],
            d0: [(C64::new(0.0, 0.0), 0.0); 2],
        })
    }

    fn at(mut self, tau_i: f64, d_minus_one: bool) -> Result<Self> {
        let nu = C64::new(0.0, self.beta);
        self.d0 = pair(nu, tau_i)?;
        if d_minus_one {
            self.dm1 = pair(nu - 1.0, tau_i)?;
        }
        Ok(self)
    }
}

fn evaluate(init: &Initial, tau: f64, tau_i: f64, nominal_b: bool) -> Result<CayleyKlein> {
    if init.beta == 0.0 {
        return Ok(CayleyKlein {
            a: (I * (tau * tau - tau_i * tau_i) / 4.0).exp(),
            b: C64::new(0.0, 0.0),
            est_error: 0.0,
        });
    }
    let nu = C64::new(0.0, init.beta);
    let [(dp, ep), (dm, em)] = pair(nu, tau)?;
    let [(ip, eip), (im, eim)] = init.dm1;
    let a = init.pref_a * (dp * im + dm * ip);
    let err_a = init.pref_a.norm() * (ep * im.norm() + dp.norm() * eim + em * ip.norm() + dm.norm() * eip);
    let [(jp, ejp), (jm, ejm)] = if nominal_b { init.dm1 } else { init.d0 };
    let b = init.pref_b * (-dp * jm + dm * jp);
    let err_b = init.pref_b.norm() * (ep * jm.norm() + dp.norm() * ejm + em * jp.norm() + dm.norm() * ejp);
    Ok(CayleyKlein {
        a,
        b,
        est_error: err_a.max(err_b),
    })
}

fn check(ck: CayleyKlein, beta: f64, tau: f64) -> Result<CayleyKlein> {
    if ck.norm_defect() > UNITARITY_TOL {
        return Err(Error::AccuracyLoss {
            nu: C64::new(0.0, beta),
            z: C64::from_polar(tau, -FRAC_PI_4),
            detail: format!("|a|^2 + |b|^2 deviates from 1 by {:e}", ck.norm_defect()),
        });
    }
    Ok(ck)
}

fn check_order(tau: f64, tau_i: f64) -> Result<()> {
    if tau < tau_i {
        return Err(Error::Precondition(format!("tau = {tau} precedes tau_i = {tau_i}")));
    }
    Ok(())
}

/// Exact amplitudes at `tau` for a sweep prepared in the down state at `tau_i`.
pub fn lz_cayley_klein(beta: f64, tau: f64, tau_i: f64) -> Result<CayleyKlein> {
    check_order(tau, tau_i)?;
    let init = Initial::new(beta)?.at(tau_i, beta > 0.0)?;
    check(evaluate(&init, tau, tau_i, false)?, beta, tau)
}

/// [`lz_cayley_klein`] on a grid of times, reusing the `tau_i` factors.
pub fn lz_cayley_klein_series(beta: f64, taus: &[f64], tau_i: f64) -> Result<Vec<CayleyKlein>> {
    let init = Initial::new(beta)?.at(tau_i, beta > 0.0)?;
    taus.iter()
        .map(|&tau| {
            check_order(tau, tau_i)?;
            check(evaluate(&init, tau, tau_i, false)?, beta, tau)
        })
        .collect()
}

/// Variant of the `b` amplitude in which the `tau_i` factors carry the order
/// `-1 + i beta` (same as in `a`). It does not conserve `|a|^2 + |b|^2` and is
/// kept only so the validation report can quantify the defect.
pub fn lz_cayley_klein_nominal_b(beta: f64, tau: f64, tau_i: f64) -> Result<CayleyKlein> {
    check_order(tau, tau_i)?;
    let init = Initial::new(beta)?.at(tau_i, beta > 0.0)?;
    evaluate(&init, tau, tau_i, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::ode::Dop853;

    /// Direct integration of the 2x2 problem in (up, down) order from the down state.
    fn numeric(beta: f64, tau: f64, tau_i: f64) -> (C64, C64) {
        let g = beta.sqrt();
        let mut y = [c(0.0, 0.0), c(1.0, 0.0)];
        let mut rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
            dy[0] = -I * (t / 2.0 * y[0] + g * y[1]);
            dy[1] = -I * (g * y[0] - t / 2.0 * y[1]);
        };
        Dop853::new(1e-13, 1e-15).integrate(&mut rhs, tau_i, tau, &mut y).unwrap();
        (y[0], y[1])
    }

    #[test]
    fn decoupled_limit_has_no_transition() {
        for tau in [-3.0, 0.0, 7.5] {
            let ck = lz_cayley_klein(0.0, tau, -10.0).unwrap();
            assert!((ck.a.norm() - 1.0).abs() < 1e-15);
            assert_eq!(ck.b.norm(), 0.0);
        }
    }

    #[test]
    fn matches_direct_integration() {
        for &(beta, tau, tau_i) in &[(2.0, 0.0, -20.0), (0.5, 3.0, -5.0), (0.11, 10.0, -10.0), (2.0, 6.0, -7.0)] {
            let ck = lz_cayley_klein(beta, tau, tau_i).unwrap();
            let (up, down) = numeric(beta, tau, tau_i);
            assert!((ck.a - down).norm() < 1e-8, "beta {beta} tau {tau}: {} vs {down}", ck.a);
            assert!((-ck.b.conj() - up).norm() < 1e-8, "beta {beta} tau {tau}: {} vs {up}", ck.b);
        }
    }

    #[test]
    fn unitarity_on_a_grid() {
        for beta in [0.01, 0.11, 0.5, 2.0, 5.0, 10.0] {
            for tau_i in [-30.0, -10.0, -2.0] {
                let taus: Vec<f64> = (0..41).map(|k| tau_i + k as f64 * (40.0 - tau_i) / 40.0).collect();
                for ck in lz_cayley_klein_series(beta, &taus, tau_i).unwrap() {
                    assert!(ck.norm_defect() < 1e-9, "beta {beta} tau_i {tau_i}: {}", ck.norm_defect());
                }
            }
        }
    }

    #[test]
    fn long_window_transition_probability() {
        // The finite-window deviation oscillates with an envelope ~ sqrt(beta)/tau.
        let p = 1.0 - (-PI).exp();
        let mut last = f64::INFINITY;
        for half in [20.0, 40.0, 80.0] {
            let ck = lz_cayley_klein(0.5, half, -half).unwrap();
            let dev = (ck.transition_probability() - p).abs();
            assert!(dev < 2.0 * 0.5f64.sqrt() / half, "half-window {half}: {dev}");
            assert!(dev < last);
            last = dev;
        }
    }

    #[test]
    fn nominal_b_breaks_unitarity() {
        let ck = lz_cayley_klein_nominal_b(0.5, 3.0, -5.0).unwrap();
        assert!(ck.norm_defect() > 0.1);
    }

    #[test]
    fn time_order_is_enforced() {
        assert!(matches!(lz_cayley_klein(0.5, -3.0, 1.0), Err(Error::Precondition(_))));
    }
}
