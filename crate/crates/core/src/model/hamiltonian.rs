use serde::{Deserialize, Serialize};

use super::blocks::{product_index, M_VALUES};
use super::field::FieldProtocol;
use super::spin1::build_spin1_operators;
use crate::linalg::{kron, identity, re, CMat};
use crate::noise::NoiseSpec;
use crate::{Error, Result};

/// Non-Hermitian decay rates (1/time) for qutrit 1 and qutrit 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decay {
    pub gamma_tilde: f64,
    pub gamma_tilde_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub gamma_x: f64,
    pub gamma_y: f64,
    #[serde(default)]
    pub gamma_z: f64,
    pub omega1: FieldProtocol,
    pub omega2: FieldProtocol,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub decay: Option<Decay>,
    /// Reference sweep rate defining `tau = sqrt(alpha) t`. Defaults to the
    /// largest ramp rate among the two protocols, or 1 without ramps.
    #[serde(default)]
    pub sweep_rate: Option<f64>,
}

impl HamiltonianSpec {
    pub fn new(gamma_x: f64, gamma_y: f64, gamma_z: f64, omega1: FieldProtocol, omega2: FieldProtocol) -> Self {
        HamiltonianSpec {
            gamma_x,
            gamma_y,
            gamma_z,
            omega1,
            omega2,
            noise: None,
            decay: None,
            sweep_rate: None,
        }
    }

    /// Single ramped field on qutrit 1: `omega1 = alpha t`, `omega2 = 0`.
    pub fn stm_single_field(alpha: f64, gamma_x: f64, gamma_y: f64, gamma_z: f64) -> Self {
        Self::new(gamma_x, gamma_y, gamma_z, FieldProtocol::LinearRamp { alpha }, FieldProtocol::zero())
    }

    /// `omega1 = omega2 = alpha t / 2`.
    pub fn both_fields_parallel(alpha: f64, gamma_x: f64, gamma_y: f64, gamma_z: f64) -> Self {
        Self::new(
            gamma_x,
            gamma_y,
            gamma_z,
            FieldProtocol::HalfRamp { alpha },
            FieldProtocol::HalfRamp { alpha },
        )
    }

    /// `omega1 = -omega2 = alpha t / 2`.
    pub fn both_fields_antiparallel(alpha: f64, gamma_x: f64, gamma_y: f64, gamma_z: f64) -> Self {
        Self::new(
            gamma_x,
            gamma_y,
            gamma_z,
            FieldProtocol::HalfRamp { alpha },
            FieldProtocol::HalfRamp { alpha }.negated(),
        )
    }

    pub fn with_decay(mut self, gamma_tilde: f64, gamma_tilde_prime: f64) -> Self {
        self.decay = Some(Decay { gamma_tilde, gamma_tilde_prime });
        self
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn with_sweep_rate(mut self, alpha: f64) -> Self {
        self.sweep_rate = Some(alpha);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma_x", self.gamma_x), ("gamma_y", self.gamma_y), ("gamma_z", self.gamma_z)] {
            if !v.is_finite() {
                return Err(Error::Precondition(format!("coupling {name} = {v} is not finite")));
            }
        }
        if let Some(d) = self.decay {
            for v in [d.gamma_tilde, d.gamma_tilde_prime] {
                if !(v >= 0.0) {
                    return Err(Error::NegativeParameter(v));
                }
            }
        }
        if let Some(n) = &self.noise {
            if !(n.gamma >= 0.0) {
                return Err(Error::NegativeParameter(n.gamma));
            }
            if !(n.dt_noise > 0.0) {
                return Err(Error::Precondition(format!("dt_noise = {} must be positive", n.dt_noise)));
            }
        }
        if let Some(a) = self.sweep_rate {
            if !(a > 0.0) {
                return Err(Error::NonPositiveAlpha(a));
            }
        }
        Ok(())
    }

    pub fn reference_alpha(&self) -> f64 {
        if let Some(a) = self.sweep_rate {
            return a;
        }
        match (self.omega1.ramp_rate(), self.omega2.ramp_rate()) {
            (Some(a), Some(b)) => a.max(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => 1.0,
        }
        .max(f64::MIN_POSITIVE)
    }

    pub fn gamma_plus(&self) -> f64 {
        self.gamma_x + self.gamma_y
    }

    pub fn gamma_minus(&self) -> f64 {
        self.gamma_x - self.gamma_y
    }

    pub fn fields(&self, t: f64) -> Result<(f64, f64)> {
        Ok((self.omega1.eval(t)?, self.omega2.eval(t)?))
    }

    /// Time-independent coupling part `sum_k gamma_k S1k S2k` (9x9).
    pub fn coupling_matrix(&self) -> CMat {
        let s = build_spin1_operators();
        kron(&s.sigma_x, &s.sigma_x) * re(self.gamma_x)
            + kron(&s.sigma_y, &s.sigma_y) * re(self.gamma_y)
            + kron(&s.sigma_z, &s.sigma_z) * re(self.gamma_z)
    }
}

/// `Omega_+-`, `gamma_+-` and, for `gamma_x = gamma_y`, the isotropic `gamma = 2 gamma_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParameters {
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub gamma: Option<f64>,
}

impl DerivedParameters {
    pub fn at(spec: &HamiltonianSpec, t: f64) -> Result<Self> {
        let (w1, w2) = spec.fields(t)?;
        let isotropic = (spec.gamma_x - spec.gamma_y).abs() <= 1e-12 * spec.gamma_x.abs().max(spec.gamma_y.abs());
        Ok(DerivedParameters {
            omega_plus: w1 + w2,
            omega_minus: w1 - w2,
            gamma_plus: spec.gamma_plus(),
            gamma_minus: spec.gamma_minus(),
            gamma: isotropic.then_some(2.0 * spec.gamma_x),
        })
    }
}

/// `H(t) = w1 S1z + w2 S2z + sum_k gamma_k S1k S2k` on the 9-dimensional product space.
pub fn build_full_hamiltonian(spec: &HamiltonianSpec, t: f64) -> Result<CMat> {
    let (w1, w2) = spec.fields(t)?;
    let mut h = spec.coupling_matrix();
    for (i1, m1) in M_VALUES.iter().enumerate() {
        for (i2, m2) in M_VALUES.iter().enumerate() {
            let k = product_index(i1, i2);
            h[(k, k)] += re(w1 * m1 + w2 * m2);
        }
    }
    Ok(h)
}

/// `K = cos(pi (S1z + S2z))`.
pub fn constant_of_motion_k() -> CMat {
    let mut k = identity(9);
    for (i1, m1) in M_VALUES.iter().enumerate() {
        for (i2, m2) in M_VALUES.iter().enumerate() {
            let idx = product_index(i1, i2);
            k[(idx, idx)] = re((std::f64::consts::PI * (m1 + m2)).cos().round());
        }
    }
    k
}
