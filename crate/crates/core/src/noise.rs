//! White longitudinal field noise: sampled paths and Monte Carlo ensembles.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{c, CVec, C64, ZERO};
use crate::model::{HamiltonianSpec, Picture};
use crate::propagator::{spin1_representation, Evolver, PiecewiseConstant, WindowSpec};
use crate::{Error, Result};

/// Which longitudinal field the white noise rides on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseTarget {
    #[default]
    Omega1,
    Omega2,
    Both,
}

/// Delta-correlated field noise, `<eta(t) eta(t')> = 2 Gamma delta(t - t')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(rename = "Gamma", alias = "gamma")]
    pub gamma: f64,
    pub seed: u64,
    pub dt_noise: f64,
    #[serde(default)]
    pub target: NoiseTarget,
}

impl NoiseSpec {
    pub fn new(gamma: f64, seed: u64, dt_noise: f64) -> Self {
        NoiseSpec { gamma, seed, dt_noise, target: NoiseTarget::Omega1 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) {
            return Err(Error::NegativeParameter(self.gamma));
        }
        if !(self.dt_noise > 0.0) || !self.dt_noise.is_finite() {
            return Err(Error::Precondition(format!("dt_noise = {} must be positive", self.dt_noise)));
        }
        Ok(())
    }
}

/// Piecewise-constant noise in physical units: `values[k]` holds on
/// `[t0 + k dt, t0 + (k + 1) dt)`; the last interval is cut at `t1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoisePath {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl NoisePath {
    /// The same path on the `tau = sqrt(alpha) t` axis with values in units of `sqrt(alpha)`.
    pub fn in_tau_units(&self, sqrt_alpha: f64) -> PiecewiseConstant {
        PiecewiseConstant {
            tau0: self.t0 * sqrt_alpha,
            dtau: self.dt * sqrt_alpha,
            values: self.values.iter().map(|v| v / sqrt_alpha).collect(),
        }
    }

    /// `int_{t0}^{t} eta dt'`.
    pub fn integral_to(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (k, v) in self.values.iter().enumerate() {
            let a = self.t0 + k as f64 * self.dt;
            let b = (a + self.dt).min(self.t1).min(t);
            if b <= a {
                break;
            }
            acc += v * (b - a);
        }
        acc
    }
}

fn step_count(t0: f64, t1: f64, dt: f64) -> usize {
    (((t1 - t0) / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Independent Gaussian step values with variance `2 Gamma / dt_noise`, drawn from
/// the ChaCha stream `(seed, realization)` so every realization is reproducible alone.
pub fn sample_noise_path(noise: &NoiseSpec, t0: f64, t1: f64, realization: u64) -> Result<NoisePath> {
    noise.validate()?;
    if !(t1 > t0) {
        return Err(Error::Precondition(format!("noise interval [{t0}, {t1}] is empty")));
    }
    let n = step_count(t0, t1, noise.dt_noise);
    let values = if noise.gamma == 0.0 {
        vec![0.0; n]
    } else {
        let sigma = (2.0 * noise.gamma / noise.dt_noise).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        rng.set_stream(realization);
        (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
    };
    Ok(NoisePath { t0, t1, dt: noise.dt_noise, values })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub picture: Picture,
    pub n_realizations: usize,
    pub mean_populations: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub seed: u64,
    #[serde(rename = "Gamma")]
    pub gamma: f64,
}

/// `[[u00, u01], [u10, u11]]`, row-major.
type Su2 = [C64; 4];

fn su2_step(hx: f64, hz: f64, dt: f64) -> Su2 {
    let h = (hx * hx + hz * hz).sqrt();
    if h == 0.0 {
        return SU2_ID;
    }
    let (s, co) = (h * dt).sin_cos();
    let k = s / h;
    [c(co, -k * hz), c(0.0, -k * hx), c(0.0, -k * hx), c(co, k * hz)]
}

fn su2_mul(a: &Su2, b: &Su2) -> Su2 {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

const SU2_ID: Su2 = [C64 { re: 1.0, im: 0.0 }, ZERO, ZERO, C64 { re: 1.0, im: 0.0 }];

/// Pictures whose frozen exponential factorizes into 2x2 rotations.
#[derive(Clone, Copy)]
enum FastKernel {
    Qubit1,
    Qubit2,
    Minus4,
    Core3,
}

fn fast_kernel(spec: &HamiltonianSpec, picture: Picture) -> Option<FastKernel> {
    match picture {
        Picture::Qubit1 => Some(FastKernel::Qubit1),
        Picture::Qubit2 => Some(FastKernel::Qubit2),
        Picture::Minus4 => Some(FastKernel::Minus4),
        Picture::Core3 if spec.gamma_z == 0.0 => Some(FastKernel::Core3),
        _ => None,
    }
}

/// Deterministic part of the fields at the noise-interval midpoints.
struct Grid {
    widths: Vec<f64>,
    w1: Vec<f64>,
    w2: Vec<f64>,
}

fn midpoint_grid(spec: &HamiltonianSpec, t0: f64, t1: f64, dt: f64) -> Result<Grid> {
    let n = step_count(t0, t1, dt);
    let mut g = Grid { widths: Vec::with_capacity(n), w1: Vec::with_capacity(n), w2: Vec::with_capacity(n) };
    for k in 0..n {
        let a = t0 + k as f64 * dt;
        let b = (a + dt).min(t1);
        let (w1, w2) = spec.fields(0.5 * (a + b))?;
        g.widths.push(b - a);
        g.w1.push(w1);
        g.w2.push(w2);
    }
    Ok(g)
}

fn shifted(w1: f64, w2: f64, eta: f64, target: NoiseTarget) -> (f64, f64) {
    match target {
        NoiseTarget::Omega1 => (w1 + eta, w2),
        NoiseTarget::Omega2 => (w1, w2 + eta),
        NoiseTarget::Both => (w1 + eta, w2 + eta),
    }
}

fn apply_su2(u: &Su2, v: &[C64]) -> [C64; 2] {
    [u[0] * v[0] + u[1] * v[1], u[2] * v[0] + u[3] * v[1]]
}

fn run_fast(
    kernel: FastKernel,
    spec: &HamiltonianSpec,
    grid: &Grid,
    path: &NoisePath,
    target: NoiseTarget,
    psi0: &CVec,
) -> Vec<f64> {
    let (gp, gm) = (spec.gamma_plus(), spec.gamma_minus());
    let mut u1 = SU2_ID;
    let mut u2 = SU2_ID;
    for k in 0..grid.widths.len() {
        let (w1, w2) = shifted(grid.w1[k], grid.w2[k], path.values[k], target);
        let dt = grid.widths[k];
        match kernel {
            FastKernel::Qubit1 => u1 = su2_mul(&su2_step(gm, 0.5 * (w1 + w2), dt), &u1),
            FastKernel::Qubit2 => u2 = su2_mul(&su2_step(gp, 0.5 * (w1 - w2), dt), &u2),
            FastKernel::Minus4 => {
                u1 = su2_mul(&su2_step(gm, 0.5 * (w1 + w2), dt), &u1);
                u2 = su2_mul(&su2_step(gp, 0.5 * (w1 - w2), dt), &u2);
            }
            FastKernel::Core3 => u2 = su2_mul(&su2_step(gp * FRAC_1_SQRT_2, 0.5 * (w1 - w2), dt), &u2),
        }
    }
    let psi: Vec<C64> = match kernel {
        FastKernel::Qubit1 => apply_su2(&u1, psi0.as_slice()).to_vec(),
        FastKernel::Qubit2 => apply_su2(&u2, psi0.as_slice()).to_vec(),
        FastKernel::Minus4 => {
            let mut out = vec![ZERO; 4];
            for i1 in 0..2 {
                for i2 in 0..2 {
                    for j1 in 0..2 {
                        for j2 in 0..2 {
                            out[2 * i1 + i2] += u1[2 * i1 + j1] * u2[2 * i2 + j2] * psi0[2 * j1 + j2];
                        }
                    }
                }
            }
            out
        }
        FastKernel::Core3 => (spin1_representation(u2[0], u2[1]) * psi0).iter().copied().collect(),
    };
    psi.iter().map(|z| z.norm_sqr()).collect()
}

fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 8 {
        return x.iter().sum();
    }
    let (a, b) = x.split_at(x.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Means and standard errors per component, independent of evaluation order.
fn reduce(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len();
    let dim = samples.first().map_or(0, Vec::len);
    let mut means = Vec::with_capacity(dim);
    let mut errs = Vec::with_capacity(dim);
    let mut column = vec![0.0; n];
    for k in 0..dim {
        for (slot, s) in column.iter_mut().zip(samples) {
            *slot = s[k];
        }
        let mean = pairwise_sum(&column) / n as f64;
        let dev: Vec<f64> = column.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = if n > 1 { pairwise_sum(&dev) / (n - 1) as f64 } else { 0.0 };
        means.push(mean);
        errs.push((var / n as f64).sqrt());
    }
    (means, errs)
}

/// Final populations of one noise realization.
pub fn realization_populations(
    spec: &HamiltonianSpec,
    picture: Picture,
    psi0: &CVec,
    window: &WindowSpec,
    index: u64,
) -> Result<Vec<f64>> {
    let noise = spec.noise.as_ref().ok_or_else(|| Error::Precondition("spec carries no noise".into()))?;
    let sqrt_alpha = spec.reference_alpha().sqrt();
    let (t0, t1) = (window.tau_i / sqrt_alpha, window.tau_f / sqrt_alpha);
    let path = sample_noise_path(noise, t0, t1, index)?;
    if let Some(kernel) = fast_kernel(spec, picture) {
        let grid = midpoint_grid(spec, t0, t1, noise.dt_noise)?;
        return Ok(run_fast(kernel, spec, &grid, &path, noise.target, psi0));
    }
    let evolver = Evolver::new(spec, picture)?;
    let psi = evolver.propagate_piecewise(psi0, window.tau_i, window.tau_f, &path.in_tau_units(sqrt_alpha), noise.target)?;
    Ok(psi.iter().map(|z| z.norm_sqr()).collect())
}

/// Monte Carlo average of the final populations over `n` realizations (indices `0..n`).
/// Each realization is propagated by exponential-midpoint steps on the noise grid.
pub fn ensemble_average(
    spec: &HamiltonianSpec,
    picture: Picture,
    psi0: &CVec,
    window: &WindowSpec,
    n: usize,
) -> Result<EnsembleResult> {
    spec.validate()?;
    window.validate()?;
    let noise = spec.noise.as_ref().ok_or_else(|| Error::Precondition("spec carries no noise".into()))?;
    if n == 0 {
        return Err(Error::Precondition("ensemble needs at least one realization".into()));
    }
    if psi0.len() != picture.dimension() {
        return Err(Error::Dimension { expected: picture.dimension(), got: psi0.len() });
    }
    let n0 = psi0.norm_squared();
    if (n0 - 1.0).abs() > 1e-10 {
        return Err(Error::Normalization(n0));
    }
    let sqrt_alpha = spec.reference_alpha().sqrt();
    let (t0, t1) = (window.tau_i / sqrt_alpha, window.tau_f / sqrt_alpha);
    let samples: Vec<Vec<f64>> = match fast_kernel(spec, picture) {
        Some(kernel) => {
            // Validates the evolver once so picture errors surface before the loop.
            Evolver::new(spec, picture)?;
            let grid = midpoint_grid(spec, t0, t1, noise.dt_noise)?;
            (0..n as u64)
                .into_par_iter()
                .map(|i| {
                    let path = sample_noise_path(noise, t0, t1, i)?;
                    Ok(run_fast(kernel, spec, &grid, &path, noise.target, psi0))
                })
                .collect::<Result<_>>()?
        }
        None => (0..n as u64)
            .into_par_iter()
            .map(|i| {
                realization_populations(spec, picture, psi0, window, i)
                    .map_err(|e| Error::Realization { index: i, source: Box::new(e) })
            })
            .collect::<Result<_>>()?,
    };
    let (mean_populations, std_errors) = reduce(&samples);
    Ok(EnsembleResult {
        picture,
        n_realizations: n,
        mean_populations,
        std_errors,
        seed: noise.seed,
        gamma: noise.gamma,
    })
}
