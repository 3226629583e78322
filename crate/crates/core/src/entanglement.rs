//! Negativity of two-qutrit states: the general partial-transpose route and
//! the closed forms inside the invariant subspaces.

use serde::Serialize;

use crate::analytic::lz_probability;
use crate::linalg::{hermitian_eigenvalues, is_hermitian, norm_sqr, outer, re, CMat, CVec, C64};
use crate::model::{restrict, BASIS4, CORE3};
use crate::propagator::WindowSpec;
use crate::specfun::lz_cayley_klein;
use crate::{Error, Result};

const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
/// Pure states coming out of the propagator carry a norm drift of order its tolerance.
const STATE_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Subsystem {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativityMethod {
    General,
    ClosedForm4d,
    ClosedForm3d,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NegativityResult {
    pub value: f64,
    pub method: NegativityMethod,
}

/// Checks the density-matrix invariants: Hermitian, unit trace, no eigenvalue below `-1e-10`.
pub fn validate_density_matrix(rho: &CMat) -> Result<()> {
    if rho.nrows() != 9 || rho.ncols() != 9 {
        return Err(Error::Dimension { expected: 9, got: rho.nrows() });
    }
    if !is_hermitian(rho, 1e-10) {
        return Err(Error::InvalidDensityMatrix("not Hermitian".into()));
    }
    let tr = rho.trace();
    if (tr - re(1.0)).norm() > TRACE_TOL {
        return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
    }
    let min = hermitian_eigenvalues(rho)?.into_iter().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOL {
        return Err(Error::InvalidDensityMatrix(format!("eigenvalue {min:e}")));
    }
    Ok(())
}

fn transpose_unchecked(rho: &CMat, which: Subsystem) -> CMat {
    CMat::from_fn(9, 9, |r, s| {
        let (i1, i2, j1, j2) = (r / 3, r % 3, s / 3, s % 3);
        match which {
            Subsystem::A => rho[(3 * j1 + i2, 3 * i1 + j2)],
            Subsystem::B => rho[(3 * i1 + j2, 3 * j1 + i2)],
        }
    })
}

pub fn partial_transpose(rho: &CMat, which: Subsystem) -> Result<CMat> {
    validate_density_matrix(rho)?;
    Ok(transpose_unchecked(rho, which))
}

/// Sum of the magnitudes of the negative eigenvalues of the partial transpose.
pub fn negativity_wrt(rho: &CMat, which: Subsystem) -> Result<NegativityResult> {
    let pt = partial_transpose(rho, which)?;
    let abs_sum: f64 = hermitian_eigenvalues(&pt)?.iter().map(|l| l.abs()).sum();
    Ok(NegativityResult {
        value: ((abs_sum - 1.0) / 2.0).max(0.0),
        method: NegativityMethod::General,
    })
}

pub fn negativity(rho: &CMat) -> Result<NegativityResult> {
    negativity_wrt(rho, Subsystem::B)
}

fn normalized(psi: &CVec, tol: f64) -> Result<CVec> {
    let n2 = norm_sqr(psi);
    if (n2 - 1.0).abs() > tol {
        return Err(Error::Normalization(n2.sqrt()));
    }
    Ok(psi / re(n2.sqrt()))
}

/// General negativity of a pure 9D state, promoted to its projector.
pub fn negativity_pure(psi: &CVec) -> Result<NegativityResult> {
    if psi.len() != 9 {
        return Err(Error::Dimension { expected: 9, got: psi.len() });
    }
    negativity(&outer(&normalized(psi, STATE_NORM_TOL)?))
}

/// `N = sqrt(x (1 - x))`, `x = |w1|^2 + |w4|^2`, amplitudes on `|10>, |01>, |0-1>, |-10>`.
pub fn negativity_4d_closed_form(w: &[C64; 4]) -> Result<NegativityResult> {
    let n2: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    if (n2 - 1.0).abs() > 1e-10 {
        return Err(Error::Normalization(n2.sqrt()));
    }
    let x = (w[0].norm_sqr() + w[3].norm_sqr()) / n2;
    Ok(NegativityResult { value: (x * (1.0 - x)).max(0.0).sqrt(), method: NegativityMethod::ClosedForm4d })
}

/// `N = |c1||c2| + |c2||c3| + |c1||c3|` on `|1-1>, |00>, |-11>`.
pub fn negativity_3d_closed_form(c: &[C64; 3]) -> Result<NegativityResult> {
    let n2: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    if (n2 - 1.0).abs() > 1e-10 {
        return Err(Error::Normalization(n2.sqrt()));
    }
    let [a, b, d] = [c[0].norm(), c[1].norm(), c[2].norm()];
    Ok(NegativityResult { value: (a * b + b * d + a * d) / n2, method: NegativityMethod::ClosedForm3d })
}

/// Closed-form negativity of a 9D state that lives in one invariant subspace.
pub fn negativity_closed_form(psi: &CVec) -> Result<NegativityResult> {
    let w = restrict(psi, &BASIS4);
    let core = restrict(psi, &CORE3);
    let total = norm_sqr(psi);
    if (norm_sqr(&w) - total).abs() <= 1e-12 * total {
        negativity_4d_closed_form(&[w[0], w[1], w[2], w[3]])
    } else if (norm_sqr(&core) - total).abs() <= 1e-12 * total {
        negativity_3d_closed_form(&[core[0], core[1], core[2]])
    } else {
        Err(Error::Precondition("state is not confined to the 4D block or the su(2) core".into()))
    }
}

/// `sqrt(x (1 - x))` with `x = P1 P2 + (1 - P1)(1 - P2)`, from `|-10>`.
pub fn asymptotic_negativity_4d(beta_plus: f64, beta_minus: f64) -> f64 {
    let p1 = lz_probability(beta_minus.max(0.0));
    let p2 = lz_probability(beta_plus.max(0.0));
    let x = p1 * p2 + (1.0 - p1) * (1.0 - p2);
    (x * (1.0 - x)).max(0.0).sqrt()
}

/// `P3 (1 - P3) + sqrt(2 P3 (1 - P3))`, from `|1-1>`.
pub fn asymptotic_negativity_3d(beta: f64) -> f64 {
    let p3 = lz_probability(beta.max(0.0));
    let q = p3 * (1.0 - p3);
    q + (2.0 * q).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegativitySeries {
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
}

/// `N(tau) = |a3||b3| (sqrt 2 + |a3||b3|)` from `|1-1>` on the window's sample grid.
pub fn negativity_time_series_3d(beta: f64, window: &WindowSpec) -> Result<NegativitySeries> {
    window.validate()?;
    let taus = window.sample_taus();
    let values = taus
        .iter()
        .map(|&tau| {
            let ck = lz_cayley_klein(beta, tau, window.tau_i)?;
            let ab = ck.a.norm() * ck.b.norm();
            Ok(ab * (std::f64::consts::SQRT_2 + ab))
        })
        .collect::<Result<_>>()?;
    Ok(NegativitySeries { taus, values })
}

/// Maximizes a unimodal `f` on `[a, b]` by golden-section search.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while (b - a).abs() > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Maximum {
    pub beta: f64,
    pub value: f64,
}

/// Interior local maxima of `f` over an increasing grid, each refined by golden
/// section between its grid neighbours.
pub fn locate_maxima_on<F: Fn(f64) -> f64>(f: F, xs: &[f64]) -> Vec<Maximum> {
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut out = Vec::new();
    for k in 1..xs.len().saturating_sub(1) {
        if ys[k] > ys[k - 1] && ys[k] >= ys[k + 1] {
            let (beta, value) = golden_section_max(&f, xs[k - 1], xs[k + 1], 1e-10);
            out.push(Maximum { beta, value });
        }
    }
    out
}

pub fn locate_maxima<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, grid: usize) -> Vec<Maximum> {
    locate_maxima_on(f, &linear_grid(lo, hi, grid.max(3)))
}

pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub betas: Vec<f64>,
    pub values: Vec<f64>,
    pub maxima: Vec<Maximum>,
}

fn check_grid(betas: &[f64]) -> Result<()> {
    if betas.is_empty() || betas.iter().any(|b| !(*b >= 0.0)) || betas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("beta grid must be non-empty, non-negative and increasing".into()));
    }
    Ok(())
}

fn sweep<F: Fn(f64) -> f64>(f: F, betas: &[f64]) -> SweepResult {
    SweepResult {
        betas: betas.to_vec(),
        values: betas.iter().map(|&b| f(b)).collect(),
        maxima: locate_maxima_on(&f, betas),
    }
}

/// Asymptotic 4D negativity against `beta = beta_+` with `beta_- = beta_+ / ratio`.
pub fn negativity_sweep_4d_on(ratio: f64, betas: &[f64]) -> Result<SweepResult> {
    if !(ratio > 0.0) {
        return Err(Error::Precondition(format!("ratio beta_+/beta_- must be positive, got {ratio}")));
    }
    check_grid(betas)?;
    Ok(sweep(|b| asymptotic_negativity_4d(b, b / ratio), betas))
}

/// Asymptotic core negativity against the two-level parameter of the core.
pub fn negativity_sweep_3d_on(betas: &[f64]) -> Result<SweepResult> {
    check_grid(betas)?;
    Ok(sweep(asymptotic_negativity_3d, betas))
}

pub fn negativity_sweep_4d(ratio: f64, lo: f64, hi: f64, points: usize) -> Result<SweepResult> {
    negativity_sweep_4d_on(ratio, &linear_grid(lo, hi, points.max(1)))
}

pub fn negativity_sweep_3d(lo: f64, hi: f64, points: usize) -> Result<SweepResult> {
    negativity_sweep_3d_on(&linear_grid(lo, hi, points.max(1)))
}
