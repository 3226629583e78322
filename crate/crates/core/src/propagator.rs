//! Numerical time evolution in the dimensionless sweep variable `tau = sqrt(alpha) t`.
//!
//! `d psi / d tau = -i H(tau / sqrt(alpha)) / sqrt(alpha) psi`, integrated with
//! the adaptive DOP853 scheme. Sample times and noise breakpoints are always
//! hit exactly; the integrator never steps across them.

use serde::{Deserialize, Serialize};

use crate::linalg::{c, hermitian_eigen, kron, polar_unitary, re, CMat, CVec, C64, I, ZERO};
use crate::model::{constant_of_motion_k, HamiltonianSpec, LinearHamiltonian, Picture};
use crate::noise::NoiseTarget;
use crate::ode::{Dop853, Stats};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub tau_i: f64,
    pub tau_f: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default = "default_max_step")]
    pub max_step: f64,
    /// Number of equidistant samples including both ends.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_rel_tol() -> f64 {
    1e-11
}
fn default_abs_tol() -> f64 {
    1e-13
}
fn default_max_step() -> f64 {
    f64::INFINITY
}
fn default_samples() -> usize {
    2001
}

impl WindowSpec {
    pub fn new(tau_i: f64, tau_f: f64) -> Self {
        WindowSpec {
            tau_i,
            tau_f,
            rel_tol: default_rel_tol(),
            abs_tol: default_abs_tol(),
            max_step: default_max_step(),
            samples: default_samples(),
        }
    }

    /// Symmetric window `[-half, half]`.
    pub fn symmetric(half: f64) -> Self {
        Self::new(-half, half)
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_max_step(mut self, max_step: f64) -> Self {
        self.max_step = max_step;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_i.is_finite() && self.tau_f.is_finite()) || self.tau_f < self.tau_i {
            return Err(Error::Precondition(format!(
                "window needs finite tau_i <= tau_f (got {} and {})",
                self.tau_i, self.tau_f
            )));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0) {
            return Err(Error::Precondition("tolerances and max_step must be positive".into()));
        }
        if self.samples == 0 || (self.samples == 1 && self.tau_f > self.tau_i) {
            return Err(Error::Precondition("a non-empty window needs at least two samples".into()));
        }
        Ok(())
    }

    pub fn sample_taus(&self) -> Vec<f64> {
        if self.tau_f == self.tau_i {
            return vec![self.tau_i];
        }
        let n = self.samples.max(2);
        let span = self.tau_f - self.tau_i;
        (0..n)
            .map(|k| if k + 1 == n { self.tau_f } else { self.tau_i + span * k as f64 / (n - 1) as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PropagationResult {
    pub picture: Picture,
    pub taus: Vec<f64>,
    /// Physical times `tau / sqrt(alpha)`.
    pub times: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<CVec>,
    pub populations: Vec<Vec<f64>>,
    /// `||psi||` at every sample.
    pub norm: Vec<f64>,
    /// `<K>` at every sample, full nine-dimensional picture only.
    pub parity: Option<Vec<f64>>,
    /// Largest `| ||psi|| - 1 |` (Hermitian) or largest norm increase (decaying).
    pub norm_deviation: f64,
    pub converged: bool,
    #[serde(skip)]
    pub stats: Stats,
}

impl PropagationResult {
    pub fn final_state(&self) -> &CVec {
        self.states.last().expect("at least one sample")
    }

    pub fn final_populations(&self) -> &[f64] {
        self.populations.last().expect("at least one sample")
    }
}

/// Piecewise-constant signal on `tau0 + k dtau`, held at the last value beyond its end.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    pub tau0: f64,
    pub dtau: f64,
    pub values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn zero(tau0: f64, tau1: f64) -> Self {
        PiecewiseConstant { tau0, dtau: (tau1 - tau0).max(1.0), values: vec![0.0] }
    }

    fn segment(&self, tau: f64) -> usize {
        let k = ((tau - self.tau0) / self.dtau).floor();
        (k.max(0.0) as usize).min(self.values.len().saturating_sub(1))
    }

    pub fn value_at(&self, tau: f64) -> f64 {
        self.values.get(self.segment(tau)).copied().unwrap_or(0.0)
    }

    /// Interior breakpoints strictly inside `(a, b)`.
    pub fn breakpoints(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        (1..self.values.len()).map(move |k| self.tau0 + k as f64 * self.dtau).filter(move |&x| x > a && x < b)
    }
}

/// Everything needed to evaluate `H(tau) / sqrt(alpha)` quickly.
#[derive(Debug, Clone)]
pub struct Evolver<'a> {
    spec: &'a HamiltonianSpec,
    lin: LinearHamiltonian,
    sqrt_alpha: f64,
    off: Vec<(usize, usize, C64)>,
    diag_const: Vec<C64>,
    decay: Vec<f64>,
}

impl<'a> Evolver<'a> {
    pub fn new(spec: &'a HamiltonianSpec, picture: Picture) -> Result<Self> {
        let lin = LinearHamiltonian::new(spec, picture)?;
        let off = lin.off_diagonal();
        let diag_const = (0..lin.dimension()).map(|k| lin.constant[(k, k)]).collect();
        Ok(Evolver {
            spec,
            sqrt_alpha: spec.reference_alpha().sqrt(),
            off,
            diag_const,
            decay: vec![0.0; lin.dimension()],
            lin,
        })
    }

    /// Enable the non-Hermitian decay terms `-i G (S1z + 1) - i G' (S2z + 1)`.
    pub fn with_decay(mut self) -> Result<Self> {
        let Some(d) = self.spec.decay else {
            return Ok(self);
        };
        if self.lin.picture.product_indices().is_none() {
            return Err(Error::Precondition("decay is defined for the qutrit pictures only".into()));
        }
        self.decay = (0..self.dimension())
            .map(|k| d.gamma_tilde * (self.lin.d1[k] + 1.0) + d.gamma_tilde_prime * (self.lin.d2[k] + 1.0))
            .collect();
        Ok(self)
    }

    pub fn picture(&self) -> Picture {
        self.lin.picture
    }

    pub fn dimension(&self) -> usize {
        self.lin.dimension()
    }

    pub fn sqrt_alpha(&self) -> f64 {
        self.sqrt_alpha
    }

    pub fn is_hermitian(&self) -> bool {
        self.decay.iter().all(|&g| g == 0.0)
    }

    fn check_domain(&self, tau_a: f64, tau_b: f64) -> Result<()> {
        let (t_a, t_b) = (tau_a / self.sqrt_alpha, tau_b / self.sqrt_alpha);
        for f in [&self.spec.omega1, &self.spec.omega2] {
            let (lo, hi) = f.domain();
            let slack = 1e-12 * (hi - lo).abs().max(1.0);
            for t in [t_a, t_b] {
                if t < lo - slack || t > hi + slack {
                    f.eval(t)?;
                }
            }
        }
        Ok(())
    }

    /// Field values at `tau` including the noise shift `eta` (in `tau` units).
    fn fields(&self, tau: f64, eta: f64, target: NoiseTarget) -> (f64, f64) {
        let t = tau / self.sqrt_alpha;
        let mut w1 = self.spec.omega1.eval(t).unwrap_or(f64::NAN);
        let mut w2 = self.spec.omega2.eval(t).unwrap_or(f64::NAN);
        let shift = eta * self.sqrt_alpha;
        match target {
            NoiseTarget::Omega1 => w1 += shift,
            NoiseTarget::Omega2 => w2 += shift,
            NoiseTarget::Both => {
                w1 += shift;
                w2 += shift;
            }
        }
        (w1, w2)
    }

    fn rhs(&self, tau: f64, eta: f64, target: NoiseTarget, y: &[C64], dy: &mut [C64], diag: &mut [C64]) {
        let n = self.dimension();
        let (w1, w2) = self.fields(tau, eta, target);
        let s = 1.0 / self.sqrt_alpha;
        for k in 0..n {
            diag[k] = (self.diag_const[k] + re(w1 * self.lin.d1[k] + w2 * self.lin.d2[k]) - I * self.decay[k]) * s;
        }
        for (yc, dyc) in y.chunks_exact(n).zip(dy.chunks_exact_mut(n)) {
            for k in 0..n {
                dyc[k] = diag[k] * yc[k];
            }
            for &(i, j, v) in &self.off {
                dyc[i] += v * s * yc[j];
            }
            for d in dyc.iter_mut() {
                *d = -I * *d;
            }
        }
    }

    /// Hamiltonian of the picture at `tau` (energy units, no decay, no noise).
    pub fn hamiltonian_at(&self, tau: f64) -> CMat {
        let (w1, w2) = self.fields(tau, 0.0, NoiseTarget::Omega1);
        self.lin.at(w1, w2)
    }

    /// Integrate the column-stacked states `y` from `tau_a` to `tau_b` with
    /// noise `eta` held constant, reusing the integrator's step size.
    fn advance(
        &self,
        ode: &mut Dop853,
        tau_a: f64,
        tau_b: f64,
        eta: f64,
        target: NoiseTarget,
        y: &mut [C64],
    ) -> Result<()> {
        let mut diag = vec![ZERO; self.dimension()];
        let mut f = |tau: f64, y: &[C64], dy: &mut [C64]| self.rhs(tau, eta, target, y, dy, &mut diag);
        ode.integrate(&mut f, tau_a, tau_b, y)
    }

    /// Adaptive propagation with samples on the window grid and an optional noise path.
    pub fn propagate(
        &self,
        psi0: &CVec,
        window: &WindowSpec,
        noise: Option<(&PiecewiseConstant, NoiseTarget)>,
    ) -> Result<PropagationResult> {
        window.validate()?;
        let n = self.dimension();
        if psi0.len() != n {
            return Err(Error::Dimension { expected: n, got: psi0.len() });
        }
        let n0 = psi0.norm();
        if (n0 * n0 - 1.0).abs() > 1e-10 {
            return Err(Error::Normalization(n0 * n0));
        }
        self.check_domain(window.tau_i, window.tau_f)?;
        let taus = window.sample_taus();
        let mut ode = Dop853::new(window.rel_tol, window.abs_tol).with_max_step(window.max_step);
        let mut y: Vec<C64> = psi0.iter().copied().collect();
        let k_diag = (self.lin.picture == Picture::Full9).then(|| constant_of_motion_k().diagonal());
        let mut out = PropagationResult {
            picture: self.lin.picture,
            times: taus.iter().map(|t| t / self.sqrt_alpha).collect(),
            taus: taus.clone(),
            states: Vec::with_capacity(taus.len()),
            populations: Vec::with_capacity(taus.len()),
            norm: Vec::with_capacity(taus.len()),
            parity: k_diag.as_ref().map(|_| Vec::with_capacity(taus.len())),
            norm_deviation: 0.0,
            converged: true,
            stats: Stats::default(),
        };
        let record = |y: &[C64], out: &mut PropagationResult| {
            let v = CVec::from_column_slice(y);
            let pops: Vec<f64> = y.iter().map(|z| z.norm_sqr()).collect();
            let nrm2: f64 = pops.iter().sum();
            if let (Some(p), Some(k)) = (out.parity.as_mut(), k_diag.as_ref()) {
                p.push(pops.iter().zip(k.iter()).map(|(p, k)| p * k.re).sum::<f64>() / nrm2);
            }
            out.norm.push(nrm2.sqrt());
            out.populations.push(pops);
            out.states.push(v);
        };
        record(&y, &mut out);
        let (target, path) = match noise {
            Some((p, t)) => (t, Some(p)),
            None => (NoiseTarget::Omega1, None),
        };
        for w in taus.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mut cuts: Vec<f64> = vec![a];
            if let Some(p) = path {
                cuts.extend(p.breakpoints(a, b));
            }
            cuts.push(b);
            for seg in cuts.windows(2) {
                let eta = path.map_or(0.0, |p| p.value_at(0.5 * (seg[0] + seg[1])));
                self.advance(&mut ode, seg[0], seg[1], eta, target, &mut y)?;
            }
            record(&y, &mut out);
        }
        out.stats = ode.stats();
        if self.is_hermitian() {
            out.norm_deviation = out.norm.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
            out.converged = out.norm_deviation < 10.0 * window.rel_tol.max(1e-14) * (1.0 + out.stats.accepted as f64).sqrt();
        } else {
            out.norm_deviation = out.norm.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
            out.converged = out.norm_deviation <= 10.0 * window.rel_tol;
        }
        Ok(out)
    }

    /// Evolution matrix `U(tau_f, tau_i)`; columns are evolved basis states.
    pub fn operator(&self, window: &WindowSpec) -> Result<CMat> {
        window.validate()?;
        self.check_domain(window.tau_i, window.tau_f)?;
        let n = self.dimension();
        let mut y = vec![ZERO; n * n];
        for k in 0..n {
            y[k * n + k] = c(1.0, 0.0);
        }
        let mut ode = Dop853::new(window.rel_tol, window.abs_tol).with_max_step(window.max_step);
        self.advance(&mut ode, window.tau_i, window.tau_f, 0.0, NoiseTarget::Omega1, &mut y)?;
        Ok(CMat::from_column_slice(n, n, &y))
    }

    /// Exponential-midpoint propagation through a piecewise-constant noise path:
    /// on each noise interval the Hamiltonian is frozen at the interval midpoint
    /// and exponentiated exactly (closed forms for the qubit, 4D and su(2) pictures).
    /// Only the final state is returned.
    pub fn propagate_piecewise(
        &self,
        psi0: &CVec,
        tau_i: f64,
        tau_f: f64,
        path: &PiecewiseConstant,
        target: NoiseTarget,
    ) -> Result<CVec> {
        if !self.is_hermitian() {
            return Err(Error::Precondition("exponential stepping needs a Hermitian generator".into()));
        }
        self.check_domain(tau_i, tau_f)?;
        let mut psi = psi0.clone();
        let mut a = tau_i;
        let mut cuts: Vec<f64> = path.breakpoints(tau_i, tau_f).collect();
        cuts.push(tau_f);
        for b in cuts {
            if b <= a {
                continue;
            }
            let mid = 0.5 * (a + b);
            let (w1, w2) = self.fields(mid, path.value_at(mid), target);
            let u = self.frozen_exponential(w1, w2, (b - a) / self.sqrt_alpha)?;
            psi = u * psi;
            a = b;
        }
        Ok(psi)
    }

    /// `exp(-i H(w1, w2) dt)` for the picture.
    pub fn frozen_exponential(&self, w1: f64, w2: f64, dt: f64) -> Result<CMat> {
        let gp = self.spec.gamma_plus();
        let gm = self.spec.gamma_minus();
        let gz = self.spec.gamma_z;
        match self.lin.picture {
            Picture::Qubit1 => Ok(su2_exp(gm, 0.0, 0.5 * (w1 + w2), dt)),
            Picture::Qubit2 => Ok(su2_exp(gp, 0.0, 0.5 * (w1 - w2), dt)),
            // m1 m2 = 0 on every 4D state, so gamma_z drops out.
            Picture::Minus4 => {
                let u1 = su2_exp(gm, 0.0, 0.5 * (w1 + w2), dt);
                let u2 = su2_exp(gp, 0.0, 0.5 * (w1 - w2), dt);
                Ok(kron(&u1, &u2))
            }
            Picture::Core3 if gz == 0.0 => {
                let u = su2_exp(gp / 2f64.sqrt(), 0.0, 0.5 * (w1 - w2), dt);
                Ok(spin1_representation(u[(0, 0)], u[(0, 1)]))
            }
            _ => {
                let (vals, vecs) = hermitian_eigen(&self.lin.at(w1, w2))?;
                let phases = CVec::from_iterator(vals.len(), vals.iter().map(|&e| (-I * e * dt).exp()));
                Ok(&vecs * CMat::from_diagonal(&phases) * vecs.adjoint())
            }
        }
    }
}

/// `exp(-i (hx sx + hy sy + hz sz) dt)`.
pub fn su2_exp(hx: f64, hy: f64, hz: f64, dt: f64) -> CMat {
    let h = (hx * hx + hy * hy + hz * hz).sqrt();
    let (cs, sn) = ((h * dt).cos(), (h * dt).sin());
    let (nx, ny, nz) = if h > 0.0 { (hx / h, hy / h, hz / h) } else { (0.0, 0.0, 0.0) };
    CMat::from_row_slice(
        2,
        2,
        &[
            c(cs, -sn * nz),
            c(-sn * ny, -sn * nx),
            c(sn * ny, -sn * nx),
            c(cs, sn * nz),
        ],
    )
}

/// Spin-1 representation of the SU(2) element `[[A, B], [-B*, A*]]` in the basis `|1>, |0>, |-1>`.
pub fn spin1_representation(a: C64, b: C64) -> CMat {
    let r2 = 2f64.sqrt();
    CMat::from_row_slice(
        3,
        3,
        &[
            a * a,
            r2 * a * b,
            b * b,
            -r2 * a * b.conj(),
            a.norm_sqr() - b.norm_sqr() + ZERO,
            r2 * a.conj() * b,
            b.conj() * b.conj(),
            -r2 * a.conj() * b.conj(),
            a.conj() * a.conj(),
        ],
    )
}

fn picture_for(psi0: &CVec) -> Result<Picture> {
    Picture::for_dimension(psi0.len())
}

/// Hermitian evolution; the picture follows from the state dimension (2 selects qubit 1).
pub fn evolve_state(spec: &HamiltonianSpec, psi0: &CVec, window: &WindowSpec) -> Result<PropagationResult> {
    evolve_state_in(spec, picture_for(psi0)?, psi0, window)
}

pub fn evolve_state_in(
    spec: &HamiltonianSpec,
    picture: Picture,
    psi0: &CVec,
    window: &WindowSpec,
) -> Result<PropagationResult> {
    Evolver::new(spec, picture)?.propagate(psi0, window, None)
}

pub fn evolve_operator(spec: &HamiltonianSpec, window: &WindowSpec, picture: Picture) -> Result<CMat> {
    Evolver::new(spec, picture)?.operator(window)
}

/// Evolution with the decay terms of `spec.decay` (qutrit pictures).
pub fn evolve_nonhermitian(spec: &HamiltonianSpec, psi0: &CVec, window: &WindowSpec) -> Result<PropagationResult> {
    if spec.decay.is_none() {
        return Err(Error::Precondition("spec has no decay rates".into()));
    }
    Evolver::new(spec, picture_for(psi0)?)?.with_decay()?.propagate(psi0, window, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticOptions {
    /// Stop when doubling the window changes no population by more than this.
    pub tol: f64,
    pub max_widenings: usize,
    /// Starting half-window in `tau`; default `20 max(1, sqrt(beta_max))`.
    pub initial_half_window: Option<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for AsymptoticOptions {
    fn default() -> Self {
        AsymptoticOptions {
            tol: 1e-4,
            max_widenings: 6,
            initial_half_window: None,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticPopulations {
    pub picture: Picture,
    pub populations: Vec<f64>,
    pub half_window: f64,
    pub widenings: usize,
    pub last_delta: f64,
    pub converged: bool,
}

/// Eigenbasis of `h` reordered to follow the diabatic basis vectors: column `j`
/// is the dressed state continuously connected to basis state `j`, with
/// `<e_j|W_j> > 0`. Near-degenerate clusters are resolved by the orthonormal
/// basis of the cluster closest to the diabatic vectors (polar decomposition).
pub fn dressed_basis(h: &CMat) -> Result<CMat> {
    let n = h.nrows();
    let (vals, vecs) = hermitian_eigen(h)?;
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut w = CMat::zeros(n, n);
    let mut assigned = vec![false; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && vals[end] - vals[end - 1] <= 1e-9 * scale {
            end += 1;
        }
        let cluster = vecs.columns(start, end - start).into_owned();
        // Diabatic states most represented in this cluster.
        let weight: Vec<f64> = (0..n).map(|i| (0..end - start).map(|k| cluster[(i, k)].norm_sqr()).sum()).collect();
        let mut order: Vec<usize> = (0..n).filter(|&i| !assigned[i]).collect();
        order.sort_by(|&a, &b| weight[b].total_cmp(&weight[a]));
        let chosen: Vec<usize> = order.into_iter().take(end - start).collect();
        let e_s = CMat::from_fn(n, chosen.len(), |i, k| if i == chosen[k] { c(1.0, 0.0) } else { ZERO });
        let rot = polar_unitary(&(cluster.adjoint() * &e_s));
        let aligned = &cluster * rot;
        for (k, &j) in chosen.iter().enumerate() {
            let col = aligned.column(k);
            let phase = col[j];
            let fix = if phase.norm() > 0.0 { phase.conj() / phase.norm() } else { c(1.0, 0.0) };
            w.set_column(j, &(col * fix));
            assigned[j] = true;
        }
        start = end;
    }
    Ok(w)
}

/// Largest `|coupling|^2 / alpha` among the off-diagonal entries of the picture.
pub fn beta_max(spec: &HamiltonianSpec, picture: Picture) -> Result<f64> {
    let lin = LinearHamiltonian::new(spec, picture)?;
    let g = lin.off_diagonal().iter().fold(0.0f64, |m, (_, _, v)| m.max(v.norm()));
    Ok(g * g / spec.reference_alpha())
}

fn dressed_run(ev: &Evolver, psi0: &CVec, half: f64, opts: &AsymptoticOptions) -> Result<Vec<f64>> {
    let w_i = dressed_basis(&ev.hamiltonian_at(-half))?;
    let w_f = dressed_basis(&ev.hamiltonian_at(half))?;
    let start = &w_i * psi0;
    let window = WindowSpec::symmetric(half).with_samples(2).with_tolerances(opts.rel_tol, opts.abs_tol);
    let res = ev.propagate(&start, &window, None)?;
    let coeffs = w_f.adjoint() * res.final_state();
    Ok(coeffs.iter().map(|z| z.norm_sqr()).collect())
}

/// Populations at `tau -> +infinity` for a state prepared at `tau -> -infinity`,
/// both expressed in the diabatic (product) basis of the picture.
///
/// The finite window `[-T, T]` is widened by doubling until the populations
/// settle. At both ends the state is mapped between diabatic labels and the
/// instantaneous eigenstates they connect to, which removes the slowly decaying
/// interference terms a bare finite window would leave.
pub fn asymptotic_populations(
    spec: &HamiltonianSpec,
    picture: Picture,
    psi0: &CVec,
    opts: &AsymptoticOptions,
) -> Result<AsymptoticPopulations> {
    let ev = Evolver::new(spec, picture)?;
    if psi0.len() != ev.dimension() {
        return Err(Error::Dimension { expected: ev.dimension(), got: psi0.len() });
    }
    let beta = beta_max(spec, picture)?;
    let mut half = opts.initial_half_window.unwrap_or(20.0 * beta.sqrt().max(1.0));
    if beta == 0.0 {
        // No couplings: diabatic populations are conserved exactly.
        return Ok(AsymptoticPopulations {
            picture,
            populations: psi0.iter().map(|z| z.norm_sqr()).collect(),
            half_window: half,
            widenings: 0,
            last_delta: 0.0,
            converged: true,
        });
    }
    let mut prev = dressed_run(&ev, psi0, half, opts)?;
    let mut last_delta = f64::INFINITY;
    for widening in 1..=opts.max_widenings {
        half *= 2.0;
        let next = dressed_run(&ev, psi0, half, opts)?;
        last_delta = prev.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prev = next;
        if last_delta < opts.tol {
            return Ok(AsymptoticPopulations {
                picture,
                populations: prev,
                half_window: half,
                widenings: widening,
                last_delta,
                converged: true,
            });
        }
    }
    Err(Error::NonConvergence { widenings: opts.max_widenings, last_delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{basis_vector, expm_hermitian, max_abs, unitarity_defect};
    use crate::model::{build_full_hamiltonian, FieldProtocol, BASIS4};

    fn lz_qubit(beta: f64) -> HamiltonianSpec {
        // Qubit 1 of the STM protocol: H1 = (alpha t / 2) sz + gamma_- sx.
        HamiltonianSpec::stm_single_field(1.0, beta.sqrt(), 0.0, 0.0)
    }

    #[test]
    fn constant_diagonal_hamiltonian_only_rotates_phases() {
        let spec = HamiltonianSpec::new(
            0.0,
            0.0,
            0.3,
            FieldProtocol::Constant { omega: 0.7 },
            FieldProtocol::Constant { omega: -0.2 },
        );
        let psi0 = basis_vector(9, 2); // |1-1>: E = 0.7 + 0.2 - 0.3
        let window = WindowSpec::new(0.0, 5.0).with_samples(11);
        let res = evolve_state(&spec, &psi0, &window).unwrap();
        for (tau, state) in res.taus.iter().zip(&res.states) {
            let expected = (-I * 0.6 * *tau).exp();
            assert!((state[2] - expected).norm() < 1e-9);
            assert_eq!(res.populations[0][2], 1.0);
        }
    }

    #[test]
    fn two_level_sweep_reaches_the_transition_law() {
        let spec = lz_qubit(0.5);
        let res = evolve_state(&spec, &basis_vector(2, 1), &WindowSpec::symmetric(20.0)).unwrap();
        let p_up = res.final_populations()[0];
        let p = 1.0 - (-std::f64::consts::PI).exp();
        assert!((p_up - p).abs() < 2.0 * 0.5f64.sqrt() / 20.0);
        assert!(res.converged);
        assert_eq!(res.taus.len(), 2001);
    }

    #[test]
    fn four_dimensional_state_stays_in_its_block() {
        let spec = HamiltonianSpec::stm_single_field(1.0, 0.4, 0.15, 0.3);
        let res = evolve_state(&spec, &basis_vector(9, 7), &WindowSpec::symmetric(15.0).with_samples(101)).unwrap();
        for pops in &res.populations {
            let leak: f64 = (0..9).filter(|k| !BASIS4.contains(k)).map(|k| pops[k]).sum();
            assert!(leak < 1e-20);
        }
        let parity = res.parity.unwrap();
        assert!(parity.iter().all(|k| (k + 1.0).abs() < 1e-10));
    }

    #[test]
    fn operator_is_identity_on_empty_window() {
        let spec = HamiltonianSpec::stm_single_field(1.0, 0.4, 0.15, 0.3);
        let u = evolve_operator(&spec, &WindowSpec::new(1.0, 1.0), Picture::Full9).unwrap();
        assert_eq!(u, crate::linalg::identity(9));
        let res = evolve_state(&spec, &basis_vector(9, 4), &WindowSpec::new(2.0, 2.0)).unwrap();
        assert_eq!(res.taus, vec![2.0]);
        assert_eq!(res.final_state(), &basis_vector(9, 4));
    }

    #[test]
    fn operator_is_unitary_and_matches_states() {
        let spec = HamiltonianSpec::stm_single_field(1.7, 0.4, -0.25, 0.3);
        let window = WindowSpec::new(-6.0, 4.0);
        let u = evolve_operator(&spec, &window, Picture::Full9).unwrap();
        assert!(unitarity_defect(&u) < 1e-9);
        let res = evolve_state(&spec, &basis_vector(9, 3), &window.clone().with_samples(2)).unwrap();
        let col = u.column(3).into_owned();
        assert!((col - res.final_state()).norm() < 1e-9);
    }

    #[test]
    fn exponential_closed_forms_match_eigen_route() {
        let spec = HamiltonianSpec::stm_single_field(1.0, 0.35, 0.35, 0.0);
        for picture in [Picture::Qubit1, Picture::Qubit2, Picture::Minus4, Picture::Core3] {
            let ev = Evolver::new(&spec, picture).unwrap();
            let u = ev.frozen_exponential(0.8, -0.3, 0.37).unwrap();
            let exact = expm_hermitian(&ev.lin.at(0.8, -0.3), 0.37).unwrap();
            assert!(max_abs(&(u - exact)) < 1e-13, "{picture:?}");
        }
        let spec = HamiltonianSpec::stm_single_field(1.0, 0.35, 0.1, 0.2);
        let ev = Evolver::new(&spec, Picture::Minus4).unwrap();
        let u = ev.frozen_exponential(0.8, -0.3, 0.37).unwrap();
        let exact = expm_hermitian(&ev.lin.at(0.8, -0.3), 0.37).unwrap();
        assert!(max_abs(&(u - exact)) < 1e-13);
    }

    #[test]
    fn piecewise_stepping_converges_to_adaptive() {
        let spec = HamiltonianSpec::stm_single_field(1.0, 0.4, 0.2, 0.0);
        let ev = Evolver::new(&spec, Picture::Minus4).unwrap();
        let psi0 = basis_vector(4, 3);
        let path = PiecewiseConstant { tau0: -8.0, dtau: 0.005, values: vec![0.0; 3200] };
        let fast = ev.propagate_piecewise(&psi0, -8.0, 8.0, &path, NoiseTarget::Omega1).unwrap();
        let exact = ev.propagate(&psi0, &WindowSpec::symmetric(8.0).with_samples(2), None).unwrap();
        assert!((fast - exact.final_state()).norm() < 1e-4);
    }

    #[test]
    fn noise_path_breakpoints_are_respected() {
        // With a single coupling-free qubit the phase is exp(-i int (w + eta)/2 dt).
        let spec = HamiltonianSpec::stm_single_field(1.0, 0.0, 0.0, 0.0);
        let ev = Evolver::new(&spec, Picture::Qubit1).unwrap();
        let path = PiecewiseConstant { tau0: 0.0, dtau: 0.3, values: vec![1.0, -2.0, 0.5, 3.0] };
        let res = ev
            .propagate(&basis_vector(2, 0), &WindowSpec::new(0.0, 1.2).with_samples(5), Some((&path, NoiseTarget::Omega1)))
            .unwrap();
        let phase_integral = 0.5 * (1.2f64 * 1.2 / 2.0 + 0.3 * (1.0 - 2.0 + 0.5 + 3.0));
        assert!((res.final_state()[0] - (-I * phase_integral).exp()).norm() < 1e-9);
        let fast = ev.propagate_piecewise(&basis_vector(2, 0), 0.0, 1.2, &path, NoiseTarget::Omega1).unwrap();
        // Midpoint freezing is exact for a ramp in a diagonal Hamiltonian.
        assert!((fast[0] - (-I * phase_integral).exp()).norm() < 1e-12);
    }

    #[test]
    fn decay_rates_per_level() {
        let g = 0.05;
        let spec = HamiltonianSpec::new(0.0, 0.0, 0.0, FieldProtocol::zero(), FieldProtocol::zero()).with_decay(g, g);
        let window = WindowSpec::new(0.0, 10.0).with_samples(21);
        let res = evolve_nonhermitian(&spec, &basis_vector(9, 0), &window).unwrap();
        for (t, nrm) in res.times.iter().zip(&res.norm) {
            let expected = (-8.0 * g * t).exp();
            assert!((nrm * nrm / expected - 1.0).abs() < 1e-8);
        }
        let res = evolve_nonhermitian(&spec, &basis_vector(9, 8), &window).unwrap();
        assert!(res.norm.iter().all(|n| (n - 1.0).abs() < 1e-14));
        // |00>: rate g + g on the amplitude -> norm^2 = e^{-4 g t}
        let res = evolve_nonhermitian(&spec, &basis_vector(9, 4), &window).unwrap();
        let t = *res.times.last().unwrap();
        assert!((res.norm.last().unwrap().powi(2) / (-4.0 * g * t).exp() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn decay_requires_rates_and_qutrit_pictures() {
        let spec = lz_qubit(0.3);
        assert!(evolve_nonhermitian(&spec, &basis_vector(9, 0), &WindowSpec::new(0.0, 1.0)).is_err());
        let spec = spec.with_decay(0.1, 0.1);
        assert!(evolve_nonhermitian(&spec, &basis_vector(2, 0), &WindowSpec::new(0.0, 1.0)).is_err());
    }

    #[test]
    fn dressed_basis_follows_diabatic_labels() {
        let spec = HamiltonianSpec::stm_single_field(1.0, 0.3, 0.3, 0.0);
        let h = build_full_hamiltonian(&spec, -30.0).unwrap();
        let w = dressed_basis(&h).unwrap();
        assert!(unitarity_defect(&w) < 1e-12);
        for j in 0..9 {
            assert!(w[(j, j)].re > 0.9 && w[(j, j)].im.abs() < 1e-14);
        }
        let d = w.adjoint() * &h * &w;
        let off: f64 = (0..9).flat_map(|i| (0..9).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| d[(i, j)].norm()).fold(0.0, f64::max);
        assert!(off < 1e-9, "{off}");
    }

    #[test]
    fn asymptotic_populations_trivial_and_two_level() {
        let spec = HamiltonianSpec::stm_single_field(1.0, 0.0, 0.0, 0.0);
        let r = asymptotic_populations(&spec, Picture::Minus4, &basis_vector(4, 3), &AsymptoticOptions::default()).unwrap();
        assert_eq!(r.populations, vec![0.0, 0.0, 0.0, 1.0]);
        for beta in [0.11, 0.5, 2.0] {
            let r = asymptotic_populations(&lz_qubit(beta), Picture::Qubit1, &basis_vector(2, 1), &AsymptoticOptions::default())
                .unwrap();
            let p = 1.0 - (-2.0 * std::f64::consts::PI * beta).exp();
            assert!((r.populations[0] - p).abs() < 1e-4, "beta {beta}: {} vs {p}", r.populations[0]);
            assert!(r.converged);
        }
    }

    #[test]
    fn spin1_representation_is_a_homomorphism() {
        let u = su2_exp(0.3, -0.2, 0.7, 1.1);
        let v = su2_exp(-0.5, 0.4, 0.1, 0.6);
        let uv = &u * &v;
        let d = |m: &CMat| spin1_representation(m[(0, 0)], m[(0, 1)]);
        assert!(max_abs(&(d(&u) * d(&v) - d(&uv))) < 1e-14);
        assert!(unitarity_defect(&d(&u)) < 1e-14);
    }
}
