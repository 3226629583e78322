//! Adaptive explicit Runge-Kutta integration of complex linear systems.
//!
//! Dormand-Prince 8(5,3) with the Hairer-Wanner step-size controller. Steps
//! never cross the requested end point, so callers can integrate segment by
//! segment (sample times, noise intervals) while the step size carries over.

use crate::linalg::{C64, ZERO};
use crate::{Error, Result};

const C: [f64; 12] = [
    0.0,
    0.05260015195876773,
    0.0789002279381516,
    0.1183503419072274,
    0.2816496580927726,
    0.3333333333333333,
    0.25,
    0.3076923076923077,
    0.6512820512820513,
    0.6,
    0.8571428571428571,
    1.0,
];

// Lower-triangular stage matrix; row s holds a[s][0..s].
const A: [[f64; 11]; 12] = [
    [0.0; 11],
    [0.05260015195876773, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0197250569845379, 0.0591751709536137, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.02958758547680685, 0.0, 0.08876275643042054, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2413651341592667, 0.0, -0.8845494793282861, 0.924834003261792, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.037037037037037035, 0.0, 0.0, 0.17082860872947386, 0.12546768756682242, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.037109375, 0.0, 0.0, 0.17025221101954405, 0.06021653898045596, -0.017578125, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.03709200011850479, 0.0, 0.0, 0.17038392571223998, 0.10726203044637328, -0.015319437748624402, 0.008273789163814023, 0.0, 0.0, 0.0, 0.0],
    [0.6241109587160757, 0.0, 0.0, -3.3608926294469414, -0.868219346841726, 27.59209969944671, 20.154067550477894, -43.48988418106996, 0.0, 0.0, 0.0],
    [0.47766253643826434, 0.0, 0.0, -2.4881146199716677, -0.590290826836843, 21.230051448181193, 15.279233632882423, -33.28821096898486, -0.020331201708508627, 0.0, 0.0],
    [-0.9371424300859873, 0.0, 0.0, 5.186372428844064, 1.0914373489967295, -8.149787010746927, -18.52006565999696, 22.739487099350505, 2.4936055526796523, -3.0467644718982196, 0.0],
    [2.273310147516538, 0.0, 0.0, -10.53449546673725, -2.0008720582248625, -17.9589318631188, 27.94888452941996, -2.8589982771350235, -8.87285693353063, 12.360567175794303, 0.6433927460157636],
];

const B: [f64; 12] = [0.054293734116568765, 0.0, 0.0, 0.0, 0.0, 4.450312892752409, 1.8915178993145003, -5.801203960010585, 0.3111643669578199, -0.1521609496625161, 0.20136540080403034, 0.04471061572777259];

const ER: [f64; 12] = [0.01312004499419488, 0.0, 0.0, 0.0, 0.0, -1.2251564463762044, -0.4957589496572502, 1.6643771824549864, -0.35032884874997366, 0.3341791187130175, 0.08192320648511571, -0.022355307863886294];

const BHH: [f64; 3] = [0.2440944881889764, 0.7338466882816118, 0.022058823529411766];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.333;
const FAC_MAX: f64 = 6.0;
const EXPONENT: f64 = 1.0 / 8.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct Dop853 {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    /// Per `integrate` call.
    pub max_steps: usize,
    h: f64,
    fac_old: f64,
    stats: Stats,
    k: Vec<Vec<C64>>,
    y_stage: Vec<C64>,
    y_new: Vec<C64>,
}

impl Dop853 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Dop853 {
            rtol,
            atol,
            max_step: f64::INFINITY,
            max_steps: 5_000_000,
            h: 0.0,
            fac_old: 1e-4,
            stats: Stats::default(),
            k: Vec::new(),
            y_stage: Vec::new(),
            y_new: Vec::new(),
        }
    }

    pub fn with_max_step(mut self, max_step: f64) -> Self {
        self.max_step = max_step;
        self
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    /// Forget the step size carried over from previous calls.
    pub fn reset_step(&mut self) {
        self.h = 0.0;
        self.fac_old = 1e-4;
    }

    fn ensure_buffers(&mut self, n: usize) {
        if self.y_new.len() != n {
            self.k = vec![vec![ZERO; n]; 12];
            self.y_stage = vec![ZERO; n];
            self.y_new = vec![ZERO; n];
        }
    }

    fn error_scale(&self, a: C64, b: C64) -> f64 {
        self.atol + self.rtol * a.norm().max(b.norm())
    }

    fn initial_step<F>(&mut self, f: &mut F, t: f64, y: &[C64], dir: f64) -> f64
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let n = y.len();
        let (mut d0, mut d1) = (0.0, 0.0);
        for i in 0..n {
            let sk = self.error_scale(y[i], y[i]);
            d0 += (y[i].norm() / sk).powi(2);
            d1 += (self.k[0][i].norm() / sk).powi(2);
        }
        let (d0, d1) = ((d0 / n as f64).sqrt(), (d1 / n as f64).sqrt());
        let mut h = if d0 <= 1e-10 || d1 <= 1e-10 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h = h.min(self.max_step);
        for i in 0..n {
            self.y_stage[i] = y[i] + self.k[0][i] * (dir * h);
        }
        let mut probe = std::mem::take(&mut self.k[1]);
        f(t + dir * h, &self.y_stage, &mut probe);
        self.stats.evaluations += 1;
        let mut d2 = 0.0;
        for i in 0..n {
            let sk = self.error_scale(y[i], y[i]);
            d2 += ((probe[i] - self.k[0][i]).norm() / sk).powi(2);
        }
        self.k[1] = probe;
        let d2 = (d2 / n as f64).sqrt() / h;
        let der = d1.max(d2);
        let h1 = if der <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der).powf(EXPONENT)
        };
        (100.0 * h).min(h1).min(self.max_step)
    }

    /// Advance `y` from `t0` to `t1` (either direction) under `y' = f(t, y)`.
    pub fn integrate<F>(&mut self, f: &mut F, t0: f64, t1: f64, y: &mut [C64]) -> Result<()>
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        if t1 == t0 {
            return Ok(());
        }
        let n = y.len();
        self.ensure_buffers(n);
        let dir = (t1 - t0).signum();
        let mut t = t0;

        {
            let mut k0 = std::mem::take(&mut self.k[0]);
            f(t, y, &mut k0);
            self.k[0] = k0;
            self.stats.evaluations += 1;
        }
        let mut h = if self.h > 0.0 {
            self.h.min(self.max_step)
        } else {
            self.initial_step(f, t, y, dir)
        };
        let mut rejected_last = false;
        let mut steps = 0usize;

        loop {
            if steps >= self.max_steps {
                self.h = h;
                return Err(Error::ToleranceNotMet { tau: t, steps });
            }
            if 0.1 * h <= f64::EPSILON * t.abs() {
                return Err(Error::StepSizeUnderflow { tau: t });
            }
            let mut last = false;
            let mut h_step = h;
            if (t + 1.01 * dir * h - t1) * dir >= 0.0 {
                h_step = (t1 - t).abs();
                last = true;
            }
            steps += 1;
            let hs = dir * h_step;

            for s in 1..12 {
                for i in 0..n {
                    let mut acc = ZERO;
                    for j in 0..s {
                        let a = A[s][j];
                        if a != 0.0 {
                            acc += self.k[j][i] * a;
                        }
                    }
                    self.y_stage[i] = y[i] + acc * hs;
                }
                let mut ks = std::mem::take(&mut self.k[s]);
                f(t + C[s] * hs, &self.y_stage, &mut ks);
                self.k[s] = ks;
            }
            self.stats.evaluations += 11;

            let (mut err, mut err2) = (0.0, 0.0);
            for i in 0..n {
                let mut incr = ZERO;
                let mut est = ZERO;
                for s in 0..12 {
                    incr += self.k[s][i] * B[s];
                    est += self.k[s][i] * ER[s];
                }
                self.y_new[i] = y[i] + incr * hs;
                let sk = self.error_scale(y[i], self.y_new[i]);
                let e3 = incr - self.k[0][i] * BHH[0] - self.k[8][i] * BHH[1] - self.k[11][i] * BHH[2];
                err += (est.norm() / sk).powi(2);
                err2 += (e3.norm() / sk).powi(2);
            }
            let mut deno = err + 0.01 * err2;
            if deno <= 0.0 {
                deno = 1.0;
            }
            let err = h_step * err * (1.0 / (deno * n as f64)).sqrt();
            if !err.is_finite() {
                rejected_last = true;
                self.stats.rejected += 1;
                h = h_step * FAC_MIN;
                continue;
            }

            let fac11 = err.powf(EXPONENT);
            let fac = (fac11 / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h_step / fac;

            if err <= 1.0 {
                self.fac_old = err.max(1e-4);
                self.stats.accepted += 1;
                h_new = h_new.min(self.max_step);
                if rejected_last {
                    h_new = h_new.min(h_step);
                }
                rejected_last = false;
                y.copy_from_slice(&self.y_new);
                t = if last { t1 } else { t + hs };
                let mut k0 = std::mem::take(&mut self.k[0]);
                f(t, y, &mut k0);
                self.k[0] = k0;
                self.stats.evaluations += 1;
                // The clipped final step says nothing about the natural step size.
                if !(last && h_step < h) {
                    h = h_new;
                }
                if last {
                    self.h = h;
                    return Ok(());
                }
            } else {
                self.stats.rejected += 1;
                rejected_last = true;
                h = h_step / (1.0 / FAC_MIN).min(fac11 / SAFETY);
            }
        }
    }
}
