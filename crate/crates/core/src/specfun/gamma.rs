use std::f64::consts::PI;

use crate::linalg::{C64, I};
use crate::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

fn pole_index(z: C64) -> Option<i64> {
    let n = z.re.round();
    let tol = 1e-14 * z.norm().max(1.0);
    if n <= 0.0 && (z - C64::new(n, 0.0)).norm() <= tol {
        Some(n as i64)
    } else {
        None
    }
}

/// `ln sin(pi z)`, stable for large `|Im z|`.
fn ln_sin_pi(z: C64) -> C64 {
    let two_i = C64::new(0.0, 2.0);
    if z.im > 1.0 {
        // sin(pi z) = e^{-i pi z} (e^{2 i pi z} - 1) / (2i)
        -I * PI * z + ((I * 2.0 * PI * z).exp() - 1.0).ln() - two_i.ln()
    } else if z.im < -1.0 {
        I * PI * z + ((1.0 - (-I * 2.0 * PI * z).exp()) / two_i).ln()
    } else {
        (PI * z).sin().ln()
    }
}

/// `ln Gamma(z)`.
///
/// For `Re z >= 1/2` the imaginary part is the continuous continuation from the
/// positive real axis; left of that line the value comes from the reflection
/// formula and is only guaranteed to satisfy `exp(ln Gamma(z)) = Gamma(z)`.
pub fn log_gamma(z: C64) -> Result<C64> {
    if let Some(n) = pole_index(z) {
        return Err(Error::GammaPole(C64::new(n as f64, 0.0)));
    }
    if z.re < 0.5 {
        let reflected = log_gamma(1.0 - z)?;
        return Ok(C64::new(PI.ln(), 0.0) - ln_sin_pi(z) - reflected);
    }
    let zm = z - 1.0;
    let mut series = C64::new(LANCZOS[0], 0.0);
    for (k, &coef) in LANCZOS.iter().enumerate().skip(1) {
        series += coef / (zm + k as f64);
    }
    let t = zm + LANCZOS_G + 0.5;
    Ok(HALF_LN_2PI + (zm + 0.5) * t.ln() - t + series.ln())
}

pub fn gamma(z: C64) -> Result<C64> {
    log_gamma(z).map(C64::exp)
}

/// `1 / Gamma(z)`, zero at the poles.
pub fn rgamma(z: C64) -> C64 {
    match log_gamma(z) {
        Ok(lg) => (-lg).exp(),
        Err(_) => C64::new(0.0, 0.0),
    }
}
