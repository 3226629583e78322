use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Longitudinal field `omega(t)` (angular frequency, `hbar = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldProtocol {
    /// `omega(t) = alpha t`
    LinearRamp { alpha: f64 },
    /// `omega(t) = alpha t / 2`
    HalfRamp { alpha: f64 },
    Constant { omega: f64 },
    Negated { of: Box<FieldProtocol> },
    Custom(SampledField),
}

impl FieldProtocol {
    pub fn zero() -> Self {
        FieldProtocol::Constant { omega: 0.0 }
    }

    pub fn negated(self) -> Self {
        FieldProtocol::Negated { of: Box::new(self) }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            FieldProtocol::LinearRamp { alpha } => Ok(alpha * t),
            FieldProtocol::HalfRamp { alpha } => Ok(0.5 * alpha * t),
            FieldProtocol::Constant { omega } => Ok(*omega),
            FieldProtocol::Negated { of } => of.eval(t).map(|w| -w),
            FieldProtocol::Custom(table) => table.eval(t),
        }
    }

    /// `int_{t0}^{t1} omega(t) dt`.
    pub fn integral(&self, t0: f64, t1: f64) -> Result<f64> {
        match self {
            FieldProtocol::LinearRamp { alpha } => Ok(0.5 * alpha * (t1 * t1 - t0 * t0)),
            FieldProtocol::HalfRamp { alpha } => Ok(0.25 * alpha * (t1 * t1 - t0 * t0)),
            FieldProtocol::Constant { omega } => Ok(omega * (t1 - t0)),
            FieldProtocol::Negated { of } => of.integral(t0, t1).map(|w| -w),
            FieldProtocol::Custom(table) => table.integral(t0, t1),
        }
    }

    /// Sweep rate if the protocol is a ramp.
    pub fn ramp_rate(&self) -> Option<f64> {
        match self {
            FieldProtocol::LinearRamp { alpha } | FieldProtocol::HalfRamp { alpha } => Some(alpha.abs()),
            FieldProtocol::Negated { of } => of.ramp_rate(),
            _ => None,
        }
    }

    /// `(t_min, t_max)` outside which evaluation fails.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            FieldProtocol::Custom(table) => (table.times[0], *table.times.last().unwrap()),
            FieldProtocol::Negated { of } => of.domain(),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// A seeded, smooth, otherwise arbitrary field on `[t0, t1]`: a random
    /// superposition of a ramp, an offset and a few sinusoids, tabulated densely.
    pub fn random_smooth(seed: u64, t0: f64, t1: f64, scale: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let span = t1 - t0;
        let offset = scale * rng.gen_range(-1.0..1.0);
        let slope = scale * rng.gen_range(-1.0..1.0) / span.max(1.0);
        let modes: Vec<(f64, f64, f64)> = (1..=5)
            .map(|k| {
                let freq = k as f64 * rng.gen_range(0.5..1.5) * 2.0 * std::f64::consts::PI / span;
                (scale * rng.gen_range(-1.0..1.0) / k as f64, freq, rng.gen_range(0.0..6.3))
            })
            .collect();
        let n = 2001;
        let times: Vec<f64> = (0..n).map(|i| t0 + span * i as f64 / (n - 1) as f64).collect();
        let values = times
            .iter()
            .map(|&t| {
                let s = t - t0;
                offset + slope * s + modes.iter().map(|(a, f, p)| a * (f * s + p).sin()).sum::<f64>()
            })
            .collect();
        FieldProtocol::Custom(SampledField::new(times, values).expect("grid is increasing"))
    }
}

/// Tabulated field with monotone piecewise-cubic (Fritsch-Carlson) interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct SampledField {
    times: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTable {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawTable> for SampledField {
    type Error = Error;
    fn try_from(raw: RawTable) -> Result<Self> {
        SampledField::new(raw.times, raw.values)
    }
}

impl From<SampledField> for RawTable {
    fn from(f: SampledField) -> Self {
        RawTable { times: f.times, values: f.values }
    }
}

impl SampledField {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Dimension { expected: times.len(), got: values.len() });
        }
        if times.len() < 2 {
            return Err(Error::Precondition("a field table needs at least two samples".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("field table times must increase strictly and values be finite".into()));
        }
        let slopes = pchip_slopes(&times, &values);
        Ok(SampledField { times, values, slopes })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn locate(&self, t: f64) -> Result<usize> {
        let (lo, hi) = (self.times[0], *self.times.last().unwrap());
        // Tolerate round-off at the ends of the table.
        let slack = 1e-12 * (hi - lo);
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(Error::FieldDomain {
                t,
                reason: format!("outside the tabulated range [{lo}, {hi}]"),
            });
        }
        let k = self.times.partition_point(|&x| x <= t);
        Ok(k.clamp(1, self.times.len() - 1) - 1)
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let k = self.locate(t)?;
        let h = self.times[k + 1] - self.times[k];
        let s = (t - self.times[k]) / h;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        Ok((2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1)
    }

    /// Exact integral of the interpolant.
    pub fn integral(&self, t0: f64, t1: f64) -> Result<f64> {
        if t1 < t0 {
            return self.integral(t1, t0).map(|v| -v);
        }
        let k0 = self.locate(t0)?;
        let k1 = self.locate(t1)?;
        let mut total = 0.0;
        for k in k0..=k1 {
            let a = if k == k0 { t0 } else { self.times[k] };
            let b = if k == k1 { t1 } else { self.times[k + 1] };
            total += self.segment_primitive(k, b) - self.segment_primitive(k, a);
        }
        Ok(total)
    }

    fn segment_primitive(&self, k: usize, t: f64) -> f64 {
        let h = self.times[k + 1] - self.times[k];
        let s = (t - self.times[k]) / h;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let s4 = s3 * s;
        h * ((0.5 * s4 - s3 + s) * y0
            + (0.25 * s4 - 2.0 * s3 / 3.0 + 0.5 * s2) * m0
            + (-0.5 * s4 + s3) * y1
            + (0.25 * s4 - s3 / 3.0) * m1)
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return d;
    }
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramps_and_integrals() {
        let f = FieldProtocol::LinearRamp { alpha: 2.0 };
        assert_eq!(f.eval(3.0).unwrap(), 6.0);
        assert_eq!(f.integral(-1.0, 2.0).unwrap(), 3.0);
        let h = FieldProtocol::HalfRamp { alpha: 2.0 };
        assert_eq!(h.eval(3.0).unwrap(), 3.0);
        let n = h.clone().negated();
        assert_eq!(n.eval(3.0).unwrap(), -3.0);
        assert_eq!(n.integral(0.0, 2.0).unwrap(), -2.0);
    }

    #[test]
    fn table_reproduces_linear_data_and_integrates_exactly() {
        let times: Vec<f64> = (0..11).map(|k| k as f64 * 0.5).collect();
        let values: Vec<f64> = times.iter().map(|t| 3.0 * t - 1.0).collect();
        let f = SampledField::new(times, values).unwrap();
        assert!((f.eval(1.3).unwrap() - 2.9).abs() < 1e-14);
        assert!((f.integral(0.2, 4.7).unwrap() - (1.5 * (4.7f64.powi(2) - 0.04) - 4.5)).abs() < 1e-12);
    }

    #[test]
    fn table_is_monotone_and_refuses_extrapolation() {
        let f = SampledField::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let mut prev = f.eval(0.0).unwrap();
        for k in 1..=300 {
            let v = f.eval(k as f64 * 0.01).unwrap();
            assert!(v >= prev - 1e-15 && v <= 1.0 + 1e-15);
            prev = v;
        }
        assert!(matches!(f.eval(3.5), Err(Error::FieldDomain { .. })));
        assert!(matches!(f.eval(-0.1), Err(Error::FieldDomain { .. })));
    }

    #[test]
    fn integral_matches_quadrature() {
        let f = FieldProtocol::random_smooth(11, -5.0, 5.0, 2.0);
        let n = 200_000;
        let h = 7.0 / n as f64;
        let simpson: f64 = (0..n)
            .map(|k| {
                let a = -3.0 + k as f64 * h;
                (f.eval(a).unwrap() + 4.0 * f.eval(a + h / 2.0).unwrap() + f.eval(a + h).unwrap()) * h / 6.0
            })
            .sum();
        assert!((f.integral(-3.0, 4.0).unwrap() - simpson).abs() < 1e-9);
    }

    #[test]
    fn random_field_is_reproducible() {
        let a = FieldProtocol::random_smooth(5, 0.0, 50.0, 1.0);
        let b = FieldProtocol::random_smooth(5, 0.0, 50.0, 1.0);
        let c = FieldProtocol::random_smooth(6, 0.0, 50.0, 1.0);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn serde_round_trip() {
        let f = FieldProtocol::Custom(SampledField::new(vec![0.0, 1.0, 2.0], vec![1.0, 3.0, 2.0]).unwrap())
            .negated();
        let text = serde_json::to_string(&f).unwrap();
        assert!(text.contains("\"kind\":\"custom\""), "{text}");
        let back: FieldProtocol = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);
        let bad = r#"{"kind":"custom","times":[0.0,0.0],"values":[1.0,2.0]}"#;
        assert!(serde_json::from_str::<FieldProtocol>(bad).is_err());
    }
}
