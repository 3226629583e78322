//! Scenario configuration read from TOML.
//!
//! Every section is optional; each command pulls what it needs and reports
//! missing or inconsistent entries by their dotted path.

use std::path::Path;

use serde::Deserialize;

use lmsz_core::analytic::stationary_states;
use lmsz_core::linalg::{basis_vector, c, CVec};
use lmsz_core::model::{
    embed, index_of, restrict, Decay, FieldProtocol, HamiltonianSpec, Picture, BASIS4, BASIS5,
};
use lmsz_core::noise::{NoiseSpec, NoiseTarget};
use lmsz_core::propagator::WindowSpec;
use lmsz_core::validation::ValidationConfig;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[default]
    StmSingleField,
    BothFieldsParallel,
    BothFieldsAntiparallel,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    /// Energies in units of `sqrt(alpha)`; alpha is 1.
    #[default]
    Dimensionless,
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Couplings {
    #[serde(default)]
    pub units: Units,
    pub alpha: Option<f64>,
    pub gamma_x: Option<f64>,
    pub gamma_y: Option<f64>,
    pub gamma_z: Option<f64>,
    pub beta_plus: Option<f64>,
    pub beta_minus: Option<f64>,
    /// Reference rate for `tau`; custom fields without a ramp default to 1.
    pub sweep_rate: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fields {
    pub omega1: FieldProtocol,
    pub omega2: FieldProtocol,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Label(String),
    Amplitudes { amplitudes: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(rename = "Gamma", alias = "gamma")]
    pub gamma: f64,
    #[serde(default = "default_dt_noise")]
    pub dt_noise: f64,
    #[serde(default)]
    pub target: NoiseTarget,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
}

fn default_dt_noise() -> f64 {
    0.01
}
fn default_realizations() -> usize {
    10_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curves {
    #[serde(rename = "4d")]
    FourD,
    #[serde(rename = "5d")]
    FiveD,
    #[default]
    Both,
}

impl Curves {
    pub fn four(self) -> bool {
        matches!(self, Curves::FourD | Curves::Both)
    }
    pub fn five(self) -> bool {
        matches!(self, Curves::FiveD | Curves::Both)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub beta_min: f64,
    pub beta_max: f64,
    pub points: usize,
    pub spacing: Spacing,
    /// Explicit grid; overrides min/max/points/spacing.
    pub betas: Option<Vec<f64>>,
    /// `beta_+ / beta_-` for the four-dimensional curves.
    pub ratio: f64,
    pub curves: Curves,
    /// Also propagate numerically (lmsz-probs only).
    pub numeric: bool,
    pub start_4d: String,
    pub start_5d: String,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            beta_min: 0.01,
            beta_max: 2.0,
            points: 200,
            spacing: Spacing::Log,
            betas: None,
            ratio: 2.0,
            curves: Curves::Both,
            numeric: false,
            start_4d: "|-10>".into(),
            start_5d: "|1-1>".into(),
        }
    }
}

impl SweepConfig {
    pub fn grid(&self) -> CliResult<Vec<f64>> {
        if let Some(b) = &self.betas {
            if b.is_empty() || b.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) || b.windows(2).any(|w| w[1] <= w[0]) {
                return Err(CliError::field("sweep.betas", "must be non-empty, finite, non-negative and increasing"));
            }
            return Ok(b.clone());
        }
        if self.points == 0 {
            return Err(CliError::field("sweep.points", "must be at least 1"));
        }
        if !(self.beta_min >= 0.0) || !(self.beta_max >= self.beta_min) || !self.beta_max.is_finite() {
            return Err(CliError::field("sweep.beta_min", "need 0 <= beta_min <= beta_max < inf"));
        }
        if self.points > 1 && self.beta_max == self.beta_min {
            return Err(CliError::field("sweep.points", "several points need beta_max > beta_min"));
        }
        let n = self.points;
        if n == 1 {
            return Ok(vec![self.beta_min]);
        }
        Ok(match self.spacing {
            Spacing::Linear => lmsz_core::entanglement::linear_grid(self.beta_min, self.beta_max, n),
            Spacing::Log => {
                if self.beta_min <= 0.0 {
                    return Err(CliError::field("sweep.beta_min", "log spacing needs beta_min > 0"));
                }
                let r = (self.beta_max / self.beta_min).ln();
                (0..n)
                    .map(|k| if k + 1 == n { self.beta_max } else { self.beta_min * (r * k as f64 / (n - 1) as f64).exp() })
                    .collect()
            }
        })
    }

    pub fn check_ratio(&self) -> CliResult<()> {
        if !(self.ratio > 0.0) || !self.ratio.is_finite() {
            return Err(CliError::field("sweep.ratio", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Propagate,
    /// Closed-form propagators, `minus4` and `plus5` pictures with linear sweeps.
    Exact,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    pub negativity: bool,
    pub method: Method,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub scenario: Scenario,
    pub seed: Option<u64>,
    pub format: Option<Format>,
    #[serde(default)]
    pub couplings: Couplings,
    pub fields: Option<Fields>,
    pub initial_state: Option<InitialState>,
    pub picture: Option<Picture>,
    pub window: Option<WindowSpec>,
    pub noise: Option<NoiseConfig>,
    pub decay: Option<Decay>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default)]
    pub validate: ValidationConfig,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
    }

    /// Sweep rate `alpha` in physical units (1 in dimensionless mode).
    pub fn alpha(&self) -> CliResult<f64> {
        let c = &self.couplings;
        match (c.units, c.alpha) {
            (Units::Dimensionless, None) => Ok(1.0),
            (Units::Dimensionless, Some(_)) => {
                Err(CliError::field("couplings.alpha", "only allowed with units = \"physical\""))
            }
            (Units::Physical, Some(a)) if a > 0.0 && a.is_finite() => Ok(a),
            (Units::Physical, Some(a)) => Err(CliError::field("couplings.alpha", format!("must be positive, got {a}"))),
            (Units::Physical, None) if self.scenario == Scenario::Custom => Ok(c.sweep_rate.unwrap_or(1.0)),
            (Units::Physical, None) => Err(CliError::field("couplings.alpha", "required with units = \"physical\"")),
        }
    }

    /// `(gamma_x, gamma_y, gamma_z)` in physical units.
    pub fn gammas(&self) -> CliResult<(f64, f64, f64)> {
        let c = &self.couplings;
        let alpha = self.alpha()?;
        // With alpha = 1, couplings in units of sqrt(alpha) are already physical.
        let gz = c.gamma_z.unwrap_or(0.0);
        let (gx, gy) = match (c.beta_plus, c.beta_minus, c.gamma_x, c.gamma_y) {
            (Some(bp), Some(bm), None, None) => {
                for (name, b) in [("couplings.beta_plus", bp), ("couplings.beta_minus", bm)] {
                    if !(b >= 0.0) || !b.is_finite() {
                        return Err(CliError::field(name, format!("must be non-negative, got {b}")));
                    }
                }
                let gp = (bp * alpha).sqrt();
                let gm = (bm * alpha).sqrt();
                (0.5 * (gp + gm), 0.5 * (gp - gm))
            }
            (None, None, Some(x), Some(y)) => (x, y),
            (Some(_), None, _, _) | (None, Some(_), _, _) => {
                return Err(CliError::field("couplings", "beta_plus and beta_minus must be given together"))
            }
            (Some(_), Some(_), _, _) => {
                return Err(CliError::field("couplings", "give either beta_plus/beta_minus or gamma_x/gamma_y, not both"))
            }
            _ => return Err(CliError::field("couplings", "need gamma_x and gamma_y, or beta_plus and beta_minus")),
        };
        for (name, v) in [("couplings.gamma_x", gx), ("couplings.gamma_y", gy), ("couplings.gamma_z", gz)] {
            if !v.is_finite() {
                return Err(CliError::field(name, "must be finite"));
            }
        }
        Ok((gx, gy, gz))
    }

    pub fn spec(&self) -> CliResult<HamiltonianSpec> {
        let (gx, gy, gz) = self.gammas()?;
        let alpha = self.alpha()?;
        let mut spec = match (self.scenario, &self.fields) {
            (Scenario::Custom, Some(f)) => {
                let mut s = HamiltonianSpec::new(gx, gy, gz, f.omega1.clone(), f.omega2.clone());
                s.sweep_rate = self.couplings.sweep_rate;
                s
            }
            (Scenario::Custom, None) => return Err(CliError::field("fields", "required for scenario = \"custom\"")),
            (_, Some(_)) => return Err(CliError::field("fields", "only allowed for scenario = \"custom\"")),
            (Scenario::StmSingleField, None) => HamiltonianSpec::stm_single_field(alpha, gx, gy, gz),
            (Scenario::BothFieldsParallel, None) => HamiltonianSpec::both_fields_parallel(alpha, gx, gy, gz),
            (Scenario::BothFieldsAntiparallel, None) => HamiltonianSpec::both_fields_antiparallel(alpha, gx, gy, gz),
        };
        if self.scenario != Scenario::Custom && self.couplings.sweep_rate.is_some() {
            return Err(CliError::field("couplings.sweep_rate", "only allowed for scenario = \"custom\""));
        }
        if let Some(d) = self.decay {
            spec.decay = Some(d);
        }
        spec.validate().map_err(|e| CliError::field("couplings", e))?;
        Ok(spec)
    }

    pub fn noise_spec(&self, seed: u64) -> CliResult<(NoiseSpec, usize)> {
        let n = self.noise.as_ref().ok_or_else(|| CliError::field("noise", "section required"))?;
        let spec = NoiseSpec { gamma: n.gamma, seed, dt_noise: n.dt_noise, target: n.target };
        if !(n.gamma >= 0.0) || !n.gamma.is_finite() {
            return Err(CliError::field("noise.Gamma", format!("must be non-negative, got {}", n.gamma)));
        }
        if !(n.dt_noise > 0.0) || !n.dt_noise.is_finite() {
            return Err(CliError::field("noise.dt_noise", format!("must be positive, got {}", n.dt_noise)));
        }
        if n.realizations == 0 {
            return Err(CliError::field("noise.realizations", "must be at least 1"));
        }
        Ok((spec, n.realizations))
    }

    pub fn window_or(&self, half: f64, samples: usize) -> CliResult<WindowSpec> {
        let w = self.window.clone().unwrap_or_else(|| WindowSpec::symmetric(half).with_samples(samples));
        w.validate().map_err(|e| CliError::field("window", e))?;
        Ok(w)
    }

    /// Initial state and the picture it is propagated in.
    pub fn initial(&self, spec: &HamiltonianSpec) -> CliResult<(Picture, CVec)> {
        let init = self.initial_state.as_ref().ok_or_else(|| CliError::field("initial_state", "required"))?;
        let (full, explicit) = match init {
            InitialState::Label(label) => match parse_qubit_label(label) {
                Some(v) => {
                    let p = self.picture.filter(|p| matches!(p, Picture::Qubit1 | Picture::Qubit2)).ok_or_else(|| {
                        CliError::field("picture", format!("label '{label}' needs picture = \"qubit1\" or \"qubit2\""))
                    })?;
                    return Ok((p, v));
                }
                None => (label_state(label, spec)?, None),
            },
            InitialState::Amplitudes { amplitudes } => {
                let v = CVec::from_iterator(amplitudes.len(), amplitudes.iter().map(|[r, i]| c(*r, *i)));
                let n2 = v.norm_squared();
                if (n2 - 1.0).abs() > 1e-10 {
                    return Err(CliError::field("initial_state.amplitudes", format!("not normalized (norm^2 = {n2})")));
                }
                let picture = match self.picture {
                    Some(p) => p,
                    None if v.len() == 2 => {
                        return Err(CliError::field("picture", "two amplitudes need picture = \"qubit1\" or \"qubit2\""))
                    }
                    None => Picture::for_dimension(v.len()).map_err(|e| CliError::field("initial_state.amplitudes", e))?,
                };
                if v.len() == picture.dimension() {
                    return Ok((picture, v));
                }
                if v.len() != 9 {
                    return Err(CliError::field(
                        "initial_state.amplitudes",
                        format!("{} amplitudes do not fit picture {picture:?}", v.len()),
                    ));
                }
                (v, Some(picture))
            }
        };
        let picture = match explicit.or(self.picture) {
            Some(p) => p,
            None => smallest_picture(&full),
        };
        let Some(idx) = picture.product_indices() else {
            return Err(CliError::field("picture", "qubit pictures need amplitudes or an up/down label"));
        };
        let v = restrict(&full, idx);
        let lost = (full.norm_squared() - v.norm_squared()).abs();
        if lost > 1e-12 {
            return Err(CliError::field("initial_state", format!("leaves picture {picture:?} (weight {lost:e} outside)")));
        }
        Ok((picture, v))
    }
}

fn smallest_picture(full: &CVec) -> Picture {
    let inside = |idx: &[usize]| (0..9).all(|k| idx.contains(&k) || full[k].norm() == 0.0);
    if inside(&BASIS4) {
        Picture::Minus4
    } else if inside(&BASIS5) {
        Picture::Plus5
    } else {
        Picture::Full9
    }
}

fn parse_qubit_label(label: &str) -> Option<CVec> {
    match label.trim() {
        "up" => Some(basis_vector(2, 0)),
        "down" => Some(basis_vector(2, 1)),
        _ => None,
    }
}

/// `|m1m2>` kets such as `|-10>` or `|1-1>`, and the stationary states `psi1`..`psi7`.
pub fn label_state(label: &str, spec: &HamiltonianSpec) -> CliResult<CVec> {
    let l = label.trim();
    if let Some(k) = l.strip_prefix("psi").and_then(|n| n.parse::<usize>().ok()) {
        if !(1..=7).contains(&k) {
            return Err(CliError::field("initial_state", format!("stationary states are psi1..psi7, got '{l}'")));
        }
        let (states, _) = stationary_states(spec).map_err(|e| CliError::field("initial_state", e))?;
        return Ok(states[k + 1].clone());
    }
    let k = parse_ket(l).ok_or_else(|| {
        CliError::field("initial_state", format!("unknown label '{l}' (expected e.g. \"|-10>\", \"psi1\", \"up\")"))
    })?;
    Ok(basis_vector(9, k))
}

/// Product index of a ket label.
pub fn parse_ket(label: &str) -> Option<usize> {
    let inner = label.trim().strip_prefix('|')?.strip_suffix('>')?;
    let mut ms = Vec::new();
    let mut chars = inner.chars().peekable();
    while let Some(ch) = chars.next() {
        let m = match ch {
            '-' => -(chars.next()?.to_digit(10)? as i32),
            '+' => chars.next()?.to_digit(10)? as i32,
            d => d.to_digit(10)? as i32,
        };
        ms.push(m);
    }
    match ms[..] {
        [m1, m2] => index_of(m1, m2).ok(),
        _ => None,
    }
}

/// Embeds a picture state into the nine-dimensional space.
pub fn to_full(picture: Picture, v: &CVec) -> Option<CVec> {
    picture.product_indices().map(|idx| embed(v, idx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ket_labels_round_trip() {
        for k in 0..9 {
            assert_eq!(parse_ket(&lmsz_core::model::ket_label(k)), Some(k));
        }
        assert_eq!(parse_ket("|+1-1>"), index_of(1, -1).ok());
        assert_eq!(parse_ket("|2 0>"), None);
        assert_eq!(parse_ket("-10"), None);
    }

    #[test]
    fn betas_map_to_gammas() {
        let cfg = ScenarioConfig::parse("[couplings]\nbeta_plus = 0.5\nbeta_minus = 0.125\n").unwrap();
        let (gx, gy, _) = cfg.gammas().unwrap();
        assert!(((gx + gy).powi(2) - 0.5).abs() < 1e-14);
        assert!(((gx - gy).powi(2) - 0.125).abs() < 1e-14);
    }

    #[test]
    fn unknown_field_is_named() {
        let err = ScenarioConfig::parse("[couplings]\ngamma_q = 1.0\n").unwrap_err().to_string();
        assert!(err.contains("gamma_q") && err.contains("line 2"), "{err}");
    }

    #[test]
    fn log_grid_hits_both_ends() {
        let g = SweepConfig::default().grid().unwrap();
        assert_eq!(g.len(), 200);
        assert_eq!((g[0], g[199]), (0.01, 2.0));
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn initial_picture_is_the_smallest_block() {
        let mut cfg = ScenarioConfig::parse("initial_state = \"|-10>\"\n[couplings]\ngamma_x = 0.1\ngamma_y = 0.1\n").unwrap();
        let spec = cfg.spec().unwrap();
        assert_eq!(cfg.initial(&spec).unwrap().0, Picture::Minus4);
        cfg.initial_state = Some(InitialState::Label("|00>".into()));
        assert_eq!(cfg.initial(&spec).unwrap().0, Picture::Plus5);
        cfg.picture = Some(Picture::Minus4);
        assert!(cfg.initial(&spec).is_err());
    }
}
