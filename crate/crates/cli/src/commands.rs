use rayon::prelude::*;
use serde_json::{json, Value};

use lmsz_core::analytic::{
    exact_u_minus_for_spec, exact_u_plus_for_spec, lz_probability, noisy_qubit_probability,
    noisy_spin1_probabilities, spin1_table_from, table_4d_from, TransitionTable,
};
use lmsz_core::entanglement::{negativity_pure, negativity_sweep_3d_on, negativity_sweep_4d_on, SweepResult};
use lmsz_core::linalg::{basis_vector, CVec};
use lmsz_core::model::{ket_label, HamiltonianSpec, Picture, BASIS4, CORE3};
use lmsz_core::noise::ensemble_average;
use lmsz_core::propagator::{asymptotic_populations, AsymptoticOptions, Evolver, WindowSpec};
use lmsz_core::validation::{run_battery, ValidationReport};

use crate::config::{parse_ket, to_full, Method, Scenario, ScenarioConfig};
use crate::error::{CliError, CliResult};
use crate::output::{Artifact, Cell, Table};

const PROB: &str = "probability";
const DIMLESS: &str = "1";

fn state_labels(picture: Picture) -> Vec<String> {
    match picture.product_indices() {
        Some(idx) => idx.iter().map(|&k| ket_label(k)).collect(),
        None => vec!["up".into(), "down".into()],
    }
}

fn block_start(label: &str, block: &[usize], path: &str) -> CliResult<usize> {
    parse_ket(label)
        .filter(|k| block.contains(k))
        .ok_or_else(|| CliError::field(path, format!("'{label}' is not a state of this block")))
}

fn stm_spec(alpha: f64, gamma_plus: f64, gamma_minus: f64) -> HamiltonianSpec {
    HamiltonianSpec::stm_single_field(alpha, 0.5 * (gamma_plus + gamma_minus), 0.5 * (gamma_plus - gamma_minus), 0.0)
}

/// Analytic (and optionally numeric) asymptotic probabilities over a beta grid.
pub fn lmsz_probs(cfg: &ScenarioConfig) -> CliResult<Artifact> {
    let sweep = &cfg.sweep;
    sweep.check_ratio()?;
    let grid = sweep.grid()?;
    if sweep.numeric && cfg.scenario != Scenario::StmSingleField {
        return Err(CliError::field("sweep.numeric", "numeric asymptotics need scenario = \"stm_single_field\""));
    }
    let alpha = cfg.alpha()?;
    let opts = AsymptoticOptions::default();
    let mut tables = Vec::new();

    if sweep.curves.four() {
        let start = block_start(&sweep.start_4d, &BASIS4, "sweep.start_4d")?;
        let labels: Vec<String> = BASIS4.iter().map(|&k| ket_label(k)).collect();
        let mut t = Table::new(&[("beta_plus", DIMLESS), ("beta_minus", DIMLESS)]);
        for l in &labels {
            t.column(format!("P{l}"), PROB);
        }
        if sweep.numeric {
            for l in &labels {
                t.column(format!("P{l}_numeric"), PROB);
            }
        }
        let rows: Vec<Vec<Cell>> = grid
            .par_iter()
            .map(|&bp| -> CliResult<Vec<Cell>> {
                let bm = bp / sweep.ratio;
                let table = table_4d_from(start, lz_probability(bm), lz_probability(bp))?;
                let mut row: Vec<Cell> = vec![bp.into(), bm.into()];
                row.extend(table.probabilities().into_iter().map(Cell::from));
                if sweep.numeric {
                    let spec = stm_spec(alpha, (bp * alpha).sqrt(), (bm * alpha).sqrt());
                    let psi0 = basis_vector(4, BASIS4.iter().position(|&k| k == start).unwrap());
                    let p = asymptotic_populations(&spec, Picture::Minus4, &psi0, &opts)?.populations;
                    row.extend(p.into_iter().map(Cell::from));
                }
                Ok(row)
            })
            .collect::<CliResult<_>>()?;
        t.rows = rows;
        tables.push(("4d", t, ket_label(start)));
    }

    if sweep.curves.five() {
        let start = block_start(&sweep.start_5d, &CORE3, "sweep.start_5d")?;
        let labels: Vec<String> = CORE3.iter().map(|&k| ket_label(k)).collect();
        let mut t = Table::new(&[("beta_prime", DIMLESS)]);
        for l in &labels {
            t.column(format!("P{l}"), PROB);
        }
        if sweep.numeric {
            for l in &labels {
                t.column(format!("P{l}_numeric"), PROB);
            }
        }
        let rows: Vec<Vec<Cell>> = grid
            .par_iter()
            .map(|&bq| -> CliResult<Vec<Cell>> {
                let table = spin1_table_from(start, lz_probability(bq))?;
                let mut row: Vec<Cell> = vec![bq.into()];
                row.extend(table.probabilities().into_iter().map(Cell::from));
                if sweep.numeric {
                    // beta' = 2 gamma^2 / alpha with gamma = gamma_x + gamma_y.
                    let gamma = (0.5 * bq * alpha).sqrt();
                    let spec = HamiltonianSpec::stm_single_field(alpha, 0.5 * gamma, 0.5 * gamma, 0.0);
                    let psi0 = basis_vector(3, CORE3.iter().position(|&k| k == start).unwrap());
                    let p = asymptotic_populations(&spec, Picture::Core3, &psi0, &opts)?.populations;
                    row.extend(p.into_iter().map(Cell::from));
                }
                Ok(row)
            })
            .collect::<CliResult<_>>()?;
        t.rows = rows;
        tables.push(("5d", t, ket_label(start)));
    }

    let mut iter = tables.into_iter();
    let (name, first, start) = iter.next().expect("curves select at least one table");
    let mut art = Artifact::new("lmsz-probs", first);
    art.note("primary", name);
    art.note(&format!("start_{name}"), start);
    for (name, t, start) in iter {
        art.note(&format!("start_{name}"), start);
        art.extra.push((name, t));
    }
    art.note("ratio", sweep.ratio);
    art.note("points", grid.len());
    art.note("numeric", sweep.numeric);
    Ok(art)
}

/// Time series of populations, norm, `<K>` and optionally negativity.
pub fn evolve(cfg: &ScenarioConfig) -> CliResult<Artifact> {
    let spec = cfg.spec()?;
    let (picture, psi0) = cfg.initial(&spec)?;
    let window = cfg.window_or(50.0, 501)?;
    let negativity = cfg.evolve.negativity;
    if negativity && picture.product_indices().is_none() {
        return Err(CliError::field("evolve.negativity", "needs a qutrit picture"));
    }
    let (taus, states, parity) = match cfg.evolve.method {
        Method::Propagate => {
            let mut ev = Evolver::new(&spec, picture)?;
            if spec.decay.is_some() {
                ev = ev.with_decay()?;
            }
            let res = ev.propagate(&psi0, &window, None)?;
            (res.taus, res.states, res.parity)
        }
        Method::Exact => {
            if spec.decay.is_some() {
                return Err(CliError::field("evolve.method", "closed forms do not include decay"));
            }
            let taus = window.sample_taus();
            let states = taus
                .par_iter()
                .map(|&tau| -> CliResult<CVec> {
                    let u = match picture {
                        Picture::Minus4 => exact_u_minus_for_spec(&spec, tau, window.tau_i)?,
                        Picture::Plus5 => exact_u_plus_for_spec(&spec, tau, window.tau_i)?,
                        _ => return Err(CliError::field("evolve.method", "exact needs picture minus4 or plus5")),
                    };
                    Ok(u * &psi0)
                })
                .collect::<CliResult<Vec<_>>>()?;
            (taus, states, None)
        }
    };

    let sqrt_alpha = spec.reference_alpha().sqrt();
    let mut t = Table::new(&[("tau", DIMLESS), ("t", "hbar/E0")]);
    for l in state_labels(picture) {
        t.column(format!("P{l}"), PROB);
    }
    t.column("norm", DIMLESS);
    if parity.is_some() {
        t.column("K", DIMLESS);
    }
    if negativity {
        t.column("negativity", DIMLESS);
    }
    for (k, (tau, psi)) in taus.iter().zip(&states).enumerate() {
        let mut row: Vec<Cell> = vec![(*tau).into(), (tau / sqrt_alpha).into()];
        row.extend(psi.iter().map(|z| Cell::from(z.norm_sqr())));
        let norm = psi.norm();
        row.push(norm.into());
        if let Some(p) = &parity {
            row.push(p[k].into());
        }
        if negativity {
            let full = to_full(picture, psi).expect("qutrit picture");
            let n = if norm > 0.0 { negativity_pure(&(full / lmsz_core::linalg::re(norm)))?.value } else { 0.0 };
            row.push(n.into());
        }
        t.push(row);
    }
    let mut art = Artifact::new("evolve", t);
    art.note("picture", picture);
    art.note("method", format!("{:?}", cfg.evolve.method).to_lowercase());
    art.note("sweep_rate", spec.reference_alpha());
    art.note("window", json!([window.tau_i, window.tau_f]));
    Ok(art)
}

fn sweep_rows(s: &SweepResult, name: &str, maxima: &mut Table) {
    for m in &s.maxima {
        maxima.push(vec![name.into(), m.beta.into(), m.value.into()]);
    }
}

/// Asymptotic negativity over a beta grid with refined maxima.
pub fn negativity_sweep(cfg: &ScenarioConfig) -> CliResult<Artifact> {
    let sweep = &cfg.sweep;
    if sweep.numeric {
        return Err(CliError::field("sweep.numeric", "negativity-sweep uses the asymptotic closed forms only"));
    }
    sweep.check_ratio()?;
    let grid = sweep.grid()?;
    let s4 = sweep.curves.four().then(|| negativity_sweep_4d_on(sweep.ratio, &grid)).transpose()?;
    let s3 = sweep.curves.five().then(|| negativity_sweep_3d_on(&grid)).transpose()?;

    let mut t = Table::new(&[("beta", DIMLESS)]);
    if s4.is_some() {
        t.column("N_4d", DIMLESS);
    }
    if s3.is_some() {
        t.column("N_3d", DIMLESS);
    }
    for (k, b) in grid.iter().enumerate() {
        let mut row = vec![Cell::from(*b)];
        row.extend(s4.iter().map(|s| Cell::from(s.values[k])));
        row.extend(s3.iter().map(|s| Cell::from(s.values[k])));
        t.push(row);
    }
    let mut maxima = Table::new(&[("curve", "label"), ("beta", DIMLESS), ("negativity", DIMLESS)]);
    if let Some(s) = &s4 {
        sweep_rows(s, "4d", &mut maxima);
    }
    if let Some(s) = &s3 {
        sweep_rows(s, "3d", &mut maxima);
    }
    let mut art = Artifact::new("negativity-sweep", t);
    art.note("ratio", sweep.ratio);
    art.note("beta_axis", "beta_+ (4d, beta_- = beta_+/ratio) and the core parameter beta' (3d)");
    art.extra.push(("maxima", maxima));
    Ok(art)
}

/// Large-Gamma targets for a product basis start, keyed by picture index.
fn analytic_targets(spec: &HamiltonianSpec, picture: Picture, psi0: &CVec) -> CliResult<Option<(Vec<f64>, &'static str)>> {
    let Some(start) = psi0.iter().position(|z| (z.norm_sqr() - 1.0).abs() < 1e-12) else {
        return Ok(None);
    };
    let alpha = spec.reference_alpha();
    let Some(idx) = picture.product_indices() else {
        let g = if picture == Picture::Qubit1 { spec.gamma_minus() } else { spec.gamma_plus() };
        let p = noisy_qubit_probability(g.abs(), alpha)?;
        let v = if start == 0 { vec![1.0 - p, p] } else { vec![p, 1.0 - p] };
        return Ok(Some((v, "large_gamma_qubit")));
    };
    let k = idx[start];
    let (probs, kind): (Vec<(usize, f64)>, _) = if BASIS4.contains(&k) {
        let p1 = noisy_qubit_probability(spec.gamma_minus().abs(), alpha)?;
        let p2 = noisy_qubit_probability(spec.gamma_plus().abs(), alpha)?;
        (pairs(&table_4d_from(k, p1, p2)?), "large_gamma_qubit_product")
    } else if k == CORE3[0] || k == CORE3[2] {
        if (spec.gamma_x - spec.gamma_y).abs() > 1e-12 || spec.gamma_z != 0.0 {
            return Ok(None);
        }
        let g = spec.gamma_plus();
        let mut p = pairs(&noisy_spin1_probabilities(2.0 * g * g / alpha)?);
        if k == CORE3[2] {
            // The nominal triple starts from |1-1>; |-11> is its mirror image.
            for (kk, _) in &mut p {
                *kk = CORE3[0] + CORE3[2] - *kk;
            }
        }
        (p, "large_gamma_spin1")
    } else {
        return Ok(None);
    };
    let v = idx.iter().map(|kk| probs.iter().find(|(j, _)| j == kk).map_or(0.0, |(_, p)| *p)).collect();
    Ok(Some((v, kind)))
}

fn pairs(t: &TransitionTable) -> Vec<(usize, f64)> {
    t.entries.iter().map(|e| (parse_ket(&e.state).expect("table labels are kets"), e.probability)).collect()
}

/// Monte Carlo ensemble with standard errors, targets and z-scores.
pub fn noise(cfg: &ScenarioConfig, seed: u64) -> CliResult<Artifact> {
    let mut spec = cfg.spec()?;
    if spec.decay.is_some() {
        return Err(CliError::field("decay", "noise ensembles are Hermitian only"));
    }
    let (noise, n) = cfg.noise_spec(seed)?;
    let gamma = noise.gamma;
    spec.noise = Some(noise);
    let (picture, psi0) = cfg.initial(&spec)?;
    let window = cfg.window_or(200.0, 2)?;
    let ens = ensemble_average(&spec, picture, &psi0, &window, n)?;

    let (targets, kind) = if gamma == 0.0 {
        let quiet = HamiltonianSpec { noise: None, ..spec.clone() };
        let w = WindowSpec { samples: 2, ..window.clone() };
        let res = Evolver::new(&quiet, picture)?.propagate(&psi0, &w, None)?;
        (Some(res.final_populations().to_vec()), "noiseless_propagation")
    } else {
        match analytic_targets(&spec, picture, &psi0)? {
            Some((v, k)) => (Some(v), k),
            None => (None, "none"),
        }
    };

    let mut t = Table::new(&[
        ("state", "label"),
        ("mean", PROB),
        ("std_error", PROB),
        ("target", PROB),
        ("z", "standard errors"),
    ]);
    let mut max_z: f64 = 0.0;
    for (k, label) in state_labels(picture).into_iter().enumerate() {
        let (m, se) = (ens.mean_populations[k], ens.std_errors[k]);
        let target = targets.as_ref().map_or(f64::NAN, |v| v[k]);
        let z = if se > 0.0 { (m - target) / se } else { f64::NAN };
        if z.is_finite() {
            max_z = max_z.max(z.abs());
        }
        t.push(vec![label.into(), m.into(), se.into(), target.into(), z.into()]);
    }
    let mut art = Artifact::new("noise", t);
    art.note("picture", picture);
    art.note("Gamma", gamma);
    art.note("realizations", n);
    art.note("seed", seed);
    art.note("target", kind);
    if targets.is_some() && gamma > 0.0 {
        art.note("max_abs_z", max_z);
    }
    if let (Some(v), true) = (&targets, gamma == 0.0) {
        let dev = v.iter().zip(&ens.mean_populations).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        art.note("max_abs_deviation", dev);
    }
    Ok(art)
}

/// The validation battery; check timings move to the sidecar.
pub fn validate(cfg: &ScenarioConfig, seed: u64) -> CliResult<(Artifact, ValidationReport)> {
    let mut vc = cfg.validate.clone();
    vc.seed = seed;
    let mut report = run_battery(&vc);
    let mut timings = serde_json::Map::new();
    for c in &mut report.checks {
        timings.insert(c.id.clone(), json!(c.elapsed_s));
        c.elapsed_s = 0.0;
    }
    let mut t = Table::new(&[
        ("id", "label"),
        ("name", "label"),
        ("kind", "label"),
        ("passed", "bool"),
        ("metric", DIMLESS),
        ("tolerance", DIMLESS),
        ("detail", "text"),
    ]);
    for c in &report.checks {
        let kind = serde_json::to_value(c.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        t.push(vec![
            c.id.clone().into(),
            c.name.clone().into(),
            kind.into(),
            c.passed.into(),
            c.metric.into(),
            c.tolerance.into(),
            c.detail.clone().into(),
        ]);
    }
    let mut art = Artifact::new("validate", t);
    art.json = Some(serde_json::to_value(&report).expect("report serializes"));
    art.meta.insert("check_elapsed_s".into(), Value::Object(timings));
    art.note("seed", seed);
    art.note("all_passed", report.all_passed);
    Ok((art, report))
}
