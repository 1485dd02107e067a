//! End-to-end construction runs: final-data ladders, decay fits, tail and
//! Cauchy diagnostics, sweeps.

use crate::ansatz::{Ansatz, Field, ModulatedParams, SolitonSpec};
use crate::error::{Error, Result};
use crate::evolver::{final_data_run, Evolver, Observer, SchemeConfig};
use crate::functionals::{assemble_hk, constrained_min_eig, localized_quantities, tail_mass, LocalizedReport, SpectrumReport};
use crate::geometry::{grid_cutoff, sigma0, velocity_frame, ExteriorGrid, Obstacle};
use crate::groundstate::{critical_exponent, solve_ground_state_default, GroundState};
use crate::io;
use crate::linalg::linear_fit;
use crate::modulation::{ModulationTrajectory, Modulator};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub l: f64,
    pub h: f64,
}

fn default_alpha0() -> f64 {
    1.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub p: f64,
    pub d: usize,
    #[serde(default)]
    pub obstacle: Option<Obstacle>,
    pub grid: GridConfig,
    pub cutoff_delta: f64,
    pub solitons: Vec<SolitonSpec>,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    #[serde(rename = "T_0")]
    pub t0: f64,
    #[serde(rename = "T_n")]
    pub ladder: Vec<f64>,
    /// defaults to `SchemeConfig::default_for(h)` with `1/dt` rounded up to an integer
    #[serde(default)]
    pub scheme: Option<SchemeConfig>,
    /// overrides the scheme's observer stride
    #[serde(default)]
    pub observer_stride: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_alpha0")]
    pub alpha_0: f64,
    /// extract modulation parameters along every run
    #[serde(default)]
    pub modulation: bool,
    /// tail radii M; defaults to 16 equally spaced values in [0, L)
    #[serde(default)]
    pub tail_radii: Vec<f64>,
    /// constrained λ_min of H_K at R(T_0)
    #[serde(default)]
    pub spectrum: bool,
    /// write every observer snapshot to the output directory
    #[serde(default)]
    pub save_snapshots: bool,
}

impl RunConfig {
    /// The configuration rotated into the velocity frame (2D only).
    pub fn in_velocity_frame(&self) -> Result<RunConfig> {
        if self.d != 2 {
            return Ok(self.clone());
        }
        let vs: Vec<Vec<f64>> = self.solitons.iter().map(|s| s.v.clone()).collect();
        let frame = velocity_frame(&vs)?;
        if frame.is_identity() {
            return Ok(self.clone());
        }
        let mut out = self.clone();
        for s in &mut out.solitons {
            s.v = frame.apply(&s.v);
            s.x0 = frame.apply(&s.x0);
        }
        out.obstacle = self.obstacle.as_ref().map(|o| match o {
            Obstacle::Disc2d { center, radius } => {
                let c = frame.apply(center);
                Obstacle::Disc2d { center: [c[0], c[1]], radius: *radius }
            }
            Obstacle::Ellipse2d { center, semi_axes, angle } => {
                let c = frame.apply(center);
                Obstacle::Ellipse2d { center: [c[0], c[1]], semi_axes: *semi_axes, angle: angle - frame.angle }
            }
            other => other.clone(),
        });
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let limit = critical_exponent(self.d);
        if !(self.p > 1.0 && self.p < limit) {
            return Err(Error::SubcriticalityViolated { p: self.p, d: self.d, limit });
        }
        if self.solitons.is_empty() {
            return Err(Error::ConfigRejected("no solitons".into()));
        }
        if self.ladder.is_empty() || self.ladder[0] <= self.t0 || self.ladder.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::ConfigRejected("T_n must be strictly increasing with T_1 > T_0".into()));
        }
        if !(self.t0 >= 0.0) || !(self.big_lambda > 0.0) || !(self.alpha_0 > 0.0) {
            return Err(Error::ConfigRejected("need T_0 ≥ 0, Λ > 0, α_0 > 0".into()));
        }
        let s0 = sigma0(&self.solitons)?;
        if self.solitons.len() >= 2 && s0.sqrt() * self.t0 < 2.0 * self.big_lambda * (1.0 - 1e-12) {
            return Err(Error::ConfigRejected(format!("√σ_0·T_0 = {} is below 2Λ = {}", s0.sqrt() * self.t0, 2.0 * self.big_lambda)));
        }
        if let Some(s) = &self.scheme {
            s.validate()?;
        }
        Ok(())
    }

    fn scheme_config(&self) -> SchemeConfig {
        let mut s = self.scheme.clone().unwrap_or_else(|| {
            let base = SchemeConfig::default_for(self.grid.h);
            SchemeConfig { dt: 1.0 / (1.0 / base.dt).ceil(), ..base }
        });
        if let Some(st) = self.observer_stride {
            s.stride = st;
        }
        s
    }

    fn radii(&self) -> Vec<f64> {
        if self.tail_radii.is_empty() {
            (0..16).map(|i| self.grid.l * i as f64 / 16.0).collect()
        } else {
            self.tail_radii.clone()
        }
    }

    /// SHA-256 of the canonical (key-sorted) JSON form.
    pub fn hash(&self) -> String {
        let v = serde_json::to_value(self).expect("config serializes");
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}

/// Grid, ground states, ansatz and evolver for a configuration.
pub struct Setup {
    pub cfg: RunConfig,
    pub ansatz: Ansatz,
    pub evolver: Evolver,
    pub sigma0: f64,
}

pub fn prepare(cfg: &RunConfig) -> Result<Setup> {
    cfg.validate()?;
    let cfg = cfg.in_velocity_frame()?;
    cfg.validate()?;
    let grid = Arc::new(ExteriorGrid::new(cfg.d, cfg.grid.l, cfg.grid.h, cfg.obstacle.clone())?);
    grid.check_resolution(&cfg.solitons)?;
    let psi = grid_cutoff(&grid, cfg.cutoff_delta)?;
    let mut cache: BTreeMap<u64, GroundState> = BTreeMap::new();
    let mut gss = Vec::with_capacity(cfg.solitons.len());
    for s in &cfg.solitons {
        let key = s.omega.to_bits();
        if !cache.contains_key(&key) {
            cache.insert(key, solve_ground_state_default(cfg.p, cfg.d, s.omega)?);
        }
        gss.push(cache[&key].clone());
    }
    let ansatz = Ansatz::new(grid.clone(), gss, cfg.solitons.clone(), psi)?;
    let evolver = Evolver::new(grid, cfg.p, cfg.scheme_config())?;
    let s0 = sigma0(&cfg.solitons)?;
    Ok(Setup { cfg, ansatz, evolver, sigma0: s0 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Least-squares line through `(t, log value)`: rate = -slope, prefactor = e^intercept.
pub fn fit_decay_rate(times: &[f64], values: &[f64]) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::InvalidInput("times and values differ in length".into()));
    }
    if values.len() < 5 {
        return Err(Error::DegenerateFit(format!("{} samples, need at least 5", values.len())));
    }
    if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput("decay fit needs positive finite values".into()));
    }
    if values.iter().all(|v| *v == values[0]) {
        return Err(Error::DegenerateFit("all values equal".into()));
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let (slope, intercept, r2) = linear_fit(times, &logs).ok_or_else(|| Error::DegenerateFit("all sample times equal".into()))?;
    Ok(DecayFit { rate: -slope, prefactor: intercept.exp(), r_squared: r2, samples: values.len() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub window: (f64, f64),
    /// zero or negative samples dropped from the window
    pub excluded: usize,
    pub fit: Option<DecayFit>,
    pub error: Option<String>,
    /// R² ≥ 0.9
    pub valid: bool,
}

/// Decay fit over `[a + 0.1(b-a), b - 0.1(b-a)]`, skipping non-positive values.
pub fn fit_window(series: &[(f64, f64)], a: f64, b: f64) -> WindowFit {
    let (lo, hi) = (a.min(b), a.max(b));
    let trim = 0.1 * (hi - lo);
    let (wlo, whi) = (lo + trim, hi - trim);
    let eps = 1e-9 * (hi - lo).max(1.0);
    let inside: Vec<(f64, f64)> = series.iter().copied().filter(|(t, _)| *t >= wlo - eps && *t <= whi + eps).collect();
    let kept: Vec<(f64, f64)> = inside.iter().copied().filter(|(_, v)| *v > 0.0).collect();
    let excluded = inside.len() - kept.len();
    let (ts, vs): (Vec<f64>, Vec<f64>) = kept.into_iter().unzip();
    match fit_decay_rate(&ts, &vs) {
        Ok(f) => WindowFit { window: (wlo, whi), excluded, valid: f.r_squared >= 0.9, fit: Some(f), error: None },
        Err(e) => WindowFit { window: (wlo, whi), excluded, fit: None, error: Some(e.to_string()), valid: false },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulationSummary {
    pub max_residual: f64,
    pub max_lipschitz: f64,
    /// smallest C₁ with every derivative combination ≤ C₁(‖h‖_{H¹} + e^{-σ_0 t})
    pub derivative_constant: [f64; 3],
    /// `|ω̃_k - ω_k| ≈ c₁‖h‖²_{H¹} + c₂ e^{-2σ_0 t}` least squares, with the largest
    /// excess of the data over the fitted bound
    pub frequency_fit: Option<(f64, f64, f64)>,
    /// decay fit of `‖h‖² + Σ|ω̃-ω| + |y|² + |μ̃-μ|²`
    pub parameter_control: WindowFit,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LadderEntry {
    pub t_n: f64,
    /// `(t, ‖u_n(t) - R(t)‖_{H¹})`, decreasing t
    pub errors: Vec<(f64, f64)>,
    pub decay: WindowFit,
    /// `max_t |M_k(T_n) - M_k(t)|` per soliton
    pub drift: Vec<f64>,
    pub max_drift: f64,
    pub mass_drift: f64,
    pub energy_drift: f64,
    /// times where `err·e^{σ_0 t}` exceeded α_0 after first falling below it
    pub bootstrap_violations: Vec<f64>,
    pub modulation: Option<ModulationSummary>,
    #[serde(skip)]
    pub localized: Vec<LocalizedReport>,
    #[serde(skip)]
    pub modulation_trajectory: Option<ModulationTrajectory>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CauchyMatrix {
    Empty,
    Pairwise {
        /// `‖u_n(T_0) - u_m(T_0)‖_{L²}`, upper triangle filled
        distances: Vec<Vec<f64>>,
        /// `d_n = ‖u_{n+1}(T_0) - u_n(T_0)‖`
        successive: Vec<f64>,
        decreasing: bool,
        fit: Option<DecayFit>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailTable {
    pub radii: Vec<f64>,
    /// `sup_n ∫_{|x| ≥ M} |u_n(T_0)|²`
    pub sup_tail: Vec<f64>,
    pub total_mass: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub config_hash: String,
    pub sigma0: f64,
    pub entries: Vec<LadderEntry>,
    pub cauchy: CauchyMatrix,
    pub tail: Option<TailTable>,
    pub lambda_min: Option<f64>,
    #[serde(skip)]
    pub final_fields: Vec<Field>,
}

impl ConstructionReport {
    pub fn min_rate(&self) -> Option<f64> {
        self.entries.iter().map(|e| e.decay.fit.as_ref().map(|f| f.rate)).try_fold(f64::INFINITY, |m, r| r.map(|r| m.min(r)))
    }

    pub fn max_drift(&self) -> f64 {
        self.entries.iter().map(|e| e.max_drift).fold(0.0, f64::max)
    }
}

fn annotate(tn: f64) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Ladder { .. } => e,
        other => Error::Ladder { tn, source: Box::new(other) },
    }
}

fn run_entry(setup: &Setup, t_n: f64, index: usize) -> Result<(LadderEntry, Field)> {
    let cfg = &setup.cfg;
    let p = cfg.p;
    let mut localized: Vec<LocalizedReport> = Vec::new();
    let mut modulator = cfg.modulation.then(|| Modulator::new(&setup.ansatz));
    let snap_dir = match (&cfg.output_dir, cfg.save_snapshots) {
        (Some(d), true) => {
            let dir = d.join(format!("snapshots_{index}"));
            fs::create_dir_all(&dir)?;
            Some(dir)
        }
        _ => None,
    };
    let mut counter = 0usize;
    let (run, mass_drift, energy_drift) = {
        let mut loc_obs = |u: &Field| -> Result<()> {
            localized.push(localized_quantities(u, &cfg.solitons, cfg.big_lambda, p)?);
            Ok(())
        };
        let mut mod_obs = |u: &Field| -> Result<()> {
            if let Some(m) = modulator.as_mut() {
                m.push(u)?;
            }
            Ok(())
        };
        let mut snap_obs = |u: &Field| -> Result<()> {
            if let Some(dir) = &snap_dir {
                io::write_snapshot(&dir.join(format!("snap_{counter:06}.nlsfld")), u, p)?;
                counter += 1;
            }
            Ok(())
        };
        let mut obs: [&mut Observer<'_>; 3] = [&mut loc_obs, &mut mod_obs, &mut snap_obs];
        let run = final_data_run(&setup.ansatz, &setup.evolver, t_n, cfg.t0, Some(cfg.big_lambda), false, &mut obs)?;
        let diags = &run.trajectory.diagnostics;
        let (m0, e0) = (diags[0].mass, diags[0].energy);
        let md = diags.iter().map(|d| (d.mass - m0).abs()).fold(0.0, f64::max) / m0;
        let ed = diags.iter().map(|d| (d.energy - e0).abs()).fold(0.0, f64::max) / e0.abs().max(f64::MIN_POSITIVE);
        (run, md, ed)
    };
    let k = cfg.solitons.len();
    let drift: Vec<f64> = (0..k)
        .map(|i| {
            let at_tn = localized[0].m[i];
            localized.iter().map(|r| (r.m[i] - at_tn).abs()).fold(0.0, f64::max)
        })
        .collect();
    let max_drift = drift.iter().copied().fold(0.0, f64::max);
    let decay = fit_window(&run.errors, cfg.t0, t_n);
    let mut violations = Vec::new();
    let mut below = false;
    for &(t, e) in &run.errors {
        let scaled = e * (setup.sigma0 * t).exp();
        if below && scaled > cfg.alpha_0 {
            violations.push(t);
        }
        below |= scaled < cfg.alpha_0;
    }
    let modulation_trajectory = modulator.map(|m| m.finish());
    let modulation = modulation_trajectory.as_ref().map(|tr| summarize_modulation(tr, setup, t_n));
    let last = run.trajectory.last().clone();
    let entry = LadderEntry {
        t_n,
        errors: run.errors,
        decay,
        drift,
        max_drift,
        mass_drift,
        energy_drift,
        bootstrap_violations: violations,
        modulation,
        localized,
        modulation_trajectory,
    };
    Ok((entry, last))
}

fn summarize_modulation(tr: &ModulationTrajectory, setup: &Setup, t_n: f64) -> ModulationSummary {
    let specs = &setup.cfg.solitons;
    let s0 = setup.sigma0;
    let max_residual = tr.states.iter().map(|s| s.residual_norm).fold(0.0, f64::max);
    let max_lipschitz = tr.states.iter().filter_map(|s| s.lipschitz_ratio).fold(0.0, f64::max);
    // frequency control
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for s in &tr.states {
        for (k, sp) in specs.iter().enumerate() {
            rows.push([s.h_h1 * s.h_h1, (-2.0 * s0 * s.t).exp()]);
            rhs.push((s.params.omega_tilde[k] - sp.omega).abs());
        }
    }
    let frequency_fit = (rows.len() >= 2)
        .then(|| {
            let a = DMatrix::from_fn(rows.len(), 2, |i, j| rows[i][j]);
            let b = DVector::from_vec(rhs.clone());
            let sol = a.clone().svd(true, true).solve(&b, 1e-14).ok()?;
            let fitted = &a * &sol;
            let excess = b.iter().zip(fitted.iter()).map(|(x, y)| x - y).fold(0.0, f64::max);
            Some((sol[0], sol[1], excess))
        })
        .flatten();
    let control: Vec<(f64, f64)> = tr
        .states
        .iter()
        .map(|s| {
            let mut q = s.h_h1 * s.h_h1;
            for (k, sp) in specs.iter().enumerate() {
                q += (s.params.omega_tilde[k] - sp.omega).abs();
                q += s.params.y[k].iter().map(|v| v * v).sum::<f64>();
                q += (s.params.mu_tilde[k] - sp.mu).powi(2);
            }
            (s.t, q)
        })
        .collect();
    ModulationSummary {
        max_residual,
        max_lipschitz,
        derivative_constant: tr.derivative_constant(s0),
        frequency_fit,
        parameter_control: fit_window(&control, setup.cfg.t0, t_n),
    }
}

/// `sup_n ∫_{|x| ≥ M} |u_n|²` for each M.
pub fn tail_mass_experiment(fields: &[Field], radii: &[f64]) -> Result<TailTable> {
    let mut sup_tail = Vec::with_capacity(radii.len());
    for &m in radii {
        let mut s = 0.0f64;
        for u in fields {
            s = s.max(tail_mass(u, m)?);
        }
        sup_tail.push(s);
    }
    let total_mass = fields.iter().map(|u| u.l2_norm().powi(2)).fold(0.0, f64::max);
    Ok(TailTable { radii: radii.to_vec(), sup_tail, total_mass })
}

/// Pairwise L² distances between ladder end states; `times` labels the
/// entries for the fit of the successive differences.
pub fn cauchy_check(fields: &[Field], times: &[f64]) -> CauchyMatrix {
    let n = fields.len();
    if n < 2 {
        return CauchyMatrix::Empty;
    }
    let mut distances = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            distances[i][j] = fields[i].sub(&fields[j]).l2_norm();
        }
    }
    let successive: Vec<f64> = (0..n - 1).map(|i| distances[i][i + 1]).collect();
    let decreasing = successive.windows(2).all(|w| w[1] < w[0]);
    let fit = fit_decay_rate(&times[..n - 1], &successive).ok();
    CauchyMatrix::Pairwise { distances, successive, decreasing, fit }
}

/// Constrained λ_min of H_K about the unmodulated ansatz at time t.
pub fn spectrum_at(setup: &Setup, t: f64) -> Result<SpectrumReport> {
    let params = ModulatedParams::unmodulated(&setup.cfg.solitons);
    let m = setup.ansatz.modulated(&params, t, true)?;
    let form = assemble_hk(&m, &setup.cfg.solitons, setup.cfg.big_lambda, t, setup.cfg.p)?;
    Ok(constrained_min_eig(&form)?.report())
}

pub fn run_construction(cfg: &RunConfig) -> Result<ConstructionReport> {
    let setup = prepare(cfg)?;
    run_with_setup(&setup)
}

pub fn run_with_setup(setup: &Setup) -> Result<ConstructionReport> {
    let cfg = &setup.cfg;
    if let Some(dir) = &cfg.output_dir {
        fs::create_dir_all(dir)?;
    }
    let results: Vec<Result<(LadderEntry, Field)>> =
        cfg.ladder.par_iter().enumerate().map(|(i, &tn)| run_entry(setup, tn, i).map_err(annotate(tn))).collect();
    let mut entries = Vec::with_capacity(results.len());
    let mut fields = Vec::with_capacity(results.len());
    for r in results {
        let (e, f) = r?;
        entries.push(e);
        fields.push(f);
    }
    let cauchy = cauchy_check(&fields, &cfg.ladder);
    let tail = Some(tail_mass_experiment(&fields, &cfg.radii())?);
    let lambda_min = if cfg.spectrum { Some(spectrum_at(setup, cfg.t0)?.lambda_min) } else { None };
    let report = ConstructionReport { config_hash: cfg.hash(), sigma0: setup.sigma0, entries, cauchy, tail, lambda_min, final_fields: fields };
    if let Some(dir) = &cfg.output_dir {
        write_run(dir, cfg, &report)?;
    }
    Ok(report)
}

fn write_run(dir: &Path, cfg: &RunConfig, report: &ConstructionReport) -> Result<()> {
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    for (i, e) in report.entries.iter().enumerate() {
        let errs: Vec<f64> = e.errors.iter().map(|x| x.1).collect();
        io::write_localized_csv(fs::File::create(dir.join(format!("localized_{i}.csv")))?, &e.localized, &errs)?;
        if let Some(tr) = &e.modulation_trajectory {
            io::write_modulation_csv(fs::File::create(dir.join(format!("modulation_{i}.csv")))?, tr)?;
        }
        io::write_snapshot(&dir.join(format!("u_{i}_T0.nlsfld")), &report.final_fields[i], cfg.p)?;
    }
    Ok(())
}

/// Modulation trajectory for the last ladder entry of a stored run, from its
/// saved snapshots when present, otherwise by re-running that entry.
pub fn modulate_run(dir: &Path) -> Result<ModulationTrajectory> {
    let cfg: RunConfig = serde_json::from_str(&fs::read_to_string(dir.join("config.json"))?)?;
    let setup = prepare(&RunConfig { output_dir: None, save_snapshots: false, modulation: true, ..cfg.clone() })?;
    let last = cfg.ladder.len() - 1;
    let snaps = dir.join(format!("snapshots_{last}"));
    if snaps.is_dir() {
        let mut files: Vec<PathBuf> =
            fs::read_dir(&snaps)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.extension().is_some_and(|x| x == "nlsfld")).collect();
        files.sort();
        let mut m = Modulator::new(&setup.ansatz);
        for f in files {
            let (u, _) = io::read_snapshot(&f)?;
            m.push(&u)?;
        }
        return Ok(m.finish());
    }
    let (entry, _) = run_entry(&setup, cfg.ladder[last], last).map_err(annotate(cfg.ladder[last]))?;
    Ok(entry.modulation_trajectory.expect("modulation enabled"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub config_hash: String,
    pub sigma0: Option<f64>,
    pub rate: Option<f64>,
    pub lambda_min: Option<f64>,
    pub max_drift: Option<f64>,
    pub error: Option<String>,
}

pub const SWEEP_HEADER: [&str; 6] = ["config_hash", "sigma0", "rate", "lambda_min", "max_drift", "error"];

/// Runs independent constructions on `parallelism` threads; rows sorted by
/// config hash.
pub fn sweep(cfgs: &[RunConfig], parallelism: usize) -> Result<(Vec<SweepRow>, String)> {
    let mut seen = BTreeMap::new();
    for c in cfgs {
        if let Some(d) = &c.output_dir {
            if seen.insert(d.clone(), ()).is_some() {
                return Err(Error::OutputCollision(d.display().to_string()));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut rows: Vec<SweepRow> = pool.install(|| {
        cfgs.par_iter()
            .map(|c| {
                let hash = c.hash();
                match run_construction(c) {
                    Ok(r) => SweepRow {
                        config_hash: hash,
                        sigma0: Some(r.sigma0),
                        rate: r.min_rate(),
                        lambda_min: r.lambda_min,
                        max_drift: Some(r.max_drift()),
                        error: None,
                    },
                    Err(e) => SweepRow { config_hash: hash, sigma0: None, rate: None, lambda_min: None, max_drift: None, error: Some(e.to_string()) },
                }
            })
            .collect()
    });
    rows.sort_by(|a, b| a.config_hash.cmp(&b.config_hash));
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    let opt = |x: Option<f64>| x.map(|v| format!("{v:?}")).unwrap_or_default();
    for r in &rows {
        w.write_record([r.config_hash.clone(), opt(r.sigma0), opt(r.rate), opt(r.lambda_min), opt(r.max_drift), r.error.clone().unwrap_or_default()])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok((rows, String::from_utf8(bytes).expect("csv is utf-8")))
}
