//! Conservative Crank–Nicolson time stepping on the masked exterior grid.
//!
//! One step from `u` to `w` solves
//!
//! ```text
//! i (w - u)/dt + Δ_h (w + u)/2 + g(u, w) (w + u)/2 = 0,
//! g = (G(|w|²) - G(|u|²)) / (|w|² - |u|²),   G(s) = 2 s^{(p+1)/2} / (p + 1),
//! ```
//!
//! by fixed-point iteration on the real coefficient `g`. Every iterate is a
//! Cayley transform of a real symmetric operator, so the discrete mass is
//! conserved up to the linear solve; the converged step also conserves the
//! discrete energy and is symmetric under `(u, w, dt) ↦ (w, u, -dt)`.

use crate::ansatz::{Ansatz, Field};
use crate::error::{Error, Result};
use crate::functionals::{energy, h1_norm, mass};
use crate::geometry::{check_box_adequacy, ExteriorGrid};
use crate::linalg::{cocg, norm_c, solve_tridiagonal};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemeConfig {
    pub dt: f64,
    /// relative fixed-point tolerance
    pub tol: f64,
    pub max_inner: usize,
    /// time between stored snapshots and observer calls
    pub stride: f64,
    /// width of the monitored band inside the box boundary
    pub band_width: f64,
    /// allowed band mass as a fraction of the total
    pub contamination: f64,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self { dt: 1e-3, tol: 1e-12, max_inner: 60, stride: 0.1, band_width: 1.0, contamination: 1e-6 }
    }
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidInput(format!("dt = {} must be positive", self.dt)));
        }
        if !(1e-14..=1e-6).contains(&self.tol) {
            return Err(Error::InvalidInput(format!("inner tolerance {} outside [1e-14, 1e-6]", self.tol)));
        }
        if self.max_inner == 0 || !(self.stride > 0.0) {
            return Err(Error::InvalidInput("max_inner and stride must be positive".into()));
        }
        Ok(())
    }

    /// `dt = h²/2`.
    pub fn default_for(h: f64) -> Self {
        Self { dt: 0.5 * h * h, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    /// mass inside the band next to the box boundary
    pub band_mass: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<Field>,
    /// one entry per accepted step, plus the initial state
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn last(&self) -> &Field {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }
}

/// Callback sampled at each snapshot time.
pub type Observer<'a> = dyn FnMut(&Field) -> Result<()> + 'a;

/// Time stepper bound to one grid and exponent.
#[derive(Clone, Debug)]
pub struct Evolver {
    pub grid: Arc<ExteriorGrid>,
    pub p: f64,
    pub cfg: SchemeConfig,
    in_band: Vec<bool>,
}

impl Evolver {
    pub fn new(grid: Arc<ExteriorGrid>, p: f64, cfg: SchemeConfig) -> Result<Self> {
        cfg.validate()?;
        if !(p > 1.0) {
            return Err(Error::InvalidInput(format!("exponent p = {p} must exceed 1")));
        }
        let in_band = (0..grid.n_nodes())
            .map(|idx| grid.distance_to_box(&grid.coords(idx)) <= cfg.band_width)
            .collect();
        Ok(Self { grid, p, cfg, in_band })
    }

    /// `Δ_h u` on active nodes (zero elsewhere); masked values are zero.
    pub fn laplacian(&self, u: &[Complex64], out: &mut [Complex64]) {
        let g = &self.grid;
        let inv_h2 = 1.0 / (g.h * g.h);
        for idx in 0..g.n_nodes() {
            if !g.is_active(idx) {
                out[idx] = ZERO;
                continue;
            }
            let mut acc = -2.0 * g.d as f64 * u[idx];
            for axis in 0..g.d {
                let (a, b) = g.neighbours(idx, axis);
                acc += u[a] + u[b];
            }
            out[idx] = acc * inv_h2;
        }
    }

    /// Secant coefficient `(G(b) - G(a))/(b - a)` for `a = |u|²`, `b = |w|²`.
    fn coefficient(&self, a: f64, b: f64) -> f64 {
        let p = self.p;
        let m = 0.5 * (a + b);
        let delta = b - a;
        if m == 0.0 {
            return 0.0;
        }
        if p == 3.0 {
            // G(s) = s²/2, the secant is exact
            return m;
        }
        if delta.abs() <= 1e-4 * m {
            // G'(m) + G'''(m) δ²/24
            let e = 0.5 * (p - 1.0);
            let third = e * (e - 1.0) * m.powf(e - 2.0);
            return m.powf(e) + third * delta * delta / 24.0;
        }
        let big_g = |s: f64| 2.0 / (p + 1.0) * s.powf(0.5 * (p + 1.0));
        (big_g(b) - big_g(a)) / delta
    }

    /// Solves `(I - i dt/2 (Δ_h + g)) w = rhs` on active nodes.
    fn solve_linear(&self, g: &[f64], rhs: &[Complex64], w: &mut [Complex64]) -> Result<()> {
        let grid = &self.grid;
        let half = 0.5 * self.cfg.dt;
        let inv_h2 = 1.0 / (grid.h * grid.h);
        if grid.d == 1 {
            let n = grid.n_nodes();
            let mut lower = vec![ZERO; n];
            let mut diag = vec![Complex64::new(1.0, 0.0); n];
            let mut upper = vec![ZERO; n];
            for idx in 0..n {
                if !grid.is_active(idx) {
                    continue;
                }
                diag[idx] = Complex64::new(1.0, -half * (g[idx] - 2.0 * inv_h2));
                if grid.is_active(idx - 1) {
                    lower[idx] = Complex64::new(0.0, -half * inv_h2);
                }
                if grid.is_active(idx + 1) {
                    upper[idx] = Complex64::new(0.0, -half * inv_h2);
                }
            }
            w.copy_from_slice(rhs);
            solve_tridiagonal(&lower, &diag, &upper, w);
            return Ok(());
        }
        let apply = |v: &[Complex64], out: &mut [Complex64]| {
            self.laplacian(v, out);
            for idx in 0..v.len() {
                out[idx] = if grid.is_active(idx) { v[idx] - I * half * (out[idx] + g[idx] * v[idx]) } else { v[idx] };
            }
        };
        let tol = (0.01 * self.cfg.tol).max(1e-13);
        let st = cocg(apply, rhs, w, tol, 20 * grid.n.max(50));
        if !(st.relative_residual <= 10.0 * tol) {
            return Err(Error::InnerSolveDiverged { iterations: st.iterations, change: st.relative_residual });
        }
        Ok(())
    }

    /// One forward step of the scheme from `u`.
    fn advance(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = u.len();
        if u.iter().all(|z| *z == ZERO) {
            return Ok(vec![ZERO; n]);
        }
        let half = 0.5 * self.cfg.dt;
        let mut lap = vec![ZERO; n];
        self.laplacian(u, &mut lap);
        let a: Vec<f64> = u.iter().map(|z| z.norm_sqr()).collect();
        let mut w = u.to_vec();
        let mut g = vec![0.0; n];
        let mut rhs = vec![ZERO; n];
        let mut next = vec![ZERO; n];
        let mut change = f64::INFINITY;
        for it in 0..self.cfg.max_inner {
            for idx in 0..n {
                if self.grid.is_active(idx) {
                    g[idx] = self.coefficient(a[idx], w[idx].norm_sqr());
                    rhs[idx] = u[idx] + I * half * (lap[idx] + g[idx] * u[idx]);
                } else {
                    g[idx] = 0.0;
                    rhs[idx] = ZERO;
                }
            }
            next.copy_from_slice(&w);
            self.solve_linear(&g, &rhs, &mut next)?;
            let diff: f64 = next.iter().zip(&w).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
            let scale = norm_c(&next);
            change = if scale > 0.0 { diff / scale } else { diff };
            std::mem::swap(&mut w, &mut next);
            if change <= self.cfg.tol {
                return Ok(w);
            }
            if !change.is_finite() {
                return Err(Error::InnerSolveDiverged { iterations: it + 1, change });
            }
        }
        Err(Error::InnerSolveDiverged { iterations: self.cfg.max_inner, change })
    }

    /// One step of size dt; backward steps use `conj ∘ forward ∘ conj`.
    pub fn step(&self, u: &Field, direction: Direction) -> Result<Field> {
        let values = match direction {
            Direction::Forward => self.advance(&u.values)?,
            Direction::Backward => {
                let c: Vec<Complex64> = u.values.iter().map(|z| z.conj()).collect();
                self.advance(&c)?.into_iter().map(|z| z.conj()).collect()
            }
        };
        let sign = if direction == Direction::Forward { 1.0 } else { -1.0 };
        let mut out = Field { grid: u.grid.clone(), values, t: u.t + sign * self.cfg.dt };
        out.enforce_mask();
        Ok(out)
    }

    pub fn diagnostics(&self, u: &Field) -> StepDiagnostics {
        let band: f64 = u.values.iter().zip(&self.in_band).filter(|(_, b)| **b).map(|(z, _)| z.norm_sqr()).sum();
        StepDiagnostics { t: u.t, mass: mass(u), energy: energy(u, self.p), band_mass: band * self.grid.cell() }
    }

    fn check_band(&self, d: &StepDiagnostics) -> Result<()> {
        if d.mass > 0.0 && d.band_mass > self.cfg.contamination * d.mass {
            return Err(Error::BoxContamination { t: d.t, fraction: d.band_mass / d.mass });
        }
        Ok(())
    }

    /// Steps from `t_from` to `t_to` (either order), storing snapshots and
    /// calling observers every `stride` time units and at both ends.
    pub fn evolve(&self, u: &Field, t_from: f64, t_to: f64, observers: &mut [&mut Observer<'_>]) -> Result<Trajectory> {
        self.evolve_with(u, t_from, t_to, true, observers)
    }

    /// As [`Evolver::evolve`]; with `keep_snapshots = false` only the first
    /// and last states are stored.
    pub fn evolve_with(
        &self,
        u: &Field,
        t_from: f64,
        t_to: f64,
        keep_snapshots: bool,
        observers: &mut [&mut Observer<'_>],
    ) -> Result<Trajectory> {
        let span = (t_to - t_from).abs();
        let steps = (span / self.cfg.dt).round() as usize;
        if (steps as f64 * self.cfg.dt - span).abs() > 1e-9 * span.max(1.0) {
            return Err(Error::InvalidInput(format!("interval {span} is not a multiple of dt = {}", self.cfg.dt)));
        }
        let direction = if t_to >= t_from { Direction::Forward } else { Direction::Backward };
        let sign = if direction == Direction::Forward { 1.0 } else { -1.0 };
        let stride = ((self.cfg.stride / self.cfg.dt).round() as usize).max(1);
        let mut cur = u.clone();
        cur.t = t_from;
        let mut traj = Trajectory { times: vec![t_from], snapshots: vec![cur.clone()], diagnostics: Vec::with_capacity(steps + 1) };
        let d0 = self.diagnostics(&cur);
        traj.diagnostics.push(d0);
        self.check_band(&d0)?;
        for obs in observers.iter_mut() {
            obs(&cur)?;
        }
        for j in 1..=steps {
            let mut next = self.step(&cur, direction)?;
            next.t = if j == steps { t_to } else { t_from + sign * j as f64 * self.cfg.dt };
            let diag = self.diagnostics(&next);
            traj.diagnostics.push(diag);
            self.check_band(&diag)?;
            cur = next;
            if j % stride == 0 || j == steps {
                for obs in observers.iter_mut() {
                    obs(&cur)?;
                }
                if keep_snapshots || j == steps {
                    traj.times.push(cur.t);
                    traj.snapshots.push(cur.clone());
                }
            }
        }
        Ok(traj)
    }
}

/// A final-data run: `u(T_n) = R(T_n)` integrated back to `T_0`.
#[derive(Clone, Debug)]
pub struct FinalDataRun {
    pub trajectory: Trajectory,
    /// `(t, ‖u(t) - R(t)‖_{H¹})` at every snapshot time, decreasing t
    pub errors: Vec<(f64, f64)>,
}

/// Sets `u(T_n) = R(T_n)` and evolves backward to `T_0`, recording the H¹
/// distance to the ansatz. `big_lambda` enables the localized-diagnostics
/// constraint `√σ_0 T_0 ≥ 2Λ`.
pub fn final_data_run(
    ansatz: &Ansatz,
    evolver: &Evolver,
    t_n: f64,
    t_0: f64,
    big_lambda: Option<f64>,
    keep_snapshots: bool,
    observers: &mut [&mut Observer<'_>],
) -> Result<FinalDataRun> {
    if !(t_n >= t_0 && t_0 >= 0.0) {
        return Err(Error::ConfigRejected(format!("need T_n ≥ T_0 ≥ 0, got T_n = {t_n}, T_0 = {t_0}")));
    }
    check_box_adequacy(&ansatz.grid, &ansatz.specs, t_0, t_n)?;
    if let Some(lam) = big_lambda {
        let s0 = crate::geometry::sigma0(&ansatz.specs)?;
        if ansatz.specs.len() >= 2 && s0.sqrt() * t_0 < 2.0 * lam * (1.0 - 1e-12) {
            return Err(Error::ConfigRejected(format!("√σ_0·T_0 = {} is below 2Λ = {}", s0.sqrt() * t_0, 2.0 * lam)));
        }
    }
    let start = ansatz.r(t_n)?;
    let mut errors = Vec::new();
    let mut err_obs = |u: &Field| -> Result<()> {
        let r = ansatz.r(u.t)?;
        errors.push((u.t, h1_norm(&u.sub(&r))));
        Ok(())
    };
    let trajectory = {
        let mut all: Vec<&mut Observer<'_>> = Vec::with_capacity(observers.len() + 1);
        all.push(&mut err_obs);
        for o in observers.iter_mut() {
            all.push(&mut **o);
        }
        evolver.evolve_with(&start, t_n, t_0, keep_snapshots, &mut all)?
    };
    Ok(FinalDataRun { trajectory, errors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{free_soliton, SolitonSpec};
    use crate::groundstate::{solve_ground_state, GroundState};
    use std::sync::OnceLock;

    fn cubic() -> &'static GroundState {
        static GS: OnceLock<GroundState> = OnceLock::new();
        GS.get_or_init(|| solve_ground_state(3.0, 1, 1.0, 32.0, 8192).unwrap())
    }

    fn setup(l: f64, h: f64, dt: f64) -> (Arc<ExteriorGrid>, Evolver) {
        let grid = Arc::new(ExteriorGrid::new(1, l, h, None).unwrap());
        let cfg = SchemeConfig { dt, ..SchemeConfig::default() };
        let ev = Evolver::new(grid.clone(), 3.0, cfg).unwrap();
        (grid, ev)
    }

    #[test]
    fn zero_is_fixed() {
        let (grid, ev) = setup(10.0, 0.1, 0.01);
        let z = Field::zeros(&grid, 0.0);
        let w = ev.step(&z, Direction::Forward).unwrap();
        assert!(w.values.iter().all(|v| *v == ZERO));
    }

    #[test]
    fn standing_wave_single_step() {
        let (grid, ev) = setup(20.0, 0.05, 1e-3);
        let s = SolitonSpec { omega: 1.0, v: vec![0.0], x0: vec![0.0], mu: 0.0 };
        let u = free_soliton(cubic(), &s, 0.0, &grid).unwrap();
        let w = ev.step(&u, Direction::Forward).unwrap();
        let c = grid.n / 2;
        let rel = (w.values[c].norm() - u.values[c].norm()).abs() / u.values[c].norm();
        assert!(rel < 1e-8, "modulus change {rel}");
        let dphase = (w.values[c] / u.values[c]).arg();
        // discrete frequency differs from ω by O(h²)
        assert!((dphase - 1e-3).abs() < 1e-5, "phase {dphase}");
    }

    #[test]
    fn forward_backward_round_trip() {
        let (grid, ev) = setup(20.0, 0.05, 2e-3);
        let s = SolitonSpec { omega: 1.0, v: vec![1.0], x0: vec![-2.0], mu: 0.2 };
        let u = free_soliton(cubic(), &s, 0.0, &grid).unwrap();
        let w = ev.step(&u, Direction::Forward).unwrap();
        let back = ev.step(&w, Direction::Backward).unwrap();
        let err = back.sub(&u).l2_norm() / u.l2_norm();
        assert!(err <= 1e-10, "round trip {err}");
        assert_eq!(back.t, 0.0);
    }

    #[test]
    fn mass_and_energy_conserved() {
        let (grid, ev) = setup(20.0, 0.05, 2e-3);
        let s = SolitonSpec { omega: 1.0, v: vec![2.0], x0: vec![-4.0], mu: 0.0 };
        let u = free_soliton(cubic(), &s, 0.0, &grid).unwrap();
        let tr = ev.evolve(&u, 0.0, 1.0, &mut []).unwrap();
        let m0 = tr.diagnostics[0].mass;
        let e0 = tr.diagnostics[0].energy;
        for d in &tr.diagnostics {
            assert!(((d.mass - m0) / m0).abs() < 1e-12);
            assert!(((d.energy - e0) / e0).abs() < 1e-9);
        }
        assert_eq!(tr.times.len(), 11);
        assert_eq!(*tr.times.last().unwrap(), 1.0);
    }

    #[test]
    fn empty_interval_and_contamination() {
        let (grid, ev) = setup(20.0, 0.05, 2e-3);
        let s = SolitonSpec { omega: 1.0, v: vec![0.0], x0: vec![0.0], mu: 0.0 };
        let u = free_soliton(cubic(), &s, 0.0, &grid).unwrap();
        let tr = ev.evolve(&u, 3.0, 3.0, &mut []).unwrap();
        assert_eq!(tr.snapshots.len(), 1);
        assert_eq!(tr.snapshots[0].values, u.values);
        let s = SolitonSpec { omega: 1.0, v: vec![0.0], x0: vec![17.0], mu: 0.0 };
        let u = free_soliton(cubic(), &s, 0.0, &grid).unwrap();
        assert!(matches!(ev.evolve(&u, 0.0, 0.1, &mut []), Err(Error::BoxContamination { .. })));
    }

    #[test]
    fn conjugation_symmetry() {
        let (grid, ev) = setup(20.0, 0.05, 2e-3);
        let s = SolitonSpec { omega: 1.0, v: vec![1.5], x0: vec![-1.0], mu: 0.4 };
        let u = free_soliton(cubic(), &s, 0.0, &grid).unwrap();
        let a = ev.evolve(&u.conj(), 0.0, 0.2, &mut []).unwrap();
        let b = ev.evolve(&u, 0.0, -0.2, &mut []).unwrap();
        let diff = a.last().sub(&b.last().conj()).l2_norm() / u.l2_norm();
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn two_dimensional_round_trip() {
        let grid = Arc::new(ExteriorGrid::new(2, 8.0, 0.25, None).unwrap());
        let gs = solve_ground_state(2.0, 2, 1.0, 32.0, 4096).unwrap();
        let cfg = SchemeConfig { dt: 0.01, ..SchemeConfig::default() };
        let ev = Evolver::new(grid.clone(), 2.0, cfg).unwrap();
        let s = SolitonSpec { omega: 1.0, v: vec![0.5, -0.5], x0: vec![0.0, 0.0], mu: 0.0 };
        let u = free_soliton(&gs, &s, 0.0, &grid).unwrap();
        let w = ev.step(&u, Direction::Forward).unwrap();
        let back = ev.step(&w, Direction::Backward).unwrap();
        assert!(back.sub(&u).l2_norm() / u.l2_norm() < 1e-10);
        assert!(((mass(&w) - mass(&u)) / mass(&u)).abs() < 1e-11);
    }
}
