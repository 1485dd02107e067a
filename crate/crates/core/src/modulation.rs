//! Modulation: split `u = R̃(ω̃, y, μ̃) + h` with h orthogonal to the
//! symmetry directions of each soliton, by Newton iteration on
//!
//! ```text
//! Φ¹_k = Re ∫ R̃_k h̄,   Φ²_{k,j} = Re ∫ h̄ ∂_j Q̃_k Ψ e^{iφ̃_k},   Φ³_k = Im ∫ h R̃̄_k.
//! ```

use crate::ansatz::{Ansatz, Field, ModulatedParams};
use crate::error::{Error, Result};
use crate::evolver::Trajectory;
use crate::functionals::h1_norm;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const MAX_NEWTON: usize = 50;
/// Converged when `‖Φ‖_∞ ≤ RESIDUAL_FACTOR · ‖u‖_{L²}`.
pub const RESIDUAL_FACTOR: f64 = 1e-10;
const FD_STEP: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulationState {
    pub t: f64,
    pub params: ModulatedParams,
    /// `‖Φ‖_∞` at the returned parameters
    pub residual_norm: f64,
    pub h_l2: f64,
    pub h_h1: f64,
    pub iterations: usize,
    /// `max |params - (ω, 0, μ)| / ‖u - R‖_{L²}`; absent when `u = R`
    pub lipschitz_ratio: Option<f64>,
}

/// Parameter time derivatives at an interior sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamDerivatives {
    pub domega: Vec<f64>,
    pub dy: Vec<Vec<f64>>,
    pub dmu: Vec<f64>,
    /// per soliton: `|dω̃/dt|`, `|dy/dt|`, `|dμ̃/dt - (ω̃ - ω)|`
    pub combos: Vec<[f64; 3]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModulationTrajectory {
    pub states: Vec<ModulationState>,
    /// `None` at the two end samples
    pub derivatives: Vec<Option<ParamDerivatives>>,
}

impl ModulationTrajectory {
    /// Largest ratio `combo / (‖h‖_{H¹} + e^{-σ_0 t})` per combination,
    /// i.e. the smallest constant C₁ the run supports.
    pub fn derivative_constant(&self, sigma0: f64) -> [f64; 3] {
        let mut c = [0.0f64; 3];
        for (s, d) in self.states.iter().zip(&self.derivatives) {
            if let Some(d) = d {
                let rhs = s.h_h1 + (-sigma0 * s.t).exp();
                for combo in &d.combos {
                    for i in 0..3 {
                        c[i] = c[i].max(combo[i] / rhs);
                    }
                }
            }
        }
        c
    }
}

/// Decomposition settings.
#[derive(Clone, Debug)]
pub struct ModulationContext<'a> {
    pub ansatz: &'a Ansatz,
    /// modulation radius ε_mod in H¹
    pub radius: f64,
}

impl<'a> ModulationContext<'a> {
    /// Radius `0.1 · min_k ‖Q_{ω_k}‖_{H¹}`.
    pub fn new(ansatz: &'a Ansatz) -> Self {
        let m = ansatz.gss.iter().zip(&ansatz.specs).map(|(gs, s)| scaled_h1(gs, s.omega)).fold(f64::INFINITY, f64::min);
        Self { ansatz, radius: 0.1 * m }
    }

    pub fn with_radius(ansatz: &'a Ansatz, radius: f64) -> Self {
        Self { ansatz, radius }
    }
}

fn scaled_h1(gs: &crate::groundstate::GroundState, omega: f64) -> f64 {
    // ‖Q_ω̃‖² and ‖∇Q_ω̃‖² follow from the scaling law
    let ratio = omega / gs.omega;
    let d = gs.d as f64;
    let mass_scale = ratio.powf(2.0 / (gs.p - 1.0) - 0.5 * d);
    let h1 = gs.h1_norm();
    let m = gs.mass();
    let grad = h1 * h1 - m;
    (m * mass_scale + grad * mass_scale * ratio).sqrt()
}

/// `[Φ¹_k, Φ²_k…, Φ³_k]` for all k, with `h = u - R̃(params)`.
pub fn orthogonality_residual(u: &Field, params: &ModulatedParams, ansatz: &Ansatz) -> Result<Vec<f64>> {
    Ok(residual_and_h(u, params, ansatz)?.0)
}

fn residual_and_h(u: &Field, params: &ModulatedParams, ansatz: &Ansatz) -> Result<(Vec<f64>, Field)> {
    let m = ansatz.modulated(params, u.t, true)?;
    let h = u.sub(&m.total);
    let mut out = Vec::with_capacity(params.k() * (ansatz.grid.d + 2));
    for k in 0..params.k() {
        let rk = &m.components[k];
        out.push(rk.inner(&h).re);
        for dir in &m.directions[k] {
            out.push(dir.inner(&h).re);
        }
        out.push(h.inner(rk).im);
    }
    Ok((out, h))
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Newton solve without the radius precondition.
/// With `polish`, one more step is tried after convergence and kept if it
/// lowers the residual.
fn newton(u: &Field, seed: &ModulatedParams, ansatz: &Ansatz, polish: bool) -> Result<(ModulatedParams, Vec<f64>, Field, usize)> {
    let k = seed.k();
    let d = ansatz.grid.d;
    let target = RESIDUAL_FACTOR * u.l2_norm();
    let mut x = seed.to_vec();
    let (mut f, mut h) = residual_and_h(u, seed, ansatz)?;
    let mut fnorm = inf_norm(&f);
    let n = x.len();
    let mut polishing = false;
    for it in 0..MAX_NEWTON {
        if fnorm <= target {
            if !polish || polishing || fnorm == 0.0 {
                return Ok((ModulatedParams::from_vec(&x, k, d), f, h, it));
            }
            polishing = true;
        }
        let mut jac = DMatrix::zeros(n, n);
        for c in 0..n {
            let step = FD_STEP * x[c].abs().max(1.0);
            let mut xp = x.clone();
            xp[c] += step;
            let fp = orthogonality_residual(u, &ModulatedParams::from_vec(&xp, k, d), ansatz)?;
            for r in 0..n {
                jac[(r, c)] = (fp[r] - f[r]) / step;
            }
        }
        let rhs = DVector::from_iterator(n, f.iter().map(|v| -v));
        let delta = jac.lu().solve(&rhs).ok_or(Error::NewtonDiverged { t: u.t, residual: fnorm })?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a + lambda * b).collect();
            if let Ok((ft, ht)) = residual_and_h(u, &ModulatedParams::from_vec(&trial, k, d), ansatz) {
                let tn = inf_norm(&ft);
                if tn < fnorm {
                    x = trial;
                    f = ft;
                    h = ht;
                    fnorm = tn;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted && polishing {
            return Ok((ModulatedParams::from_vec(&x, k, d), f, h, it));
        }
        if !accepted {
            return Err(Error::NewtonDiverged { t: u.t, residual: fnorm });
        }
    }
    if fnorm <= target {
        return Ok((ModulatedParams::from_vec(&x, k, d), f, h, MAX_NEWTON));
    }
    Err(Error::NewtonDiverged { t: u.t, residual: fnorm })
}

fn state(u: &Field, ansatz: &Ansatz, params: ModulatedParams, f: &[f64], h: &Field, iterations: usize) -> Result<ModulationState> {
    let r = ansatz.r(u.t)?;
    let dist = u.sub(&r).l2_norm();
    let base = ModulatedParams::unmodulated(&ansatz.specs).to_vec();
    let shift = inf_norm(&params.to_vec().iter().zip(&base).map(|(a, b)| a - b).collect::<Vec<_>>());
    Ok(ModulationState {
        t: u.t,
        params,
        residual_norm: inf_norm(f),
        h_l2: h.l2_norm(),
        h_h1: h1_norm(h),
        iterations,
        lipschitz_ratio: if dist > 0.0 { Some(shift / dist) } else { None },
    })
}

/// Modulation parameters of `u` near R(t), starting Newton from `seed`.
pub fn decompose(u: &Field, seed: &ModulatedParams, ctx: &ModulationContext<'_>) -> Result<ModulationState> {
    let r = ctx.ansatz.r(u.t)?;
    let distance = h1_norm(&u.sub(&r));
    if distance > ctx.radius {
        return Err(Error::OutsideModulationRadius { distance, radius: ctx.radius });
    }
    let (params, f, h, it) = newton(u, seed, ctx.ansatz, true)?;
    state(u, ctx.ansatz, params, &f, &h, it)
}

/// Decomposes every snapshot, warm-starting from the previous one, and
/// differentiates the parameters in time. Radius checks are skipped; any
/// failure is reported as `NewtonDiverged` at the failing time.
pub fn extract_trajectory(traj: &Trajectory, ctx: &ModulationContext<'_>) -> Result<ModulationTrajectory> {
    extract_from_fields(&traj.snapshots, ctx)
}

pub fn extract_from_fields(snapshots: &[Field], ctx: &ModulationContext<'_>) -> Result<ModulationTrajectory> {
    let mut m = Modulator::new(ctx.ansatz);
    for u in snapshots {
        m.push(u)?;
    }
    Ok(m.finish())
}

/// Streaming form of [`extract_trajectory`], fed one snapshot at a time.
pub struct Modulator<'a> {
    ansatz: &'a Ansatz,
    seed: ModulatedParams,
    states: Vec<ModulationState>,
}

impl<'a> Modulator<'a> {
    pub fn new(ansatz: &'a Ansatz) -> Self {
        Self { ansatz, seed: ModulatedParams::unmodulated(&ansatz.specs), states: Vec::new() }
    }

    pub fn push(&mut self, u: &Field) -> Result<&ModulationState> {
        let diverged = |e: Error| match e {
            Error::NewtonDiverged { .. } => e,
            _ => Error::NewtonDiverged { t: u.t, residual: f64::NAN },
        };
        let (mut params, f, h, it) = newton(u, &self.seed, self.ansatz, false).map_err(diverged)?;
        if let Some(prev) = self.states.last() {
            for (m, pm) in params.mu_tilde.iter_mut().zip(&prev.params.mu_tilde) {
                *m += 2.0 * PI * ((pm - *m) / (2.0 * PI)).round();
            }
        }
        let st = state(u, self.ansatz, params.clone(), &f, &h, it).map_err(diverged)?;
        self.seed = params;
        self.states.push(st);
        Ok(self.states.last().unwrap())
    }

    pub fn finish(self) -> ModulationTrajectory {
        let ansatz = self.ansatz;
        let states = self.states;
        let derivatives = (0..states.len())
            .map(|i| {
                if i == 0 || i + 1 == states.len() {
                    return None;
                }
                let (a, b, c) = (&states[i - 1], &states[i], &states[i + 1]);
                let dt = c.t - a.t;
                let kk = b.params.k();
                let domega: Vec<f64> = (0..kk).map(|k| (c.params.omega_tilde[k] - a.params.omega_tilde[k]) / dt).collect();
                let dy: Vec<Vec<f64>> = (0..kk)
                    .map(|k| c.params.y[k].iter().zip(&a.params.y[k]).map(|(p, q)| (p - q) / dt).collect())
                    .collect();
                let dmu: Vec<f64> = (0..kk).map(|k| (c.params.mu_tilde[k] - a.params.mu_tilde[k]) / dt).collect();
                let combos = (0..kk)
                    .map(|k| {
                        let dyn_ = dy[k].iter().map(|v| v * v).sum::<f64>().sqrt();
                        [domega[k].abs(), dyn_, (dmu[k] - (b.params.omega_tilde[k] - ansatz.specs[k].omega)).abs()]
                    })
                    .collect();
                Some(ParamDerivatives { domega, dy, dmu, combos })
            })
            .collect();
        ModulationTrajectory { states, derivatives }
    }
}

/// Newton Jacobian `∂Φ/∂(ω̃, y, μ̃)` at the given parameters.
pub fn jacobian(u: &Field, params: &ModulatedParams, ansatz: &Ansatz) -> Result<DMatrix<f64>> {
    let k = params.k();
    let d = ansatz.grid.d;
    let x = params.to_vec();
    let f = orthogonality_residual(u, params, ansatz)?;
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    for c in 0..n {
        let step = FD_STEP * x[c].abs().max(1.0);
        let mut xp = x.clone();
        xp[c] += step;
        let fp = orthogonality_residual(u, &ModulatedParams::from_vec(&xp, k, d), ansatz)?;
        for r in 0..n {
            jac[(r, c)] = (fp[r] - f[r]) / step;
        }
    }
    Ok(jac)
}
