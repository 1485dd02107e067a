//! Radial ground states of `-ΔQ + ωQ = |Q|^{p-1} Q` in d = 1 or 2.
//!
//! The profile is computed by spectral renormalization (Petviashvili
//! iteration) on a uniform, vertex-centred radial grid `r_j = j Δr`. The
//! radial Laplacian is the conservative finite-volume stencil
//!
//! ```text
//! (Δ_h Q)_j = (f_{j+1/2} - f_{j-1/2}) / w_j,   f_{j+1/2} = r_{j+1/2}^{d-1} (Q_{j+1} - Q_j) / Δr
//! ```
//!
//! with zero flux at the origin and an asymptotic Robin condition
//! `Q' = -κ Q`, `κ = √ω + (d-1)/(2r)`, at `r_max`. The weighted operator is
//! symmetric, so the renormalization factor uses the same weights `w_j`.

use crate::error::{Error, Result};
use crate::linalg::{linear_fit, solve_tridiagonal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Radial samples used when no explicit count is requested.
pub const DEFAULT_N_R: usize = 1 << 14;
/// `r_max = DEFAULT_R_MAX_SCALE / √ω` by default.
pub const DEFAULT_R_MAX_SCALE: f64 = 32.0;
/// Relative ω step for the centred ∂Q/∂ω difference.
pub const DEFAULT_REL_STEP: f64 = 1e-4;

const RESIDUAL_TARGET: f64 = 1e-11;
const RESIDUAL_CONTRACT: f64 = 1e-8;
const MAX_ITERATIONS: usize = 4000;
const SWITCH_TO_NEWTON: f64 = 1e-5;
const NEWTON_STEPS: usize = 12;
const TAIL_LIMIT: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct GroundState {
    pub p: f64,
    pub d: usize,
    pub omega: f64,
    pub r_max: f64,
    pub r_samples: Vec<f64>,
    pub q_samples: Vec<f64>,
    pub dq_domega_samples: Vec<f64>,
    pub decay_rate: f64,
    /// Hermite slopes at the samples; derived, never serialized.
    slopes: Vec<f64>,
}

/// On-disk form of a [`GroundState`]. Floats are written in shortest
/// round-trip decimal form, so a save/load cycle is bit-exact.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct GroundStateRecord {
    p: f64,
    d: usize,
    omega: f64,
    r_max: f64,
    n_r: usize,
    q_samples: Vec<f64>,
    dq_domega_samples: Vec<f64>,
    decay_rate: f64,
}

impl Serialize for GroundState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GroundStateRecord {
            p: self.p,
            d: self.d,
            omega: self.omega,
            r_max: self.r_max,
            n_r: self.q_samples.len(),
            q_samples: self.q_samples.clone(),
            dq_domega_samples: self.dq_domega_samples.clone(),
            decay_rate: self.decay_rate,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GroundState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rec = GroundStateRecord::deserialize(d)?;
        if rec.n_r < 4 || rec.q_samples.len() != rec.n_r || rec.dq_domega_samples.len() != rec.n_r {
            return Err(D::Error::custom("sample arrays do not match n_r"));
        }
        let grid = RadialGrid::new(rec.d, rec.r_max, rec.n_r, rec.omega);
        Ok(GroundState::assemble(
            rec.p,
            rec.d,
            rec.omega,
            &grid,
            rec.q_samples,
            rec.dq_domega_samples,
            rec.decay_rate,
        ))
    }
}

/// Uniform radial grid with finite-volume weights and face factors.
#[derive(Clone, Debug)]
struct RadialGrid {
    d: usize,
    dr: f64,
    r: Vec<f64>,
    /// cell measure per unit solid angle
    w: Vec<f64>,
    /// `r_{j+1/2}^{d-1}` for j = 0..n (last entry is the outer face)
    face: Vec<f64>,
    /// Robin coefficient at the outer face
    kappa: f64,
}

impl RadialGrid {
    fn new(d: usize, r_max: f64, n: usize, omega: f64) -> Self {
        let dr = r_max / (n - 1) as f64;
        let r: Vec<f64> = (0..n).map(|j| j as f64 * dr).collect();
        let face: Vec<f64> = (0..n).map(|j| ((j as f64 + 0.5) * dr).powi(d as i32 - 1)).collect();
        let w: Vec<f64> = (0..n)
            .map(|j| {
                if j == 0 {
                    (0.5 * dr).powi(d as i32) / d as f64
                } else {
                    r[j].powi(d as i32 - 1) * dr
                }
            })
            .collect();
        let outer = r_max + 0.5 * dr;
        let kappa = omega.sqrt() + (d as f64 - 1.0) / (2.0 * outer);
        Self { d, dr, r, w, face, kappa }
    }

    fn n(&self) -> usize {
        self.r.len()
    }

    /// Tridiagonal coefficients of `ω - Δ_h`.
    fn operator(&self, omega: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n();
        let mut lower = vec![0.0; n];
        let mut diag = vec![omega; n];
        let mut upper = vec![0.0; n];
        for j in 0..n {
            let scale = 1.0 / self.w[j];
            if j > 0 {
                let a = self.face[j - 1] / self.dr;
                lower[j] = -a * scale;
                diag[j] += a * scale;
            }
            if j + 1 < n {
                let a = self.face[j] / self.dr;
                upper[j] = -a * scale;
                diag[j] += a * scale;
            } else {
                diag[j] += self.face[j] * self.kappa * scale;
            }
        }
        (lower, diag, upper)
    }

    fn apply(&self, op: &(Vec<f64>, Vec<f64>, Vec<f64>), q: &[f64], out: &mut [f64]) {
        let n = self.n();
        for j in 0..n {
            let mut v = op.1[j] * q[j];
            if j > 0 {
                v += op.0[j] * q[j - 1];
            }
            if j + 1 < n {
                v += op.2[j] * q[j + 1];
            }
            out[j] = v;
        }
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.w.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum()
    }

    /// Measure of the unit sphere S^{d-1}.
    fn sphere(&self) -> f64 {
        if self.d == 1 {
            2.0
        } else {
            2.0 * PI
        }
    }
}

fn nonlinearity(q: f64, p: f64) -> f64 {
    q.abs().powf(p - 1.0) * q
}

/// Critical exponent `1 + 4/d`.
pub fn critical_exponent(d: usize) -> f64 {
    1.0 + 4.0 / d as f64
}

struct RadialSolution {
    grid: RadialGrid,
    q: Vec<f64>,
    residual: f64,
}

fn check_common(p: f64, d: usize, omega: f64, r_max: f64, n_r: usize) -> Result<()> {
    if d != 1 && d != 2 {
        return Err(Error::InvalidInput(format!("dimension {d} not supported (1 or 2)")));
    }
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidInput(format!("exponent p = {p} must exceed 1")));
    }
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::InvalidInput(format!("frequency ω = {omega} must be positive")));
    }
    if n_r < 512 {
        return Err(Error::InvalidInput(format!("n_r = {n_r} below the 512-sample minimum")));
    }
    if !(r_max >= 20.0 / omega.sqrt() * (1.0 - 1e-12)) {
        return Err(Error::InvalidInput(format!("r_max = {r_max} below 20/√ω")));
    }
    Ok(())
}

/// Petviashvili iteration for the radial elliptic problem. No
/// subcriticality requirement: the elliptic problem is solvable for every
/// p > 1 in d ≤ 2.
fn petviashvili(p: f64, d: usize, omega: f64, r_max: f64, n_r: usize) -> Result<RadialSolution> {
    let grid = RadialGrid::new(d, r_max, n_r, omega);
    let op = grid.operator(omega);
    let gamma = p / (p - 1.0);
    let amp = omega.powf(1.0 / (p - 1.0)) * 1.5;
    let mut q: Vec<f64> = grid.r.iter().map(|&r| amp / (omega.sqrt() * r).cosh()).collect();
    let mut lq = vec![0.0; n_r];
    let residual_of = |q: &[f64], lq: &mut [f64]| -> f64 {
        grid.apply(&op, q, lq);
        let peak = q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        lq.iter().zip(q).map(|(a, v)| (a - nonlinearity(*v, p)).abs()).fold(0.0, f64::max) / peak
    };
    // Renormalized fixed point. Each sweep re-solves for the whole profile,
    // so rounding noise of order eps·‖Q‖ amplified by the stencil puts a
    // floor under the residual on fine grids; the Newton polish below
    // removes it because its corrections are small.
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        residual = residual_of(&q, &mut lq);
        if residual <= SWITCH_TO_NEWTON {
            break;
        }
        let nq: Vec<f64> = q.iter().map(|&v| nonlinearity(v, p)).collect();
        let num = grid.dot(&q, &lq);
        let den = grid.dot(&q, &nq);
        if !(den > 0.0) || !(num > 0.0) {
            return Err(Error::NoConvergence { iterations, residual });
        }
        let m = (num / den).powf(gamma);
        let mut next = nq;
        solve_tridiagonal(&op.0, &op.1, &op.2, &mut next);
        for v in next.iter_mut() {
            *v *= m;
        }
        q = next;
        iterations += 1;
    }
    if !(residual <= SWITCH_TO_NEWTON) {
        return Err(Error::NoConvergence { iterations, residual });
    }
    for _ in 0..NEWTON_STEPS {
        if residual <= RESIDUAL_TARGET {
            break;
        }
        let mut rhs: Vec<f64> = lq.iter().zip(&q).map(|(a, v)| nonlinearity(*v, p) - a).collect();
        let diag: Vec<f64> = op.1.iter().zip(&q).map(|(a, v)| a - p * v.abs().powf(p - 1.0)).collect();
        solve_tridiagonal(&op.0, &diag, &op.2, &mut rhs);
        let trial: Vec<f64> = q.iter().zip(&rhs).map(|(a, b)| a + b).collect();
        let mut trial_lq = vec![0.0; n_r];
        let trial_residual = residual_of(&trial, &mut trial_lq);
        if !(trial_residual < residual) {
            break;
        }
        q = trial;
        lq = trial_lq;
        residual = trial_residual;
    }
    if !(residual <= RESIDUAL_CONTRACT) {
        return Err(Error::NoConvergence { iterations, residual });
    }
    Ok(RadialSolution { grid, q, residual })
}

/// Converged radial profile without the dynamical subcriticality guard.
///
/// Returns `(r_samples, q_samples, relative residual)`. This is the raw
/// elliptic solver behind [`solve_ground_state`]; it also accepts the
/// L²-critical and supercritical exponents.
pub fn solve_radial_profile(p: f64, d: usize, omega: f64, r_max: f64, n_r: usize) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    check_common(p, d, omega, r_max, n_r)?;
    let sol = petviashvili(p, d, omega, r_max, n_r)?;
    Ok((sol.grid.r, sol.q, sol.residual))
}

/// Relative residual `‖-Δ_h Q + ωQ - |Q|^{p-1}Q‖_∞ / ‖Q‖_∞` of arbitrary
/// samples on the solver's radial grid.
pub fn radial_residual(p: f64, d: usize, omega: f64, r_max: f64, q: &[f64]) -> f64 {
    let grid = RadialGrid::new(d, r_max, q.len(), omega);
    let op = grid.operator(omega);
    let mut lq = vec![0.0; q.len()];
    grid.apply(&op, q, &mut lq);
    let peak = q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    lq.iter().zip(q).map(|(a, v)| (a - nonlinearity(*v, p)).abs()).fold(0.0, f64::max) / peak
}

/// Solves for the positive radial ground state, its ω-derivative and tail rate.
pub fn solve_ground_state(p: f64, d: usize, omega: f64, r_max: f64, n_r: usize) -> Result<GroundState> {
    check_common(p, d, omega, r_max, n_r)?;
    let limit = critical_exponent(d);
    if p >= limit {
        return Err(Error::SubcriticalityViolated { p, d, limit });
    }
    let sol = petviashvili(p, d, omega, r_max, n_r)?;
    let q = sol.q;
    let peak = q[0];
    if !(peak > 0.0) || q.iter().any(|&v| !(v > 0.0)) || q.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::NoConvergence { iterations: MAX_ITERATIONS, residual: sol.residual });
    }
    let ratio = q[n_r - 1] / peak;
    if ratio > TAIL_LIMIT {
        return Err(Error::DomainTooSmall { ratio });
    }
    let dq = centred_omega_difference(p, d, omega, r_max, n_r, DEFAULT_REL_STEP)?;
    let decay_rate = tail_rate(&sol.grid.r, &q);
    Ok(GroundState::assemble(p, d, omega, &sol.grid, q, dq, decay_rate))
}

/// Ground state with default radial extent and resolution.
pub fn solve_ground_state_default(p: f64, d: usize, omega: f64) -> Result<GroundState> {
    solve_ground_state(p, d, omega, DEFAULT_R_MAX_SCALE / omega.sqrt(), DEFAULT_N_R)
}

fn centred_omega_difference(p: f64, d: usize, omega: f64, r_max: f64, n_r: usize, rel_step: f64) -> Result<Vec<f64>> {
    let hi = petviashvili(p, d, omega * (1.0 + rel_step), r_max, n_r)?;
    let lo = petviashvili(p, d, omega * (1.0 - rel_step), r_max, n_r)?;
    let step = 2.0 * rel_step * omega;
    Ok(hi.q.iter().zip(&lo.q).map(|(a, b)| (a - b) / step).collect())
}

/// `∂Q_ω/∂ω` at the ground state's radii by a centred difference in ω.
pub fn domega_profile(gs: &GroundState, rel_step: f64) -> Result<Vec<f64>> {
    if !(1e-6..=1e-2).contains(&rel_step) {
        return Err(Error::RelStepOutOfRange(rel_step));
    }
    centred_omega_difference(gs.p, gs.d, gs.omega, gs.r_max, gs.q_samples.len(), rel_step)
}

/// Least-squares slope of `-ln Q` over the last quarter of the radial grid.
fn tail_rate(r: &[f64], q: &[f64]) -> f64 {
    let start = 3 * r.len() / 4;
    let y: Vec<f64> = q[start..].iter().map(|v| v.ln()).collect();
    linear_fit(&r[start..], &y).map(|(slope, _, _)| -slope).unwrap_or(f64::NAN)
}

/// Fourth-order centred slopes, even across the origin.
fn hermite_slopes(q: &[f64], dr: f64, kappa: f64) -> Vec<f64> {
    let n = q.len();
    let at = |j: isize| -> f64 { q[j.unsigned_abs()] };
    let mut s = vec![0.0; n];
    for j in 1..n.saturating_sub(2) {
        let j = j as isize;
        s[j as usize] = (8.0 * (at(j + 1) - at(j - 1)) - (at(j + 2) - at(j - 2))) / (12.0 * dr);
    }
    if n >= 3 {
        s[n - 2] = (q[n - 1] - q[n - 3]) / (2.0 * dr);
    }
    s[n - 1] = -kappa * q[n - 1];
    s[0] = 0.0;
    s
}

impl GroundState {
    fn assemble(p: f64, d: usize, omega: f64, grid: &RadialGrid, q: Vec<f64>, dq: Vec<f64>, decay_rate: f64) -> Self {
        let slopes = hermite_slopes(&q, grid.dr, grid.kappa);
        Self {
            p,
            d,
            omega,
            r_max: *grid.r.last().unwrap(),
            r_samples: grid.r.clone(),
            q_samples: q,
            dq_domega_samples: dq,
            decay_rate,
            slopes,
        }
    }

    pub fn n_r(&self) -> usize {
        self.q_samples.len()
    }

    pub fn dr(&self) -> f64 {
        self.r_max / (self.n_r() - 1) as f64
    }

    pub fn peak(&self) -> f64 {
        self.q_samples[0]
    }

    /// Residual of the stored samples against the discrete radial equation.
    pub fn residual(&self) -> f64 {
        radial_residual(self.p, self.d, self.omega, self.r_max, &self.q_samples)
    }

    fn weights(&self) -> RadialGrid {
        RadialGrid::new(self.d, self.r_max, self.n_r(), self.omega)
    }

    /// `∫_{R^d} Q_ω² dx` by the finite-volume quadrature.
    pub fn mass(&self) -> f64 {
        let g = self.weights();
        g.sphere() * g.dot(&self.q_samples, &self.q_samples)
    }

    /// `d/dω ∫ Q_ω² dx = 2 ∫ Q ∂_ω Q dx`.
    pub fn mass_derivative(&self) -> f64 {
        let g = self.weights();
        2.0 * g.sphere() * g.dot(&self.q_samples, &self.dq_domega_samples)
    }

    /// Cubic Hermite interpolation of the profile; exponential tail past `r_max`.
    pub fn eval(&self, radius: f64) -> f64 {
        self.eval_with_derivative(radius).0
    }

    /// Profile value and radial derivative `Q'(r)`.
    pub fn eval_with_derivative(&self, radius: f64) -> (f64, f64) {
        let r = radius.abs();
        let n = self.n_r();
        if r >= self.r_max {
            let v = self.q_samples[n - 1] * (-self.decay_rate * (r - self.r_max)).exp();
            return (v, -self.decay_rate * v * radius.signum());
        }
        let dr = self.dr();
        let x = r / dr;
        let j = (x.floor() as usize).min(n - 2);
        let s = x - j as f64;
        let (q0, q1) = (self.q_samples[j], self.q_samples[j + 1]);
        let (m0, m1) = (self.slopes[j] * dr, self.slopes[j + 1] * dr);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let v = h00 * q0 + h10 * m0 + h01 * q1 + h11 * m1;
        let dh00 = 6.0 * s2 - 6.0 * s;
        let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
        let dh01 = -6.0 * s2 + 6.0 * s;
        let dh11 = 3.0 * s2 - 2.0 * s;
        let dv = (dh00 * q0 + dh10 * m0 + dh01 * q1 + dh11 * m1) / dr;
        (v, if radius < 0.0 { -dv } else { dv })
    }

    /// Interpolated `∂Q_ω/∂ω` (linear interpolation of the stored samples).
    pub fn eval_domega(&self, radius: f64) -> f64 {
        let r = radius.abs();
        let n = self.n_r();
        if r >= self.r_max {
            return self.dq_domega_samples[n - 1] * (-self.decay_rate * (r - self.r_max)).exp();
        }
        let x = r / self.dr();
        let j = (x.floor() as usize).min(n - 2);
        let s = x - j as f64;
        (1.0 - s) * self.dq_domega_samples[j] + s * self.dq_domega_samples[j + 1]
    }

    /// Profile at a nearby frequency through the exact scaling law
    /// `Q_ω̃(r) = (ω̃/ω)^{1/(p-1)} Q_ω(√(ω̃/ω) r)`.
    pub fn scaled(&self, omega_tilde: f64) -> ScaledProfile<'_> {
        let ratio = omega_tilde / self.omega;
        ScaledProfile { gs: self, amp: ratio.powf(1.0 / (self.p - 1.0)), scale: ratio.sqrt() }
    }

    /// ‖Q_ω‖_{H¹} on R^d.
    pub fn h1_norm(&self) -> f64 {
        let g = self.weights();
        let n = self.n_r();
        let mut grad = 0.0;
        for j in 0..n - 1 {
            let dq = (self.q_samples[j + 1] - self.q_samples[j]) / g.dr;
            grad += g.face[j] * dq * dq * g.dr;
        }
        (self.mass() + g.sphere() * grad).sqrt()
    }
}

/// Ground-state profile rescaled to another frequency.
#[derive(Clone, Copy, Debug)]
pub struct ScaledProfile<'a> {
    gs: &'a GroundState,
    amp: f64,
    scale: f64,
}

impl ScaledProfile<'_> {
    pub fn value(&self, r: f64) -> f64 {
        self.amp * self.gs.eval(self.scale * r)
    }

    pub fn value_and_derivative(&self, r: f64) -> (f64, f64) {
        let (v, dv) = self.gs.eval_with_derivative(self.scale * r);
        (self.amp * v, self.amp * self.scale * dv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sech(x: f64) -> f64 {
        1.0 / x.cosh()
    }

    #[test]
    fn cubic_1d_peak_matches_sech() {
        let gs = solve_ground_state_default(3.0, 1, 1.0).unwrap();
        assert!((gs.peak() - 2f64.sqrt()).abs() < 1e-5, "peak {}", gs.peak());
        assert!((gs.eval(0.0) - 1.414214).abs() < 1e-5);
        assert!(gs.residual() <= 1e-8);
    }

    #[test]
    fn scaling_oracle_omega_four() {
        let gs = solve_ground_state_default(3.0, 1, 4.0).unwrap();
        assert!((gs.peak() - 2.828427).abs() < 1e-5, "peak {}", gs.peak());
    }

    #[test]
    fn quadratic_1d_peak() {
        let gs = solve_ground_state_default(2.0, 1, 1.0).unwrap();
        assert!((gs.peak() - 1.5).abs() < 1e-5, "peak {}", gs.peak());
        for &x in &[0.3, 1.0, 2.5, 6.0] {
            let exact = 1.5 * sech(x / 2.0).powi(2);
            assert!((gs.eval(x) - exact).abs() < 1e-6 * 1.5);
        }
    }

    #[test]
    fn rejects_critical_and_bad_inputs() {
        assert!(matches!(
            solve_ground_state_default(3.0, 2, 1.0),
            Err(Error::SubcriticalityViolated { .. })
        ));
        assert!(matches!(solve_ground_state_default(5.0, 1, 1.0), Err(Error::SubcriticalityViolated { .. })));
        assert!(matches!(solve_ground_state(3.0, 1, 1.0, 30.0, 100), Err(Error::InvalidInput(_))));
        assert!(matches!(solve_ground_state(3.0, 1, 1.0, 5.0, 1024), Err(Error::InvalidInput(_))));
        assert!(matches!(solve_ground_state(3.0, 1, -1.0, 30.0, 1024), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn mass_derivative_is_two_for_cubic() {
        let gs = solve_ground_state_default(3.0, 1, 1.0).unwrap();
        assert!((gs.mass() - 4.0).abs() < 1e-5, "mass {}", gs.mass());
        assert!((gs.mass_derivative() - 2.0).abs() < 1e-3, "dM/dω {}", gs.mass_derivative());
    }

    #[test]
    fn domega_profile_is_even_and_rel_step_checked() {
        let gs = solve_ground_state(3.0, 1, 1.0, 32.0, 4096).unwrap();
        let dq = domega_profile(&gs, 1e-4).unwrap();
        assert_eq!(dq.len(), gs.n_r());
        // even extension: the one-sided slope at the origin vanishes to grid accuracy
        let slope0 = (dq[1] - dq[0]) / gs.dr();
        assert!(slope0.abs() < 1e-2 * dq[0].abs().max(1.0));
        assert!(matches!(domega_profile(&gs, 1e-8), Err(Error::RelStepOutOfRange(_))));
        assert!(matches!(domega_profile(&gs, 0.1), Err(Error::RelStepOutOfRange(_))));
    }

    #[test]
    fn eval_profile_endpoints_and_tail() {
        let gs = solve_ground_state(3.0, 1, 1.0, 32.0, 4096).unwrap();
        assert_eq!(gs.eval(gs.r_max), *gs.q_samples.last().unwrap());
        assert!(gs.eval(2.0 * gs.r_max) <= 1e-15 * gs.peak());
        let (v, dv) = gs.eval_with_derivative(1.0);
        let exact = 2f64.sqrt() * sech(1.0);
        assert!((v - exact).abs() < 1e-5);
        assert!((dv + exact * 1f64.tanh()).abs() < 1e-4);
    }

    #[test]
    fn decay_rate_near_sqrt_omega() {
        for &(p, d, w) in &[(3.0, 1, 1.0), (2.0, 1, 4.0), (2.0, 2, 0.5)] {
            let gs = solve_ground_state_default(p, d, w).unwrap();
            let ratio = gs.decay_rate / w.sqrt();
            assert!((0.9..=1.1).contains(&ratio), "p={p} d={d} ω={w} ratio {ratio}");
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let gs = solve_ground_state(2.0, 2, 1.0, 25.0, 600).unwrap();
        let text = serde_json::to_string(&gs).unwrap();
        let back: GroundState = serde_json::from_str(&text).unwrap();
        assert_eq!(back.q_samples, gs.q_samples);
        assert_eq!(back.dq_domega_samples, gs.dq_domega_samples);
        assert_eq!(back.decay_rate.to_bits(), gs.decay_rate.to_bits());
        assert_eq!(back.r_max.to_bits(), gs.r_max.to_bits());
        assert_eq!(back.eval(1.234), gs.eval(1.234));
    }
}
