//! Boosted solitary waves, the cutoff multi-soliton ansatz R(t) and its
//! modulated version R̃(t).

use crate::error::{Error, Result};
use crate::geometry::{CutoffField, ExteriorGrid};
use crate::groundstate::GroundState;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Relative half-width of the frequency window served by one ground state.
pub const RESOLVE_WINDOW: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolitonSpec {
    pub omega: f64,
    pub v: Vec<f64>,
    pub x0: Vec<f64>,
    pub mu: f64,
}

impl SolitonSpec {
    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::InvalidInput(format!("soliton frequency {} must be positive", self.omega)));
        }
        if self.v.len() != d || self.x0.len() != d {
            return Err(Error::InvalidInput(format!("soliton vectors must have {d} components")));
        }
        if !self.mu.is_finite() || self.v.iter().chain(&self.x0).any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite soliton parameter".into()));
        }
        Ok(())
    }

    pub fn speed(&self) -> f64 {
        self.v.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Centre `x⁰ + t v`, padded to two components.
    pub fn center(&self, t: f64) -> [f64; 2] {
        let mut c = [0.0; 2];
        for (i, ci) in c.iter_mut().enumerate().take(self.v.len()) {
            *ci = self.x0[i] + t * self.v[i];
        }
        c
    }

    /// `θ(t) = -|v|² t / 4 + ω t`.
    pub fn theta(&self, t: f64) -> f64 {
        let v2: f64 = self.v.iter().map(|c| c * c).sum();
        -0.25 * v2 * t + self.omega * t
    }
}

/// Modulation parameters (ω̃_k, y_k, μ̃_k).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulatedParams {
    pub omega_tilde: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub mu_tilde: Vec<f64>,
}

impl ModulatedParams {
    /// `(ω_k, 0, μ_k)`.
    pub fn unmodulated(specs: &[SolitonSpec]) -> Self {
        Self {
            omega_tilde: specs.iter().map(|s| s.omega).collect(),
            y: specs.iter().map(|s| vec![0.0; s.v.len()]).collect(),
            mu_tilde: specs.iter().map(|s| s.mu).collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.omega_tilde.len()
    }

    /// Flattened `[ω̃_k, y_k…, μ̃_k]` per soliton.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for k in 0..self.k() {
            out.push(self.omega_tilde[k]);
            out.extend_from_slice(&self.y[k]);
            out.push(self.mu_tilde[k]);
        }
        out
    }

    pub fn from_vec(x: &[f64], k: usize, d: usize) -> Self {
        let stride = d + 2;
        assert_eq!(x.len(), k * stride);
        let mut p = Self { omega_tilde: Vec::with_capacity(k), y: Vec::with_capacity(k), mu_tilde: Vec::with_capacity(k) };
        for c in x.chunks(stride) {
            p.omega_tilde.push(c[0]);
            p.y.push(c[1..1 + d].to_vec());
            p.mu_tilde.push(c[d + 1]);
        }
        p
    }
}

/// Complex field on every node of a grid; masked nodes hold exact zeros.
#[derive(Clone, Debug)]
pub struct Field {
    pub grid: Arc<ExteriorGrid>,
    pub values: Vec<Complex64>,
    pub t: f64,
}

impl Field {
    pub fn zeros(grid: &Arc<ExteriorGrid>, t: f64) -> Self {
        Self { grid: grid.clone(), values: vec![Complex64::new(0.0, 0.0); grid.n_nodes()], t }
    }

    /// Zeroes every obstacle and box-boundary node.
    pub fn enforce_mask(&mut self) {
        for (v, k) in self.values.iter_mut().zip(&self.grid.mask) {
            if *k != crate::geometry::NodeKind::Exterior {
                *v = Complex64::new(0.0, 0.0);
            }
        }
    }

    pub fn conj(&self) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|z| z.conj()).collect(), t: self.t }
    }

    /// `‖u‖_{L²}` by node sums.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// `⟨u, w⟩ = ∫ u w̄`.
    pub fn inner(&self, other: &Field) -> Complex64 {
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        s * self.grid.cell()
    }

    pub fn sub(&self, other: &Field) -> Field {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Field { grid: self.grid.clone(), values, t: self.t }
    }

    pub fn add_scaled(&mut self, a: Complex64, other: &Field) {
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: Complex64) {
        for x in self.values.iter_mut() {
            *x *= a;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

fn check_window(gs: &GroundState, omega: f64) -> Result<()> {
    if !(omega > 0.0) || ((omega / gs.omega) - 1.0).abs() > RESOLVE_WINDOW {
        return Err(Error::GroundStateResolve { omega_tilde: omega, omega: gs.omega });
    }
    Ok(())
}

struct Wave<'a> {
    gs: &'a GroundState,
    omega: f64,
    center: [f64; 2],
    v: [f64; 2],
    /// phase constant: θ(t) + μ
    phase0: f64,
}

impl Wave<'_> {
    /// `(Q(|x - c|) e^{iφ}, Q'(r) (x - c)/r e^{iφ})` at one point.
    fn eval(&self, x: [f64; 2], d: usize, with_gradient: bool) -> (Complex64, [Complex64; 2]) {
        let dx = [x[0] - self.center[0], if d == 2 { x[1] - self.center[1] } else { 0.0 }];
        let r = dx[0].hypot(dx[1]);
        let prof = self.gs.scaled(self.omega);
        let phase = 0.5 * (x[0] * self.v[0] + if d == 2 { x[1] * self.v[1] } else { 0.0 }) + self.phase0;
        let e = Complex64::from_polar(1.0, phase);
        if !with_gradient {
            return (e * prof.value(r), [Complex64::new(0.0, 0.0); 2]);
        }
        let (q, dq) = prof.value_and_derivative(r);
        let mut g = [Complex64::new(0.0, 0.0); 2];
        if r > 0.0 {
            for i in 0..d {
                g[i] = e * (dq * dx[i] / r);
            }
        }
        (e * q, g)
    }
}

fn wave<'a>(gs: &'a GroundState, spec: &SolitonSpec, omega: f64, y: &[f64], mu: f64, t: f64) -> Wave<'a> {
    let mut center = spec.center(t);
    for (c, yi) in center.iter_mut().zip(y) {
        *c += yi;
    }
    let mut v = [0.0; 2];
    v[..spec.v.len()].copy_from_slice(&spec.v);
    Wave { gs, omega, center, v, phase0: spec.theta(t) + mu }
}

/// Boosted soliton `e^{i(x·v/2 - |v|²t/4 + ωt + μ)} Q_ω(x - x⁰ - tv)`
/// without cutoff; masked nodes are zero.
pub fn free_soliton(gs: &GroundState, spec: &SolitonSpec, t: f64, grid: &Arc<ExteriorGrid>) -> Result<Field> {
    check_window(gs, spec.omega)?;
    let w = wave(gs, spec, spec.omega, &[], spec.mu, t);
    let mut f = Field::zeros(grid, t);
    for idx in 0..grid.n_nodes() {
        if grid.is_active(idx) {
            f.values[idx] = w.eval(grid.coords(idx), grid.d, false).0;
        }
    }
    Ok(f)
}

/// `R(t) = Σ_k Ψ · free_soliton_k(t)`.
pub fn ansatz_r(gss: &[GroundState], specs: &[SolitonSpec], psi: &CutoffField, t: f64, grid: &Arc<ExteriorGrid>) -> Result<Field> {
    let params = ModulatedParams::unmodulated(specs);
    Ok(ansatz_r_modulated(gss, specs, &params, psi, t, grid, false)?.total)
}

/// R̃(t), its per-soliton pieces and the direction fields `∂_j Q̃_k Ψ e^{iφ̃_k}`.
#[derive(Clone, Debug)]
pub struct ModulatedAnsatz {
    pub total: Field,
    pub components: Vec<Field>,
    /// `directions[k][j]`; empty when not requested
    pub directions: Vec<Vec<Field>>,
}

/// Modulated ansatz with profile `Q_{ω̃_k}(x - α_k(t) - y_k)` and phase
/// `x·v_k/2 + θ_k(t) + μ̃_k`, where θ_k keeps the unmodulated ω_k.
pub fn ansatz_r_modulated(
    gss: &[GroundState],
    specs: &[SolitonSpec],
    params: &ModulatedParams,
    psi: &CutoffField,
    t: f64,
    grid: &Arc<ExteriorGrid>,
    with_directions: bool,
) -> Result<ModulatedAnsatz> {
    let k = specs.len();
    if gss.len() != k || params.k() != k {
        return Err(Error::InvalidInput("ground states, specs and parameters differ in count".into()));
    }
    let d = grid.d;
    let mut components = Vec::with_capacity(k);
    let mut directions = Vec::with_capacity(k);
    for i in 0..k {
        check_window(&gss[i], params.omega_tilde[i])?;
        let w = wave(&gss[i], &specs[i], params.omega_tilde[i], &params.y[i], params.mu_tilde[i], t);
        let mut c = Field::zeros(grid, t);
        let mut dirs: Vec<Field> = if with_directions { (0..d).map(|_| Field::zeros(grid, t)).collect() } else { Vec::new() };
        for idx in 0..grid.n_nodes() {
            let cut = psi.values[idx];
            if !grid.is_active(idx) || cut == 0.0 {
                continue;
            }
            let (v, g) = w.eval(grid.coords(idx), d, with_directions);
            c.values[idx] = v * cut;
            for (j, df) in dirs.iter_mut().enumerate() {
                df.values[idx] = g[j] * cut;
            }
        }
        components.push(c);
        directions.push(dirs);
    }
    let mut total = Field::zeros(grid, t);
    for c in &components {
        total.add_scaled(Complex64::new(1.0, 0.0), c);
    }
    Ok(ModulatedAnsatz { total, components, directions })
}

/// Everything needed to evaluate R(t) and R̃(t) on one grid.
#[derive(Clone, Debug)]
pub struct Ansatz {
    pub grid: Arc<ExteriorGrid>,
    pub gss: Vec<GroundState>,
    pub specs: Vec<SolitonSpec>,
    pub psi: CutoffField,
}

impl Ansatz {
    pub fn new(grid: Arc<ExteriorGrid>, gss: Vec<GroundState>, specs: Vec<SolitonSpec>, psi: CutoffField) -> Result<Self> {
        if gss.len() != specs.len() || specs.is_empty() {
            return Err(Error::InvalidInput("need one ground state per soliton".into()));
        }
        if psi.values.len() != grid.n_nodes() {
            return Err(Error::InvalidInput("cutoff does not match grid".into()));
        }
        for s in &specs {
            s.validate(grid.d)?;
        }
        Ok(Self { grid, gss, specs, psi })
    }

    pub fn p(&self) -> f64 {
        self.gss[0].p
    }

    pub fn r(&self, t: f64) -> Result<Field> {
        ansatz_r(&self.gss, &self.specs, &self.psi, t, &self.grid)
    }

    pub fn modulated(&self, params: &ModulatedParams, t: f64, with_directions: bool) -> Result<ModulatedAnsatz> {
        ansatz_r_modulated(&self.gss, &self.specs, params, &self.psi, t, &self.grid, with_directions)
    }
}
