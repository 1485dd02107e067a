//! Conserved and localized quantities, tail mass, the linearized form H_K
//! and its constrained spectrum.

use crate::ansatz::{Field, ModulatedAnsatz, SolitonSpec};
use crate::error::{Error, Result};
use crate::geometry::{traveling_weights, ExteriorGrid};
use crate::linalg::CsrMatrix;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Real dimension up to which the constrained eigenproblem is solved densely.
pub const DENSE_LIMIT: usize = 5000;

pub fn mass(u: &Field) -> f64 {
    u.grid.cell() * u.values.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// `∫|∇u|²` by forward differences over every axis edge; masked values are
/// zero, so this equals `-⟨Δ_h u, u⟩`.
pub fn gradient_sq(u: &Field) -> f64 {
    let g = &u.grid;
    let inv_h2 = 1.0 / (g.h * g.h);
    let mut acc = 0.0;
    for idx in 0..g.n_nodes() {
        let [i, j] = g.split(idx);
        if i + 1 < g.n {
            acc += (u.values[idx + 1] - u.values[idx]).norm_sqr();
        }
        if g.d == 2 && j + 1 < g.n {
            acc += (u.values[idx + g.n] - u.values[idx]).norm_sqr();
        }
    }
    acc * inv_h2 * g.cell()
}

/// `∫|u|^{p+1}`.
pub fn potential(u: &Field, p: f64) -> f64 {
    let e = 0.5 * (p + 1.0);
    let sum: f64 = if e == e.round() {
        u.values.iter().map(|z| z.norm_sqr().powi(e as i32)).sum()
    } else {
        u.values.iter().map(|z| z.norm_sqr().powf(e)).sum()
    };
    u.grid.cell() * sum
}

/// `½∫|∇u|² - ∫|u|^{p+1}/(p+1)`.
pub fn energy(u: &Field, p: f64) -> f64 {
    0.5 * gradient_sq(u) - potential(u, p) / (p + 1.0)
}

pub fn h1_norm(u: &Field) -> f64 {
    (mass(u) + gradient_sq(u)).sqrt()
}

/// `(mass, energy, ‖u‖_{H¹})`.
pub fn mass_energy_h1(u: &Field, p: f64) -> (f64, f64, f64) {
    let m = mass(u);
    let g = gradient_sq(u);
    (m, 0.5 * g - potential(u, p) / (p + 1.0), (m + g).sqrt())
}

/// Centred difference along `axis` with zero extension across the mask.
pub fn centered_gradient(u: &Field, axis: usize) -> Vec<Complex64> {
    let g = &u.grid;
    let inv = 0.5 / g.h;
    let mut out = vec![Complex64::new(0.0, 0.0); g.n_nodes()];
    for (idx, o) in out.iter_mut().enumerate() {
        if g.is_active(idx) {
            let (a, b) = g.neighbours(idx, axis);
            *o = (u.values[b] - u.values[a]) * inv;
        }
    }
    out
}

/// `Im ∫ ∇u ū w` for a node weight `w` (all ones when `None`).
fn weighted_momentum(u: &Field, grads: &[Vec<Complex64>], w: Option<&[f64]>) -> Vec<f64> {
    grads
        .iter()
        .map(|gr| {
            let s: f64 = gr
                .iter()
                .zip(&u.values)
                .enumerate()
                .map(|(i, (a, b))| (a * b.conj()).im * w.map_or(1.0, |w| w[i]))
                .sum();
            s * u.grid.cell()
        })
        .collect()
}

/// `P = Im ∫ ∇u ū`.
pub fn momentum(u: &Field) -> Vec<f64> {
    let grads: Vec<_> = (0..u.grid.d).map(|a| centered_gradient(u, a)).collect();
    weighted_momentum(u, &grads, None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizedReport {
    pub t: f64,
    /// `M_k = ∫|u|² φ_k`
    pub m: Vec<f64>,
    /// `P_k = Im ∫ ∇u ū φ_k`
    pub p: Vec<Vec<f64>>,
    /// `J = Σ_k (ω_k + |v_k|²/4) M_k - v_k·P_k`
    pub j: f64,
    /// `G = E(u) + J`
    pub g: f64,
    pub mass: f64,
    pub energy: f64,
}

pub fn localized_quantities(u: &Field, specs: &[SolitonSpec], big_lambda: f64, p: f64) -> Result<LocalizedReport> {
    let weights = traveling_weights(specs, big_lambda, u.t, &u.grid)?;
    let grads: Vec<_> = (0..u.grid.d).map(|a| centered_gradient(u, a)).collect();
    let dens: Vec<f64> = u.values.iter().map(|z| z.norm_sqr()).collect();
    let mut m = Vec::with_capacity(specs.len());
    let mut pk = Vec::with_capacity(specs.len());
    let mut j = 0.0;
    for (s, w) in specs.iter().zip(&weights) {
        let mk = u.grid.cell() * dens.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        let pv = weighted_momentum(u, &grads, Some(w));
        let v2: f64 = s.v.iter().map(|c| c * c).sum();
        j += (s.omega + 0.25 * v2) * mk - s.v.iter().zip(&pv).map(|(a, b)| a * b).sum::<f64>();
        m.push(mk);
        pk.push(pv);
    }
    let (total, e, _) = mass_energy_h1(u, p);
    Ok(LocalizedReport { t: u.t, m, p: pk, j, g: e + j, mass: total, energy: e })
}

/// `∫_{|x| ≥ M} |u|²`.
pub fn tail_mass(u: &Field, radius: f64) -> Result<f64> {
    let g = &u.grid;
    if !(radius >= 0.0 && radius < g.l) {
        return Err(Error::MOutOfBox { m: radius, l: g.l });
    }
    let s: f64 = u
        .values
        .iter()
        .enumerate()
        .filter(|(idx, _)| {
            let x = g.coords(*idx);
            x[0].hypot(x[1]) >= radius
        })
        .map(|(_, z)| z.norm_sqr())
        .sum();
    Ok(s * g.cell())
}

/// Real symmetric realization of H_K on `(Re h, Im h)` over active nodes,
/// scaled so that `H_K(h, h) = h^d xᵀ A x`.
#[derive(Clone, Debug)]
pub struct QuadraticForm {
    pub grid: Arc<ExteriorGrid>,
    /// node index of each active unknown
    pub active: Vec<usize>,
    pub matrix: CsrMatrix,
    /// constraint vectors of length 2N
    pub constraints: Vec<Vec<f64>>,
    /// `max|A - Aᵀ| / max|A|` of the assembled operator
    pub symmetry_defect: f64,
}

impl QuadraticForm {
    pub fn n(&self) -> usize {
        self.active.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.active.len()
    }

    /// Real coordinates of a field.
    pub fn to_real(&self, h: &Field) -> Vec<f64> {
        let n = self.n();
        let mut x = vec![0.0; 2 * n];
        for (i, &idx) in self.active.iter().enumerate() {
            x[i] = h.values[idx].re;
            x[n + i] = h.values[idx].im;
        }
        x
    }

    pub fn to_field(&self, x: &[f64], t: f64) -> Field {
        let n = self.n();
        let mut f = Field::zeros(&self.grid, t);
        for (i, &idx) in self.active.iter().enumerate() {
            f.values[idx] = Complex64::new(x[i], x[n + i]);
        }
        f
    }

    /// `H_K(h, h)` through the assembled operator.
    pub fn evaluate(&self, h: &Field) -> f64 {
        let x = self.to_real(h);
        let mut ax = vec![0.0; x.len()];
        self.matrix.mul_vec(&x, &mut ax);
        self.grid.cell() * x.iter().zip(&ax).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Same form with the constraint set replaced.
    pub fn with_constraints(&self, constraints: Vec<Vec<f64>>) -> Self {
        Self { constraints, ..self.clone() }
    }
}

/// Assembles H_K at time `t` from the modulated components and directions.
pub fn assemble_hk(ansatz: &ModulatedAnsatz, specs: &[SolitonSpec], big_lambda: f64, t: f64, p: f64) -> Result<QuadraticForm> {
    let grid = ansatz.total.grid.clone();
    let d = grid.d;
    let weights = traveling_weights(specs, big_lambda, t, &grid)?;
    let active: Vec<usize> = (0..grid.n_nodes()).filter(|i| grid.is_active(*i)).collect();
    let n = active.len();
    let mut pos = vec![usize::MAX; grid.n_nodes()];
    for (i, &idx) in active.iter().enumerate() {
        pos[idx] = i;
    }
    let inv_h2 = 1.0 / (grid.h * grid.h);
    let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(n * (8 + 6 * d));
    for (i, &idx) in active.iter().enumerate() {
        let mut da = 2.0 * d as f64 * inv_h2;
        let mut db = da;
        let mut off = 0.0;
        for axis in 0..d {
            let (lo, hi) = grid.neighbours(idx, axis);
            for nb in [lo, hi] {
                if pos[nb] != usize::MAX {
                    trip.push((i, pos[nb], -inv_h2));
                    trip.push((n + i, n + pos[nb], -inv_h2));
                }
            }
        }
        for (k, s) in specs.iter().enumerate() {
            let r = ansatz.components[k].values[idx];
            let rho = r.norm();
            if rho > 0.0 {
                let base = rho.powf(p - 1.0);
                let (c, sn) = (r.re / rho, r.im / rho);
                da -= base * (1.0 + (p - 1.0) * c * c);
                db -= base * (1.0 + (p - 1.0) * sn * sn);
                off -= base * (p - 1.0) * c * sn;
            }
            let v2: f64 = s.v.iter().map(|c| c * c).sum();
            let phi = weights[k][idx];
            da += (s.omega + 0.25 * v2) * phi;
            db += (s.omega + 0.25 * v2) * phi;
            // -v·(Φ D - Dᵀ Φ)/2 couples Re h to Im h
            for axis in 0..d {
                let vj = s.v[axis];
                if vj == 0.0 {
                    continue;
                }
                let (lo, hi) = grid.neighbours(idx, axis);
                if pos[hi] != usize::MAX {
                    let c = -vj * (phi + weights[k][hi]) / (4.0 * grid.h);
                    trip.push((i, n + pos[hi], c));
                    trip.push((n + pos[hi], i, c));
                }
                if pos[lo] != usize::MAX {
                    let c = vj * (phi + weights[k][lo]) / (4.0 * grid.h);
                    trip.push((i, n + pos[lo], c));
                    trip.push((n + pos[lo], i, c));
                }
            }
        }
        trip.push((i, i, da));
        trip.push((n + i, n + i, db));
        if off != 0.0 {
            trip.push((i, n + i, off));
            trip.push((n + i, i, off));
        }
    }
    let matrix = CsrMatrix::from_triplets(2 * n, 2 * n, trip);
    let symmetry_defect = matrix.symmetry_defect();
    let mut constraints = Vec::with_capacity(specs.len() * (d + 2));
    let real_vec = |f: &Field, rot: bool| -> Vec<f64> {
        let mut x = vec![0.0; 2 * n];
        for (i, &idx) in active.iter().enumerate() {
            let z = f.values[idx];
            // Re⟨f, h⟩ = Σ (f_re a + f_im b);  Im⟨f, h⟩ = Σ (f_im a - f_re b)
            if rot {
                x[i] = z.im;
                x[n + i] = -z.re;
            } else {
                x[i] = z.re;
                x[n + i] = z.im;
            }
        }
        x
    };
    for k in 0..specs.len() {
        if ansatz.directions[k].len() != d {
            return Err(Error::InvalidInput("modulated ansatz lacks direction fields".into()));
        }
        for dir in &ansatz.directions[k] {
            constraints.push(real_vec(dir, false));
        }
        constraints.push(real_vec(&ansatz.components[k], false));
        constraints.push(real_vec(&ansatz.components[k], true));
    }
    let form = QuadraticForm { grid, active, matrix, constraints, symmetry_defect };
    constraint_basis(&form)?;
    Ok(form)
}

/// `H_K(h, h)` by direct quadrature of its integrand, independent of the
/// assembled operator.
pub fn hk_quadrature(h: &Field, ansatz: &ModulatedAnsatz, specs: &[SolitonSpec], big_lambda: f64, t: f64, p: f64) -> Result<f64> {
    let weights = traveling_weights(specs, big_lambda, t, &h.grid)?;
    let grads: Vec<_> = (0..h.grid.d).map(|a| centered_gradient(h, a)).collect();
    let mut total = gradient_sq(h);
    for (k, s) in specs.iter().enumerate() {
        let mut pot = 0.0;
        let mut loc = 0.0;
        for (idx, hz) in h.values.iter().enumerate() {
            let r = ansatz.components[k].values[idx];
            let rho = r.norm();
            if rho > 0.0 {
                let proj = (r * hz.conj()).re / rho;
                pot += rho.powf(p - 1.0) * (hz.norm_sqr() + (p - 1.0) * proj * proj);
            }
            loc += weights[k][idx] * hz.norm_sqr();
        }
        let v2: f64 = s.v.iter().map(|c| c * c).sum();
        let mom = weighted_momentum(h, &grads, Some(&weights[k]));
        let drift: f64 = s.v.iter().zip(&mom).map(|(a, b)| a * b).sum();
        total += h.grid.cell() * ((s.omega + 0.25 * v2) * loc - pot) - drift;
    }
    Ok(total)
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    pub lambda_min: f64,
    pub eigenvector: Field,
    /// `‖P A P x - λ x‖ / ‖A‖`
    pub residual: f64,
    pub n_constraints: usize,
    /// active nodes
    pub n: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub lambda_min: f64,
    pub n_constraints: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub residual: f64,
}

impl Spectrum {
    pub fn report(&self) -> SpectrumReport {
        SpectrumReport { lambda_min: self.lambda_min, n_constraints: self.n_constraints, n: self.n, residual: self.residual }
    }
}

/// Orthonormal basis of the constraint span; rejects dependent rows.
fn constraint_basis(form: &QuadraticForm) -> Result<DMatrix<f64>> {
    let dim = form.dim();
    let m = form.constraints.len();
    if m == 0 {
        return Ok(DMatrix::zeros(dim, 0));
    }
    if m >= dim {
        return Err(Error::SingularConstraints(0.0));
    }
    let mut c = DMatrix::zeros(dim, m);
    for (j, row) in form.constraints.iter().enumerate() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::SingularConstraints(0.0));
        }
        for (i, v) in row.iter().enumerate() {
            c[(i, j)] = v / norm;
        }
    }
    let sv = c.clone().svd(false, false).singular_values;
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(smin > 1e-8) {
        return Err(Error::SingularConstraints(smin));
    }
    let q = c.qr().q();
    Ok(q)
}

/// Smallest eigenvalue of H_K on the orthogonal complement of the constraints.
pub fn constrained_min_eig(form: &QuadraticForm) -> Result<Spectrum> {
    if form.dim() <= DENSE_LIMIT {
        dense_min_eig(form)
    } else {
        lanczos_min_eig(form)
    }
}

/// As [`constrained_min_eig`] but always through the iterative path.
pub fn constrained_min_eig_iterative(form: &QuadraticForm) -> Result<Spectrum> {
    lanczos_min_eig(form)
}

fn finish(form: &QuadraticForm, basis: &DMatrix<f64>, x: DVector<f64>, lambda: f64) -> Spectrum {
    let px = project(basis, &x);
    let mut ax = vec![0.0; px.len()];
    form.matrix.mul_vec(px.as_slice(), &mut ax);
    let papx = project(basis, &DVector::from_vec(ax));
    let res = (papx - &px * lambda).norm() / form.matrix.gershgorin_bound().max(f64::MIN_POSITIVE);
    Spectrum {
        lambda_min: lambda,
        eigenvector: form.to_field(px.as_slice(), 0.0),
        residual: res,
        n_constraints: form.constraints.len(),
        n: form.n(),
    }
}

fn project(basis: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    if basis.ncols() == 0 {
        return x.clone();
    }
    x - basis * (basis.transpose() * x)
}

fn dense_min_eig(form: &QuadraticForm) -> Result<Spectrum> {
    let basis = constraint_basis(form)?;
    let a = form.matrix.to_dense();
    let b = if basis.ncols() == 0 {
        a
    } else {
        // P A P + s U Uᵀ with s above the spectrum of A pushes the
        // constraint directions to the top.
        let s = 2.0 * form.matrix.gershgorin_bound() + 1.0;
        let au = &a * &basis;
        let ut_a = au.transpose();
        let utau = basis.transpose() * &au;
        let mut b = a - &au * basis.transpose() - &basis * &ut_a + &basis * utau * basis.transpose();
        b += &basis * basis.transpose() * s;
        // restore exact symmetry lost to rounding
        let bt = b.transpose();
        (b + bt) * 0.5
    };
    let eig = SymmetricEigen::try_new(b, f64::EPSILON, 0)
        .ok_or_else(|| Error::EigSolveFailed("dense symmetric eigensolver did not converge".into()))?;
    let (imin, lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc });
    if !lambda.is_finite() {
        return Err(Error::EigSolveFailed("non-finite eigenvalue".into()));
    }
    let x = eig.eigenvectors.column(imin).into_owned();
    Ok(finish(form, &basis, x, lambda))
}

fn lanczos_min_eig(form: &QuadraticForm) -> Result<Spectrum> {
    let basis = constraint_basis(form)?;
    let dim = form.dim();
    let free = dim - basis.ncols();
    let steps = free.min(300);
    let scale = form.matrix.gershgorin_bound().max(f64::MIN_POSITIVE);
    let apply = |x: &DVector<f64>| -> DVector<f64> {
        let mut ax = vec![0.0; dim];
        form.matrix.mul_vec(x.as_slice(), &mut ax);
        project(&basis, &DVector::from_vec(ax))
    };
    // deterministic start with components in every direction
    let mut start = DVector::from_fn(dim, |i, _| 1.0 + ((i * 7919) % 104_729) as f64 / 104_729.0);
    let mut best = (f64::INFINITY, start.clone());
    for _cycle in 0..40 {
        start = project(&basis, &start);
        let nrm = start.norm();
        if nrm == 0.0 {
            return Err(Error::EigSolveFailed("start vector lies in the constraint span".into()));
        }
        let mut q: Vec<DVector<f64>> = vec![start / nrm];
        let mut alpha = Vec::with_capacity(steps);
        let mut beta: Vec<f64> = Vec::with_capacity(steps);
        for j in 0..steps {
            let mut w = apply(&q[j]);
            let a = q[j].dot(&w);
            alpha.push(a);
            // full reorthogonalization, twice for stability
            for _ in 0..2 {
                for qi in &q {
                    let c = qi.dot(&w);
                    w -= qi * c;
                }
                w = project(&basis, &w);
            }
            let b = w.norm();
            if j + 1 == steps || b <= 1e-13 * scale {
                break;
            }
            beta.push(b);
            q.push(w / b);
        }
        let m = alpha.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (imin, theta) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc });
        let y = eig.eigenvectors.column(imin);
        let mut x = DVector::zeros(dim);
        for (i, qi) in q.iter().take(m).enumerate() {
            x += qi * y[i];
        }
        let x = x.normalize();
        let r = (apply(&x) - &x * theta).norm();
        best = (theta, x.clone());
        if r <= 1e-8 * scale {
            return Ok(finish(form, &basis, best.1, best.0));
        }
        start = x;
    }
    let _ = best;
    Err(Error::EigSolveFailed("Lanczos iteration did not converge".into()))
}
