//! Obstacles, masked Cartesian grids of the exterior domain, the obstacle
//! cutoff Ψ, the traveling partition of unity φ_k, the velocity frame and σ_0.

use crate::ansatz::SolitonSpec;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Compact strictly convex obstacle Θ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Obstacle {
    Interval1d {
        center: f64,
        half_width: f64,
    },
    Disc2d {
        center: [f64; 2],
        radius: f64,
    },
    Ellipse2d {
        center: [f64; 2],
        semi_axes: [f64; 2],
        /// rotation of the first semi-axis from the x₁ axis, radians
        #[serde(default)]
        angle: f64,
    },
}

impl Obstacle {
    pub fn dim(&self) -> usize {
        match self {
            Obstacle::Interval1d { .. } => 1,
            _ => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Obstacle::Interval1d { center, half_width } => center.is_finite() && *half_width > 0.0 && half_width.is_finite(),
            Obstacle::Disc2d { center, radius } => center.iter().all(|c| c.is_finite()) && *radius > 0.0 && radius.is_finite(),
            Obstacle::Ellipse2d { center, semi_axes, angle } => {
                center.iter().all(|c| c.is_finite())
                    && semi_axes.iter().all(|a| *a > 0.0 && a.is_finite())
                    && angle.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("degenerate obstacle {self:?}")))
        }
    }

    /// Euclidean distance from `x` to Θ; zero inside.
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            Obstacle::Interval1d { center, half_width } => ((x[0] - center).abs() - half_width).max(0.0),
            Obstacle::Disc2d { center, radius } => ((x[0] - center[0]).hypot(x[1] - center[1]) - radius).max(0.0),
            Obstacle::Ellipse2d { center, semi_axes, angle } => {
                let (s, c) = angle.sin_cos();
                let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                let u = c * dx + s * dy;
                let w = -s * dx + c * dy;
                ellipse_distance(semi_axes[0], semi_axes[1], u, w)
            }
        }
    }

    /// Closed obstacle membership (boundary included).
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Obstacle::Interval1d { center, half_width } => (x[0] - center).abs() <= *half_width,
            Obstacle::Disc2d { center, radius } => (x[0] - center[0]).hypot(x[1] - center[1]) <= *radius,
            Obstacle::Ellipse2d { center, semi_axes, angle } => {
                let (s, c) = angle.sin_cos();
                let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                let u = (c * dx + s * dy) / semi_axes[0];
                let w = (-s * dx + c * dy) / semi_axes[1];
                u * u + w * w <= 1.0
            }
        }
    }

    /// Radius of a centred ball containing Θ, measured from the origin.
    pub fn outer_radius(&self) -> f64 {
        match self {
            Obstacle::Interval1d { center, half_width } => center.abs() + half_width,
            Obstacle::Disc2d { center, radius } => center[0].hypot(center[1]) + radius,
            Obstacle::Ellipse2d { center, semi_axes, .. } => center[0].hypot(center[1]) + semi_axes[0].max(semi_axes[1]),
        }
    }

    /// Per-axis bounding box `[lo, hi]` of Θ.
    fn bounds(&self) -> Vec<(f64, f64)> {
        match self {
            Obstacle::Interval1d { center, half_width } => vec![(center - half_width, center + half_width)],
            Obstacle::Disc2d { center, radius } => center.iter().map(|c| (c - radius, c + radius)).collect(),
            Obstacle::Ellipse2d { center, semi_axes, angle } => {
                let (s, c) = angle.sin_cos();
                let ex = (semi_axes[0] * c).hypot(semi_axes[1] * s);
                let ey = (semi_axes[0] * s).hypot(semi_axes[1] * c);
                vec![(center[0] - ex, center[0] + ex), (center[1] - ey, center[1] + ey)]
            }
        }
    }
}

/// Distance from `(y0, y1)` to the ellipse `(x/a)² + (y/b)² ≤ 1`.
fn ellipse_distance(a: f64, b: f64, y0: f64, y1: f64) -> f64 {
    let (y0, y1) = (y0.abs(), y1.abs());
    if (y0 / a).powi(2) + (y1 / b).powi(2) <= 1.0 {
        return 0.0;
    }
    // Closest point satisfies x_i = e_i² y_i / (t + e_i²) for the root t > 0 of
    // F(t) = Σ (e_i y_i / (t + e_i²))² - 1, which is decreasing in t.
    let f = |t: f64| (a * y0 / (t + a * a)).powi(2) + (b * y1 / (t + b * b)).powi(2) - 1.0;
    let mut lo = 0.0;
    let mut hi = a.max(b) * y0.hypot(y1);
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let x0 = a * a * y0 / (t + a * a);
    let x1 = b * b * y1 / (t + b * b);
    (y0 - x0).hypot(y1 - x1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Exterior,
    Obstacle,
    BoxBoundary,
}

/// Uniform grid on `[-L, L]^d` with nodes `x_i = -L + i h`, x₁ fastest.
#[derive(Clone, Debug)]
pub struct ExteriorGrid {
    pub d: usize,
    pub l: f64,
    pub h: f64,
    /// nodes per axis
    pub n: usize,
    pub obstacle: Option<Obstacle>,
    pub mask: Vec<NodeKind>,
}

impl ExteriorGrid {
    pub fn new(d: usize, l: f64, h: f64, obstacle: Option<Obstacle>) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(Error::InvalidInput(format!("dimension {d} not supported")));
        }
        if !(l > 0.0 && h > 0.0 && l.is_finite() && h.is_finite()) {
            return Err(Error::InvalidInput(format!("grid L = {l}, h = {h} must be positive")));
        }
        let cells = 2.0 * l / h;
        let n_cells = cells.round();
        if (cells - n_cells).abs() > 1e-8 * cells || n_cells < 4.0 {
            return Err(Error::InvalidInput(format!("2L/h = {cells} must be an integer ≥ 4")));
        }
        if let Some(ob) = &obstacle {
            ob.validate()?;
            if ob.dim() != d {
                return Err(Error::InvalidInput("obstacle dimension differs from grid".into()));
            }
        }
        let n = n_cells as usize + 1;
        let total = n.pow(d as u32);
        let mut grid = Self { d, l, h, n, obstacle, mask: Vec::with_capacity(total) };
        for idx in 0..total {
            let kind = if grid.on_box_boundary(idx) {
                NodeKind::BoxBoundary
            } else if grid.obstacle.as_ref().is_some_and(|ob| ob.contains(&grid.coords(idx)[..d])) {
                NodeKind::Obstacle
            } else {
                NodeKind::Exterior
            };
            grid.mask.push(kind);
        }
        Ok(grid)
    }

    pub fn n_nodes(&self) -> usize {
        self.mask.len()
    }

    /// Cell measure `h^d`.
    pub fn cell(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    pub fn axis(&self, i: usize) -> f64 {
        -self.l + i as f64 * self.h
    }

    /// Per-axis indices of a flat node index.
    pub fn split(&self, idx: usize) -> [usize; 2] {
        if self.d == 1 {
            [idx, 0]
        } else {
            [idx % self.n, idx / self.n]
        }
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.n * j
    }

    /// Node coordinates; the second entry is 0 in 1D.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.split(idx);
        if self.d == 1 {
            [self.axis(i), 0.0]
        } else {
            [self.axis(i), self.axis(j)]
        }
    }

    fn on_box_boundary(&self, idx: usize) -> bool {
        let [i, j] = self.split(idx);
        let edge = |k: usize| k == 0 || k == self.n - 1;
        edge(i) || (self.d == 2 && edge(j))
    }

    pub fn is_active(&self, idx: usize) -> bool {
        self.mask[idx] == NodeKind::Exterior
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|k| **k == NodeKind::Exterior).count()
    }

    /// Flat indices of the axis neighbours of `idx` (minus, plus) along `axis`.
    pub fn neighbours(&self, idx: usize, axis: usize) -> (usize, usize) {
        let stride = if axis == 0 { 1 } else { self.n };
        (idx - stride, idx + stride)
    }

    pub fn node_counts(&self) -> Vec<usize> {
        vec![self.n; self.d]
    }

    /// Distance from `x` to the box boundary `max_i |x_i| = L`.
    pub fn distance_to_box(&self, x: &[f64]) -> f64 {
        x.iter().take(self.d).map(|c| self.l - c.abs()).fold(f64::INFINITY, f64::min)
    }

    /// Rejects spacings that under-resolve a profile width or a Galilean phase.
    pub fn check_resolution(&self, specs: &[SolitonSpec]) -> Result<()> {
        let omega_max = specs.iter().map(|s| s.omega).fold(0.0, f64::max);
        let v_max = specs.iter().map(|s| s.speed()).fold(0.0, f64::max);
        let mut bound = 1.0 / (4.0 * omega_max.sqrt());
        if v_max > 0.0 {
            bound = bound.min(2.0 * std::f64::consts::PI / (8.0 * v_max));
        }
        if self.h > bound * (1.0 + 1e-12) {
            return Err(Error::ConfigRejected(format!("grid spacing {} exceeds resolution bound {bound}", self.h)));
        }
        Ok(())
    }
}

/// Node-aligned real weight in [0, 1].
#[derive(Clone, Debug)]
pub struct CutoffField {
    pub values: Vec<f64>,
    /// transition band starts at distance δ and ends at 2δ; 0 for Ψ ≡ 1
    pub delta: f64,
}

impl CutoffField {
    pub fn ones(grid: &ExteriorGrid) -> Self {
        Self { values: vec![1.0; grid.n_nodes()], delta: 0.0 }
    }
}

/// Degree-7 smooth step: 0 for s ≤ -1, 1 for s ≥ 1, C³ in between.
pub fn smooth_step(s: f64) -> f64 {
    if s <= -1.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let x = 0.5 * (s + 1.0);
    let x4 = x * x * x * x;
    x4 * (35.0 + x * (-84.0 + x * (70.0 - 20.0 * x)))
}

/// `S'(s)`.
pub fn smooth_step_d1(s: f64) -> f64 {
    if s <= -1.0 || s >= 1.0 {
        return 0.0;
    }
    let x = 0.5 * (s + 1.0);
    // d/dx = 140 x³ (1 - x)³, chain factor 1/2
    70.0 * (x * (1.0 - x)).powi(3)
}

/// `S''(s)`.
pub fn smooth_step_d2(s: f64) -> f64 {
    if s <= -1.0 || s >= 1.0 {
        return 0.0;
    }
    let x = 0.5 * (s + 1.0);
    // d/dx [70 x³(1-x)³] = 210 x²(1-x)²(1 - 2x), chain factor 1/2
    105.0 * (x * (1.0 - x)).powi(2) * (1.0 - 2.0 * x)
}

/// Empirical `sup (S')²/S` and `sup (S'')²/S'` over `samples` interior points.
pub fn smooth_step_constants(samples: usize) -> (f64, f64) {
    let mut c1: f64 = 0.0;
    let mut c2: f64 = 0.0;
    for i in 1..samples {
        let s = -1.0 + 2.0 * i as f64 / samples as f64;
        let (v, d1, d2) = (smooth_step(s), smooth_step_d1(s), smooth_step_d2(s));
        if v > 0.0 {
            c1 = c1.max(d1 * d1 / v);
        }
        if d1 > 0.0 {
            c2 = c2.max(d2 * d2 / d1);
        }
    }
    (c1, c2)
}

/// Ψ = S(2 dist(x, Θ)/δ - 3): zero within δ of Θ, one beyond 2δ.
pub fn obstacle_cutoff(grid: &ExteriorGrid, obstacle: &Obstacle, delta: f64) -> Result<CutoffField> {
    if !(delta > 2.0 * grid.h) {
        return Err(Error::BandTooNarrow { delta, two_h: 2.0 * grid.h });
    }
    obstacle.validate()?;
    for (lo, hi) in obstacle.bounds() {
        if lo - 2.0 * delta <= -grid.l || hi + 2.0 * delta >= grid.l {
            return Err(Error::BandOutsideBox);
        }
    }
    let values = (0..grid.n_nodes())
        .map(|idx| {
            if grid.mask[idx] == NodeKind::Obstacle {
                return 0.0;
            }
            let x = grid.coords(idx);
            smooth_step(2.0 * obstacle.distance(&x[..grid.d]) / delta - 3.0)
        })
        .collect();
    Ok(CutoffField { values, delta })
}

/// Ψ for the grid's own obstacle, or Ψ ≡ 1 without one.
pub fn grid_cutoff(grid: &ExteriorGrid, delta: f64) -> Result<CutoffField> {
    match &grid.obstacle {
        Some(ob) => obstacle_cutoff(grid, ob, delta),
        None => Ok(CutoffField::ones(grid)),
    }
}

fn check_sorted(specs: &[SolitonSpec]) -> Result<()> {
    if specs.windows(2).any(|w| !(w[0].v[0] < w[1].v[0])) {
        return Err(Error::UnsortedVelocities);
    }
    Ok(())
}

/// Interface speeds `λ_k = (v_{k-1,1} + v_{k,1}) / 2`, k = 2..K.
pub fn interface_speeds(specs: &[SolitonSpec]) -> Result<Vec<f64>> {
    check_sorted(specs)?;
    Ok(specs.windows(2).map(|w| 0.5 * (w[0].v[0] + w[1].v[0])).collect())
}

/// Values of φ_1..φ_K at first coordinate `x1`.
pub fn weights_at(lambdas: &[f64], big_lambda: f64, t: f64, x1: f64, out: &mut [f64]) {
    let k = lambdas.len() + 1;
    let mut prev = 1.0;
    for i in 0..k - 1 {
        let s = smooth_step((x1 - lambdas[i] * t) / big_lambda);
        out[i] = prev - s;
        prev = s;
    }
    out[k - 1] = prev;
}

/// Traveling partition of unity φ_k, one node-aligned vector per soliton.
pub fn traveling_weights(specs: &[SolitonSpec], big_lambda: f64, t: f64, grid: &ExteriorGrid) -> Result<Vec<Vec<f64>>> {
    if !(big_lambda > 0.0) {
        return Err(Error::InvalidInput(format!("Λ = {big_lambda} must be positive")));
    }
    let lambdas = interface_speeds(specs)?;
    let k = specs.len();
    let mut out = vec![vec![0.0; grid.n_nodes()]; k];
    let mut buf = vec![0.0; k];
    for idx in 0..grid.n_nodes() {
        weights_at(&lambdas, big_lambda, t, grid.coords(idx)[0], &mut buf);
        for (w, b) in out.iter_mut().zip(&buf) {
            w[idx] = *b;
        }
    }
    Ok(out)
}

/// Orthonormal frame whose first axis `e1 = (cos θ, sin θ)` separates the
/// first velocity components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityFrame {
    pub angle: f64,
    /// `min_{k≠k'} |⟨v_k - v_k', e1⟩|`
    pub margin: f64,
}

impl VelocityFrame {
    /// Rows are the new basis vectors e1, e2.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.angle.sin_cos();
        [[c, s], [-s, c]]
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        if v.len() == 1 {
            return v.to_vec();
        }
        let m = self.matrix();
        vec![m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    pub fn is_identity(&self) -> bool {
        self.angle == 0.0
    }
}

fn frame_margin(velocities: &[Vec<f64>], angle: f64) -> f64 {
    let (s, c) = angle.sin_cos();
    let proj: Vec<f64> = velocities.iter().map(|v| c * v[0] + s * v.get(1).copied().unwrap_or(0.0)).collect();
    let mut m = f64::INFINITY;
    for i in 0..proj.len() {
        for j in i + 1..proj.len() {
            m = m.min((proj[i] - proj[j]).abs());
        }
    }
    m
}

/// Identity when the first components already differ, otherwise the best of
/// 360 one-degree rotations by separation margin.
pub fn velocity_frame(velocities: &[Vec<f64>]) -> Result<VelocityFrame> {
    for i in 0..velocities.len() {
        for j in i + 1..velocities.len() {
            if velocities[i] == velocities[j] {
                return Err(Error::DuplicateVelocity(i, j));
            }
        }
    }
    let identity = frame_margin(velocities, 0.0);
    if identity > 0.0 {
        return Ok(VelocityFrame { angle: 0.0, margin: identity });
    }
    let mut best = VelocityFrame { angle: 0.0, margin: identity };
    for deg in 1..360 {
        let angle = (deg as f64).to_radians();
        let margin = frame_margin(velocities, angle);
        if margin > best.margin {
            best = VelocityFrame { angle, margin };
        }
    }
    Ok(best)
}

/// `σ_0 = [min(v_{k+1,1} - v_{k,1}, √ω_k) / 16]²`.
pub fn sigma0(specs: &[SolitonSpec]) -> Result<f64> {
    check_sorted(specs)?;
    if specs.is_empty() || specs.iter().any(|s| !(s.omega > 0.0)) {
        return Err(Error::InvalidInput("σ_0 needs solitons with positive frequencies".into()));
    }
    let gaps = specs.windows(2).map(|w| w[1].v[0] - w[0].v[0]);
    let roots = specs.iter().map(|s| s.omega.sqrt());
    let m = gaps.chain(roots).fold(f64::INFINITY, f64::min);
    Ok((m / 16.0).powi(2))
}

/// Every soliton centre stays at least `10/√ω_k` inside the box on `[t0, tn]`.
pub fn check_box_adequacy(grid: &ExteriorGrid, specs: &[SolitonSpec], t0: f64, tn: f64) -> Result<()> {
    for (k, s) in specs.iter().enumerate() {
        let need = 10.0 / s.omega.sqrt();
        // linear trajectories: the minimum over the interval is at an endpoint
        for t in [t0, tn] {
            let c = s.center(t);
            let room = grid.distance_to_box(&c);
            if room < need {
                return Err(Error::ConfigRejected(format!(
                    "soliton {k} is {room:.3} from the box boundary at t = {t}, needs {need:.3}"
                )));
            }
        }
    }
    Ok(())
}
