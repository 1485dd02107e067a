//! Acceptance criteria, one PASS/FAIL line each.

use exterior_nls::ansatz::{free_soliton, Ansatz, Field, ModulatedParams, SolitonSpec};
use exterior_nls::evolver::{Evolver, SchemeConfig};
use exterior_nls::experiments::{run_construction, CauchyMatrix, ConstructionReport, GridConfig, RunConfig};
use exterior_nls::functionals::{assemble_hk, constrained_min_eig, hk_quadrature, localized_quantities, mass, mass_energy_h1};
use exterior_nls::geometry::{grid_cutoff, traveling_weights, CutoffField, ExteriorGrid, Obstacle};
use exterior_nls::groundstate::{radial_residual, solve_ground_state_default, solve_radial_profile, GroundState};
use exterior_nls::modulation::{decompose, ModulationContext};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

fn verdict(n: u32, name: &str, pass: bool, detail: String) -> bool {
    println!("{} criterion {n} ({name}): {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn ground_state(p: f64, d: usize, omega: f64) -> GroundState {
    static CACHE: OnceLock<Mutex<BTreeMap<(u64, usize, u64), GroundState>>> = OnceLock::new();
    let key = (p.to_bits(), d, omega.to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    if let Some(g) = cache.lock().unwrap().get(&key) {
        return g.clone();
    }
    let g = solve_ground_state_default(p, d, omega).unwrap();
    cache.lock().unwrap().insert(key, g.clone());
    g
}

fn line(l: f64, h: f64, obstacle: Option<Obstacle>) -> Arc<ExteriorGrid> {
    Arc::new(ExteriorGrid::new(1, l, h, obstacle).unwrap())
}

fn spec(omega: f64, v: f64, x0: f64, mu: f64) -> SolitonSpec {
    SolitonSpec { omega, v: vec![v], x0: vec![x0], mu }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn criterion_1_ground_state_residual() -> bool {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for p in [2.0, 3.0] {
        for d in [1usize, 2] {
            for omega in [0.5f64, 1.0, 4.0] {
                let rel = if p == 3.0 && d == 2 {
                    // L²-critical: the dynamical solver refuses it, the elliptic one does not
                    let r_max = 32.0 / omega.sqrt();
                    let (_, q, _) = solve_radial_profile(p, d, omega, r_max, 1 << 14).unwrap();
                    radial_residual(p, d, omega, r_max, &q) / q[0]
                } else {
                    let g = ground_state(p, d, omega);
                    g.residual() / g.peak()
                };
                worst = worst.max(rel);
            }
        }
    }
    // 1D closed forms: Q = [(p+1)ω/2]^{1/(p-1)} sech^{2/(p-1)}((p-1)√ω r/2)
    let mut sech_err = 0.0f64;
    for p in [2.0, 3.0] {
        for omega in [0.5, 1.0, 4.0] {
            let g = ground_state(p, 1, omega);
            let amp = ((p + 1.0) * omega / 2.0).powf(1.0 / (p - 1.0));
            let exact = |r: f64| amp * (1.0 / ((p - 1.0) * omega.sqrt() * r / 2.0).cosh()).powf(2.0 / (p - 1.0));
            let e = g.r_samples.iter().zip(&g.q_samples).map(|(r, q)| (q - exact(*r)).abs()).fold(0.0, f64::max) / amp;
            sech_err = sech_err.max(e);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-8 && sech_err <= 1e-6 && secs <= 5.0;
    verdict(1, "ground-state residual", pass, format!("max residual/peak {worst:.2e}, sech L∞ {sech_err:.2e}, {secs:.2}s"))
}

fn conservation_setup() -> (Arc<ExteriorGrid>, Evolver, Field, f64) {
    let grid = line(30.0, 0.02, None);
    let cfg = SchemeConfig { dt: 0.005, tol: 1e-14, stride: 0.5, ..SchemeConfig::default() };
    let ev = Evolver::new(grid.clone(), 3.0, cfg).unwrap();
    let u0 = free_soliton(&ground_state(3.0, 1, 1.0), &spec(1.0, 1.0, -2.5, 0.3), 0.0, &grid).unwrap();
    let (_, e0, _) = mass_energy_h1(&u0, 3.0);
    (grid, ev, u0, e0)
}

fn criterion_2_conservation_and_reversibility() -> bool {
    let start = Instant::now();
    let (_, ev, u0, e0) = conservation_setup();
    let m0 = mass(&u0);
    let fwd = ev.evolve_with(&u0, 0.0, 5.0, false, &mut []).unwrap();
    let mass_drift = fwd.diagnostics.iter().map(|d| (d.mass - m0).abs()).fold(0.0, f64::max) / m0;
    let energy_drift = fwd.diagnostics.iter().map(|d| (d.energy - e0).abs()).fold(0.0, f64::max) / e0.abs();
    let back = ev.evolve_with(fwd.last(), 5.0, 0.0, false, &mut []).unwrap();
    let round = back.last().sub(&u0).l2_norm() / u0.l2_norm();
    let secs = start.elapsed().as_secs_f64();
    let pass = mass_drift <= 1e-9 && energy_drift <= 1e-6 && round <= 1e-9 && secs <= 60.0;
    verdict(
        2,
        "conservation and reversibility",
        pass,
        format!("mass drift {mass_drift:.2e}, energy drift {energy_drift:.2e}, round trip {round:.2e}, {secs:.1}s")
    )
}

fn soliton_error(h: f64, dt: f64) -> (f64, f64) {
    let grid = line(21.0, h, None);
    let g = ground_state(3.0, 1, 1.0);
    let s = spec(1.0, 4.0, -10.0, 0.0);
    let ev = Evolver::new(grid.clone(), 3.0, SchemeConfig { dt, tol: 1e-13, stride: 0.25, ..SchemeConfig::default() }).unwrap();
    let u0 = free_soliton(&g, &s, 0.0, &grid).unwrap();
    let qnorm = u0.l2_norm();
    let mut worst = 0.0f64;
    let mut obs = |u: &Field| -> exterior_nls::Result<()> {
        let exact = free_soliton(&g, &s, u.t, &grid)?;
        worst = worst.max(u.sub(&exact).l2_norm());
        Ok(())
    };
    ev.evolve_with(&u0, 0.0, 5.0, false, &mut [&mut obs]).unwrap();
    (worst / qnorm, qnorm)
}

fn criterion_3_soliton_fidelity() -> bool {
    let start = Instant::now();
    let h = 0.00125;
    let ((coarse, _), (fine, _)) = std::thread::scope(|sc| {
        let a = sc.spawn(|| soliton_error(h, 1.0 / 320.0));
        let b = soliton_error(h, 1.0 / 640.0);
        (a.join().unwrap(), b)
    });
    let ratio = coarse / fine;
    let secs = start.elapsed().as_secs_f64();
    let pass = coarse <= 1e-3 && (3.4..=4.6).contains(&ratio) && secs <= 120.0;
    verdict(
        3,
        "soliton fidelity",
        pass,
        format!("max L² error/‖Q‖ {coarse:.3e} (dt 1/320), {fine:.3e} (dt 1/640), ratio {ratio:.3}, {secs:.1}s")
    )
}

fn pair_ansatz(obstacle: Option<Obstacle>, h: f64) -> Ansatz {
    let grid = line(30.0, h, obstacle);
    let psi = grid_cutoff(&grid, 0.5).unwrap();
    let specs = vec![spec(1.0, -1.0, -9.0, 0.4), spec(1.5, 1.0, 9.0, -0.3)];
    let gss = specs.iter().map(|s| ground_state(3.0, 1, s.omega)).collect();
    Ansatz::new(grid, gss, specs, psi).unwrap()
}

fn param_err(a: &ModulatedParams, b: &ModulatedParams) -> f64 {
    max_abs_diff(&a.to_vec(), &b.to_vec())
}

fn wrap(x: f64) -> f64 {
    let t = std::f64::consts::TAU;
    x - t * (x / t).round()
}

fn criterion_4_modulation_round_trip() -> bool {
    let start = Instant::now();
    let a = pair_ansatz(Some(Obstacle::Interval1d { center: 0.0, half_width: 1.0 }), 0.02);
    let base = ModulatedParams::unmodulated(&a.specs);
    let ctx = ModulationContext::with_radius(&a, f64::INFINITY);
    let mut rng = StdRng::seed_from_u64(7);
    let t = 0.4;
    let mut round_err = 0.0f64;
    let mut resid = 0.0f64;
    for trial in 0..12 {
        let mut planted = base.clone();
        for k in 0..2 {
            // corners first, then uniform draws inside ±10%
            let (so, sy, sm) = if trial < 4 {
                let c = |b: usize| if (trial >> b) & 1 == 0 { 1.0 } else { -1.0 };
                (c(0), c(1), c(0) * c(1))
            } else {
                (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            };
            planted.omega_tilde[k] *= 1.0 + 0.1 * so;
            planted.y[k][0] += 0.1 * sy;
            planted.mu_tilde[k] += 0.1 * std::f64::consts::TAU * sm;
        }
        let u = a.modulated(&planted, t, false).unwrap().total;
        let st = decompose(&u, &base, &ctx).unwrap();
        round_err = round_err.max(param_err(&st.params, &planted));
        resid = resid.max(st.residual_norm / u.l2_norm());
    }

    // gauge: u e^{iγ} shifts μ̃ by γ
    let planted = ModulatedParams { omega_tilde: vec![1.05, 1.4], y: vec![vec![0.05], vec![-0.08]], mu_tilde: vec![0.5, -0.1] };
    let u = a.modulated(&planted, t, false).unwrap().total;
    let st = decompose(&u, &base, &ctx).unwrap();
    let mut gauge_err = 0.0f64;
    for gamma in [0.3, -1.1, 2.5, -3.0] {
        let mut v = u.clone();
        v.scale(Complex64::from_polar(1.0, gamma));
        // the seed is rotated with the data
        let mut seed = base.clone();
        seed.mu_tilde.iter_mut().for_each(|m| *m += gamma);
        let sg = decompose(&v, &seed, &ctx).unwrap();
        for k in 0..2 {
            gauge_err = gauge_err.max((sg.params.omega_tilde[k] - st.params.omega_tilde[k]).abs());
            gauge_err = gauge_err.max((sg.params.y[k][0] - st.params.y[k][0]).abs());
            gauge_err = gauge_err.max(wrap(sg.params.mu_tilde[k] - st.params.mu_tilde[k] - gamma).abs());
        }
    }

    // translation: no obstacle, Ψ ≡ 1, shift by whole grid cells
    let free = pair_ansatz(None, 0.02);
    let ctx_free = ModulationContext::with_radius(&free, f64::INFINITY);
    let u = free.modulated(&planted, t, false).unwrap().total;
    let st = decompose(&u, &base, &ctx_free).unwrap();
    let mut trans_err = 0.0f64;
    for shift in [-7i64, 3, 12] {
        let mut v = Field::zeros(&free.grid, t);
        let n = v.values.len() as i64;
        for i in 0..n {
            let j = i - shift;
            if (0..n).contains(&j) {
                v.values[i as usize] = u.values[j as usize];
            }
        }
        v.enforce_mask();
        let offset = shift as f64 * free.grid.h;
        let sv = decompose(&v, &base, &ctx_free).unwrap();
        for k in 0..2 {
            trans_err = trans_err.max((sv.params.y[k][0] - st.params.y[k][0] - offset).abs());
            trans_err = trans_err.max((sv.params.omega_tilde[k] - st.params.omega_tilde[k]).abs());
            // the Galilean phase x·v/2 does not move with the data
            let dmu = -0.5 * offset * free.specs[k].v[0];
            trans_err = trans_err.max(wrap(sv.params.mu_tilde[k] - st.params.mu_tilde[k] - dmu).abs());
        }
    }

    // 2D translation, one soliton, Ψ ≡ 1
    let grid2 = Arc::new(ExteriorGrid::new(2, 14.0, 0.1, None).unwrap());
    let s2 = SolitonSpec { omega: 1.0, v: vec![0.5, -0.25], x0: vec![-0.5, 0.3], mu: 0.2 };
    let a2 = Ansatz::new(grid2.clone(), vec![ground_state(2.0, 2, 1.0)], vec![s2], CutoffField::ones(&grid2)).unwrap();
    let base2 = ModulatedParams::unmodulated(&a2.specs);
    let ctx2 = ModulationContext::with_radius(&a2, f64::INFINITY);
    let p2 = ModulatedParams { omega_tilde: vec![0.93], y: vec![vec![0.07, -0.04]], mu_tilde: vec![0.35] };
    let u2 = a2.modulated(&p2, 0.0, false).unwrap().total;
    let st2 = decompose(&u2, &base2, &ctx2).unwrap();
    round_err = round_err.max(param_err(&st2.params, &p2));
    resid = resid.max(st2.residual_norm / u2.l2_norm());
    let (si, sj) = (4i64, -3i64);
    let nside = grid2.n as i64;
    let mut v2 = Field::zeros(&grid2, 0.0);
    for j in 0..nside {
        for i in 0..nside {
            let (i0, j0) = (i - si, j - sj);
            if (0..nside).contains(&i0) && (0..nside).contains(&j0) {
                v2.values[grid2.index(i as usize, j as usize)] = u2.values[grid2.index(i0 as usize, j0 as usize)];
            }
        }
    }
    let sv2 = decompose(&v2, &base2, &ctx2).unwrap();
    trans_err = trans_err.max((sv2.params.y[0][0] - st2.params.y[0][0] - si as f64 * grid2.h).abs());
    trans_err = trans_err.max((sv2.params.y[0][1] - st2.params.y[0][1] - sj as f64 * grid2.h).abs());

    let secs = start.elapsed().as_secs_f64();
    let pass = round_err <= 1e-8 && resid <= 1e-10 && gauge_err <= 1e-8 && trans_err <= 1e-8 && secs <= 30.0;
    verdict(
        4,
        "modulation round trip",
        pass,
        format!(
            "planted error {round_err:.2e}, residual/‖u‖ {resid:.2e}, gauge {gauge_err:.2e}, translation {trans_err:.2e}, {secs:.1}s"
        )
    )
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|a, b| v[*a].total_cmp(&v[*b]));
        let mut r = vec![0.0; v.len()];
        for (pos, i) in idx.into_iter().enumerate() {
            r[i] = pos as f64;
        }
        r
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

fn pair_lambda_min(separation: f64) -> (f64, usize) {
    let grid = line(30.0, 0.1, None);
    let specs = vec![spec(1.0, -0.5, -separation / 2.0, 0.0), spec(1.0, 0.5, separation / 2.0, 0.0)];
    let gss = vec![ground_state(3.0, 1, 1.0); 2];
    let a = Ansatz::new(grid.clone(), gss, specs.clone(), CutoffField::ones(&grid)).unwrap();
    let m = a.modulated(&ModulatedParams::unmodulated(&specs), 0.0, true).unwrap();
    let form = assemble_hk(&m, &specs, 1.0, 0.0, 3.0).unwrap();
    let s = constrained_min_eig(&form).unwrap();
    (s.lambda_min, form.n())
}

fn criterion_5_coercivity() -> bool {
    let start = Instant::now();
    let grid = line(15.0, 0.05, None);
    let one = Ansatz::new(grid.clone(), vec![ground_state(3.0, 1, 1.0)], vec![spec(1.0, 0.0, 0.0, 0.0)], CutoffField::ones(&grid)).unwrap();
    let m = one.modulated(&ModulatedParams::unmodulated(&one.specs), 0.0, true).unwrap();
    let form = assemble_hk(&m, &one.specs, 1.0, 0.0, 3.0).unwrap();
    let single_c = constrained_min_eig(&form).unwrap().lambda_min;
    let single_u = constrained_min_eig(&form.with_constraints(vec![])).unwrap().lambda_min;
    let seps = [20.0, 14.0, 10.0, 8.0, 6.0];
    let mut lams = Vec::new();
    let mut max_n = form.n();
    for s in seps {
        let (l, n) = pair_lambda_min(s);
        lams.push(l);
        max_n = max_n.max(n);
    }
    // λ_min against the shrinking order of the separation
    let shrink: Vec<f64> = seps.iter().map(|s| -s).collect();
    let rho = spearman(&shrink, &lams);
    let secs = start.elapsed().as_secs_f64();
    let pass = single_c > 0.0 && single_u < 0.0 && lams[0] > 0.0 && rho < -0.9 && max_n <= 2000 && secs <= 120.0;
    verdict(
        5,
        "coercivity",
        pass,
        format!(
            "K=1 constrained {single_c:.4e}, unconstrained {single_u:.4e}; K=2 λ_min at separations {seps:?}: {}, ρ {rho:.3}, N ≤ {max_n}, {secs:.1}s",
            lams.iter().map(|l| format!("{l:.4e}")).collect::<Vec<_>>().join(", ")
        )
    )
}

fn criterion_9_partition_and_consistency() -> bool {
    let mut rng = StdRng::seed_from_u64(99);
    // partition of unity, K = 3, several Λ and t
    let grid = line(40.0, 0.05, None);
    let specs3 = vec![spec(1.0, -3.0, -10.0, 0.0), spec(1.0, 0.5, 0.0, 0.0), spec(1.0, 4.0, 10.0, 0.0)];
    let mut pou = 0.0f64;
    for lam in [0.5, 1.0, 3.0] {
        for t in [0.0, 1.3, 4.0] {
            let w = traveling_weights(&specs3, lam, t, &grid).unwrap();
            for i in 0..grid.n_nodes() {
                pou = pou.max((w.iter().map(|v| v[i]).sum::<f64>() - 1.0).abs());
            }
        }
    }
    // localized masses sum to the total
    let a = pair_ansatz(Some(Obstacle::Interval1d { center: 0.0, half_width: 1.0 }), 0.05);
    let mut mass_err = 0.0f64;
    for t in [0.0, 2.0, 5.0] {
        let u = a.r(t).unwrap();
        let rep = localized_quantities(&u, &a.specs, 1.5, 3.0).unwrap();
        mass_err = mass_err.max((rep.m.iter().sum::<f64>() - rep.mass).abs() / rep.mass);
    }
    // operator against quadrature
    let coarse = pair_ansatz(Some(Obstacle::Interval1d { center: 0.0, half_width: 1.0 }), 0.1);
    let t = 0.7;
    let m = coarse.modulated(&ModulatedParams::unmodulated(&coarse.specs), t, true).unwrap();
    let form = assemble_hk(&m, &coarse.specs, 1.5, t, 3.0).unwrap();
    let mut hk_err = 0.0f64;
    for _ in 0..100 {
        let mut h = Field::zeros(&coarse.grid, t);
        for v in h.values.iter_mut() {
            *v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
        h.enforce_mask();
        let q = hk_quadrature(&h, &m, &coarse.specs, 1.5, t, 3.0).unwrap();
        let o = form.evaluate(&h);
        hk_err = hk_err.max((q - o).abs() / q.abs().max(h.l2_norm().powi(2)));
    }
    let pass = pou <= 1e-15 && mass_err <= 1e-12 && hk_err <= 1e-8;
    verdict(
        9,
        "partition and consistency",
        pass,
        format!("max |Σφ - 1| {pou:.1e}, |ΣM_k - M|/M {mass_err:.1e}, H_K operator vs quadrature {hk_err:.1e} (100 fields)")
    )
}

/// Two solitons leaving Θ = [-1, 1] at speeds ∓6, centred at -6 and +8 at T_0.
/// T_0 must satisfy √σ_0·T_0 ≥ 2Λ.
fn exterior_pair(big_lambda: f64, t0: f64) -> RunConfig {
    RunConfig {
        p: 3.0,
        d: 1,
        obstacle: Some(Obstacle::Interval1d { center: 0.0, half_width: 1.0 }),
        grid: GridConfig { l: 92.0, h: 0.01 },
        cutoff_delta: 0.5,
        solitons: vec![spec(1.0, -6.0, 6.0 * t0 - 6.0, 0.0), spec(1.0, 6.0, 8.0 - 6.0 * t0, 0.0)],
        big_lambda,
        t0,
        ladder: vec![t0 + 4.0, t0 + 8.0, t0 + 12.0],
        scheme: Some(SchemeConfig { dt: 0.0025, ..SchemeConfig::default() }),
        observer_stride: Some(0.1),
        output_dir: None,
        alpha_0: 1.5,
        modulation: false,
        tail_radii: vec![],
        spectrum: false,
        save_snapshots: false,
    }
}

fn exterior_runs() -> &'static [(ConstructionReport, f64); 3] {
    static RUNS: OnceLock<[(ConstructionReport, f64); 3]> = OnceLock::new();
    RUNS.get_or_init(|| {
        let run = |lam: f64, t0: f64| {
            let start = Instant::now();
            let r = run_construction(&exterior_pair(lam, t0)).unwrap();
            (r, start.elapsed().as_secs_f64())
        };
        std::thread::scope(|sc| {
            let a = sc.spawn(|| run(1.0, 128.0));
            let b = sc.spawn(|| run(2.0, 128.0));
            let c = run(4.0, 128.0);
            [a.join().unwrap(), b.join().unwrap(), c]
        })
    })
}

fn criterion_6_decay_rate() -> bool {
    let (r, secs) = &exterior_runs()[0];
    let s0 = r.sigma0;
    let mut pass = (s0 - 1.0 / 256.0).abs() < 1e-15 && *secs <= 600.0;
    let mut parts = Vec::new();
    for e in &r.entries {
        match &e.decay.fit {
            Some(f) => {
                pass &= f.rate >= s0 && f.r_squared >= 0.9;
                parts.push(format!("T_n={}: rate {:.4}, R² {:.4}", e.t_n, f.rate, f.r_squared));
            }
            None => {
                pass = false;
                parts.push(format!("T_n={}: no fit ({:?})", e.t_n, e.decay.error));
            }
        }
    }
    verdict(6, "decay rate", pass, format!("σ_0 = {s0}; {}; {secs:.0}s", parts.join("; ")))
}

fn criterion_7_drift_scaling() -> bool {
    let runs = exterior_runs();
    let drifts: Vec<f64> = runs.iter().map(|(r, _)| r.max_drift()).collect();
    let ratios: Vec<f64> = drifts.windows(2).map(|w| w[0] / w[1]).collect();
    let secs = runs.iter().map(|r| r.1).fold(0.0, f64::max);
    let pass = ratios.iter().all(|q| (1.6..=2.6).contains(q)) && secs <= 600.0;
    verdict(
        7,
        "localized mass drift under Λ → 2Λ",
        pass,
        format!(
            "max drift {:.3e} (Λ=1), {:.3e} (Λ=2), {:.3e} (Λ=4); ratios {:.3}, {:.3}",
            drifts[0], drifts[1], drifts[2], ratios[0], ratios[1]
        )
    )
}

/// One slow soliton leaving Θ = [-1, 1], centre 4 at T_0 = 0.
fn slow_ladder() -> RunConfig {
    RunConfig {
        p: 3.0,
        d: 1,
        obstacle: Some(Obstacle::Interval1d { center: 0.0, half_width: 1.0 }),
        grid: GridConfig { l: 30.0, h: 0.01 },
        cutoff_delta: 0.5,
        solitons: vec![spec(1.0, 0.5, 4.0, 0.0)],
        big_lambda: 1.0,
        t0: 0.0,
        ladder: vec![8.0, 12.0, 16.0],
        scheme: Some(SchemeConfig { dt: 0.0025, ..SchemeConfig::default() }),
        observer_stride: Some(0.1),
        output_dir: None,
        alpha_0: 1.5,
        modulation: false,
        tail_radii: (0..30).map(|m| m as f64).collect(),
        spectrum: false,
        save_snapshots: false,
    }
}

fn criterion_8_tail_and_cauchy() -> bool {
    let start = Instant::now();
    let r = run_construction(&slow_ladder()).unwrap();
    let tail = r.tail.as_ref().unwrap();
    let monotone = tail.sup_tail.windows(2).all(|w| w[1] <= w[0]);
    // soliton support at T_0: centre 4 plus 10/√ω
    let beyond: Vec<f64> = tail.radii.iter().zip(&tail.sup_tail).filter(|(m, _)| **m >= 14.0).map(|(_, s)| s / tail.total_mass).collect();
    let tail_max = beyond.iter().copied().fold(0.0, f64::max);
    let (succ, decreasing) = match &r.cauchy {
        CauchyMatrix::Pairwise { successive, decreasing, .. } => (successive.clone(), *decreasing),
        CauchyMatrix::Empty => (vec![], false),
    };
    let secs = start.elapsed().as_secs_f64();
    let pass = monotone && tail_max < 1e-4 && decreasing;
    verdict(
        8,
        "tail mass and Cauchy trend",
        pass,
        format!(
            "tail monotone {monotone}, sup tail/mass beyond M=14 {tail_max:.2e}, successive differences {}, {secs:.0}s",
            succ.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(" > ")
        )
    )
}

fn main() {
    let criteria: [fn() -> bool; 9] = [
        criterion_1_ground_state_residual,
        criterion_2_conservation_and_reversibility,
        criterion_3_soliton_fidelity,
        criterion_4_modulation_round_trip,
        criterion_5_coercivity,
        criterion_6_decay_rate,
        criterion_7_drift_scaling,
        criterion_8_tail_and_cauchy,
        criterion_9_partition_and_consistency,
    ];
    // one at a time, so each wall-clock budget is measured without contention
    let results: Vec<bool> = criteria.iter().map(|c| std::panic::catch_unwind(c).unwrap_or(false)).collect();
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i + 1).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
