use clap::{Parser, Subcommand, ValueEnum};
use exterior_nls::ansatz::Field;
use exterior_nls::evolver::{Evolver, SchemeConfig};
use exterior_nls::experiments::{modulate_run, prepare, run_construction, spectrum_at, ConstructionReport, RunConfig};
use exterior_nls::groundstate::solve_ground_state_default;
use exterior_nls::{functionals, io, Error, Result};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "exterior-nls", version, about = "Multi-soliton construction for NLS outside an obstacle")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Csv,
    Plotdata,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve for the ground state Q_ω and write it as JSON.
    Groundstate {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        omega: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the final-data ladder of a configuration.
    Construct {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Evolve a snapshot from t0 to t1.
    Evolve {
        #[arg(long)]
        init: PathBuf,
        #[arg(long)]
        t0: f64,
        #[arg(long)]
        t1: f64,
        #[arg(long)]
        dt: f64,
        /// defaults to `<init>_evolved.nlsfld`
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Modulation parameters along the last ladder entry of a run.
    Modulate {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Constrained λ_min of H_K at time t.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a run summary (csv) or error series for plotting (plotdata).
    /// plotdata also writes `tail.csv` into the run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_enum)]
        emit: Emit,
    },
}

fn read_config(path: &Path) -> Result<RunConfig> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn execute(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Groundstate { p, d, omega, out } => {
            let gs = solve_ground_state_default(p, d, omega)?;
            fs::write(&out, serde_json::to_string(&gs)?)?;
            println!("{}", serde_json::json!({ "peak": gs.peak(), "residual": gs.residual(), "mass": gs.mass() }));
        }
        Cmd::Construct { config, out_dir } => {
            let mut cfg = read_config(&config)?;
            cfg.output_dir = Some(out_dir);
            let r = run_construction(&cfg)?;
            let summary: Vec<_> = r
                .entries
                .iter()
                .map(|e| {
                    serde_json::json!({
                        "T_n": e.t_n,
                        "rate": e.decay.fit.as_ref().map(|f| f.rate),
                        "r_squared": e.decay.fit.as_ref().map(|f| f.r_squared),
                        "max_drift": e.max_drift,
                    })
                })
                .collect();
            println!("{}", serde_json::json!({ "sigma0": r.sigma0, "entries": summary }));
        }
        Cmd::Evolve { init, t0, t1, dt, out } => {
            let (mut u, p) = io::read_snapshot(&init)?;
            u.t = t0;
            let span = (t1 - t0).abs();
            let cfg = SchemeConfig { dt, stride: span.max(dt), ..SchemeConfig::default() };
            let ev = Evolver::new(u.grid.clone(), p, cfg)?;
            let traj = ev.evolve_with(&u, t0, t1, false, &mut [])?;
            let last: &Field = traj.last();
            let out = out.unwrap_or_else(|| {
                let stem = init.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                init.with_file_name(format!("{stem}_evolved.nlsfld"))
            });
            io::write_snapshot(&out, last, p)?;
            let (m0, e0, _) = functionals::mass_energy_h1(&u, p);
            let (m1, e1, _) = functionals::mass_energy_h1(last, p);
            println!("{}", serde_json::json!({ "t": last.t, "mass": [m0, m1], "energy": [e0, e1], "out": out }));
        }
        Cmd::Modulate { run, out } => {
            let tr = modulate_run(&run)?;
            io::write_modulation_csv(fs::File::create(out)?, &tr)?;
        }
        Cmd::Spectrum { config, t, out } => {
            let setup = prepare(&read_config(&config)?)?;
            let rep = spectrum_at(&setup, t)?;
            fs::write(out, serde_json::to_string_pretty(&rep)?)?;
        }
        Cmd::Report { run, emit } => {
            let r: ConstructionReport = serde_json::from_str(&fs::read_to_string(run.join("report.json"))?)?;
            let stdout = std::io::stdout().lock();
            match emit {
                Emit::Csv => {
                    let header: Vec<String> =
                        ["T_n", "rate", "prefactor", "r_squared", "valid", "max_drift", "mass_drift", "energy_drift", "bootstrap_violations"]
                            .map(String::from)
                            .to_vec();
                    let rows: Vec<Vec<f64>> = r
                        .entries
                        .iter()
                        .map(|e| {
                            let f = e.decay.fit.as_ref();
                            vec![
                                e.t_n,
                                f.map_or(f64::NAN, |f| f.rate),
                                f.map_or(f64::NAN, |f| f.prefactor),
                                f.map_or(f64::NAN, |f| f.r_squared),
                                if e.decay.valid { 1.0 } else { 0.0 },
                                e.max_drift,
                                e.mass_drift,
                                e.energy_drift,
                                e.bootstrap_violations.len() as f64,
                            ]
                        })
                        .collect();
                    io::write_table(stdout, &header, &rows)?;
                }
                Emit::Plotdata => {
                    let mut times: Vec<f64> = r.entries.iter().flat_map(|e| e.errors.iter().map(|x| x.0)).collect();
                    times.sort_by(f64::total_cmp);
                    times.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
                    let mut header = vec!["t".to_string()];
                    header.extend(r.entries.iter().map(|e| format!("h1_err_T{}", e.t_n)));
                    let rows: Vec<Vec<f64>> = times
                        .iter()
                        .map(|&t| {
                            let mut row = vec![t];
                            for e in &r.entries {
                                row.push(e.errors.iter().find(|x| (x.0 - t).abs() < 1e-9).map_or(f64::NAN, |x| x.1));
                            }
                            row
                        })
                        .collect();
                    io::write_table(stdout, &header, &rows)?;
                    if let Some(tail) = &r.tail {
                        let rows: Vec<Vec<f64>> = tail.radii.iter().zip(&tail.sup_tail).map(|(m, s)| vec![*m, *s]).collect();
                        io::write_table(fs::File::create(run.join("tail.csv"))?, &["M".into(), "sup_tail_mass".into()], &rows)?;
                    }
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = if is_rejection(&e) { 2 } else { 3 };
            ExitCode::from(code)
        }
    }
}

fn is_rejection(e: &Error) -> bool {
    e.is_config_rejection()
}
