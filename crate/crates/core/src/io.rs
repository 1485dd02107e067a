//! Snapshot files and CSV output.
//!
//! A snapshot is `name.nlsfld` (little-endian f64 pairs `re, im`, x₁ fastest,
//! obstacle nodes zero) plus a sidecar `name.json` holding the grid header.

use crate::ansatz::Field;
use crate::error::{Error, Result};
use crate::geometry::{ExteriorGrid, Obstacle};
use crate::modulation::ModulationTrajectory;
use crate::functionals::LocalizedReport;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: f64,
    pub h: f64,
    pub t: f64,
    pub p: f64,
    pub obstacle: Option<Obstacle>,
    pub node_counts: Vec<usize>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_snapshot(path: &Path, u: &Field, p: f64) -> Result<()> {
    let g = &u.grid;
    let header = SnapshotHeader { d: g.d, l: g.l, h: g.h, t: u.t, p, obstacle: g.obstacle.clone(), node_counts: g.node_counts() };
    let mut w = BufWriter::new(fs::File::create(path)?);
    for (i, v) in u.values.iter().enumerate() {
        let v = if g.is_active(i) { *v } else { Complex64::new(0.0, 0.0) };
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

/// Reads a snapshot and its sidecar; returns the field and the exponent p.
pub fn read_snapshot(path: &Path) -> Result<(Field, f64)> {
    let header: SnapshotHeader = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    let grid = Arc::new(ExteriorGrid::new(header.d, header.l, header.h, header.obstacle.clone())?);
    if grid.node_counts() != header.node_counts {
        return Err(Error::InvalidInput(format!("node counts {:?} do not match the grid {:?}", header.node_counts, grid.node_counts())));
    }
    let bytes = fs::read(path)?;
    if bytes.len() != 16 * grid.n_nodes() {
        return Err(Error::InvalidInput(format!("payload has {} bytes, expected {}", bytes.len(), 16 * grid.n_nodes())));
    }
    let values = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    let mut u = Field { grid, values, t: header.t };
    u.enforce_mask();
    Ok((u, header.p))
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Writes a header and rows of numbers.
pub fn write_table<W: Write>(out: W, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r.iter().map(|x| num(*x))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows `t, M_1..M_K, P_1..P_K (components), J, G, mass, energy, h1_err`.
pub fn write_localized_csv<W: Write>(out: W, reports: &[LocalizedReport], h1_err: &[f64]) -> Result<()> {
    let Some(first) = reports.first() else {
        return write_table(out, &["t".into()], &[]);
    };
    let k = first.m.len();
    let d = first.p.first().map_or(0, |p| p.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=k).map(|i| format!("M_{i}")));
    for i in 1..=k {
        header.extend((1..=d).map(|j| format!("P_{i}_{j}")));
    }
    header.extend(["J", "G", "mass", "energy", "h1_err"].map(String::from));
    let rows: Vec<Vec<f64>> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = vec![r.t];
            row.extend(&r.m);
            for pk in &r.p {
                row.extend(pk);
            }
            row.extend([r.j, r.g, r.mass, r.energy, h1_err.get(i).copied().unwrap_or(f64::NAN)]);
            row
        })
        .collect();
    write_table(out, &header, &rows)
}

/// Rows `t, per k (omega_t, y.., mu_t), residual_norm, h_l2, h_h1`, then the
/// three derivative combinations per k (NaN at the end samples).
pub fn write_modulation_csv<W: Write>(out: W, traj: &ModulationTrajectory) -> Result<()> {
    let Some(first) = traj.states.first() else {
        return write_table(out, &["t".into()], &[]);
    };
    let k = first.params.k();
    let d = first.params.y.first().map_or(0, |y| y.len());
    let mut header = vec!["t".to_string()];
    for i in 1..=k {
        header.push(format!("omega_t_{i}"));
        header.extend((1..=d).map(|j| format!("y_{i}_{j}")));
        header.push(format!("mu_t_{i}"));
    }
    header.extend(["residual_norm", "h_l2", "h_h1"].map(String::from));
    for i in 1..=k {
        header.extend([format!("domega_{i}"), format!("dy_{i}"), format!("dmu_shift_{i}")]);
    }
    let rows: Vec<Vec<f64>> = traj
        .states
        .iter()
        .zip(&traj.derivatives)
        .map(|(s, der)| {
            let mut row = vec![s.t];
            for i in 0..k {
                row.push(s.params.omega_tilde[i]);
                row.extend(&s.params.y[i]);
                row.push(s.params.mu_tilde[i]);
            }
            row.extend([s.residual_norm, s.h_l2, s.h_h1]);
            for i in 0..k {
                match der {
                    Some(dv) => row.extend(dv.combos[i]),
                    None => row.extend([f64::NAN; 3]),
                }
            }
            row
        })
        .collect();
    write_table(out, &header, &rows)
}
