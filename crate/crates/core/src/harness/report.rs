use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::{ConvergenceReport, Manifest, Snapshot, Solution, Timing};
use crate::coupling::OrderingRow;
use crate::error::{Error, Result};
use crate::pde::GridField;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EquilibriumRow {
    pub rho: f64,
    pub lambda: f64,
    pub phi: f64,
    pub psi: f64,
    pub flux: f64,
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub(crate) fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    write(dir, "manifest.json", &json(manifest))
}

pub(crate) fn write_timing(dir: &Path, timing: &Timing) -> Result<()> {
    write(dir, "timing.json", &json(timing))
}

/// Site-level block averages, one row per site with its macroscopic
/// coordinates.
fn snapshot_csv(s: &Snapshot) -> String {
    let axes = ["x_over_N", "y_over_N", "z_over_N"];
    let mut out = String::new();
    for a in &axes[..s.dim] {
        out.push_str(a);
        out.push(',');
    }
    out.push_str("eta_l_mean,eta_l_stderr\n");
    let half = s.side as i64 / 2;
    for (i, (m, e)) in s.site_mean.iter().zip(&s.site_stderr).enumerate() {
        let mut rest = i;
        for _ in 0..s.dim {
            let c = (rest % s.side) as i64;
            rest /= s.side;
            let _ = write!(out, "{},", (c - half) as f64 / s.n as f64);
        }
        let _ = writeln!(out, "{m},{e}");
    }
    out
}

pub(crate) fn snapshot_name(n: u64, t: f64) -> String {
    format!("snapshot_N{n}_t{t}.csv")
}

pub(crate) fn write_snapshots(dir: &Path, snaps: &[Snapshot]) -> Result<()> {
    for s in snaps {
        write(dir, &snapshot_name(s.n, s.t), &snapshot_csv(s))?;
    }
    Ok(())
}

fn field_csv(f: &GridField) -> String {
    let mut out = String::from(if f.dim == 1 { "u,rho\n" } else { "u,v,rho\n" });
    for (i, r) in f.values.iter().enumerate() {
        let _ = write!(out, "{},", f.center(i % f.cells));
        if f.dim == 2 {
            let _ = write!(out, "{},", f.center(i / f.cells));
        }
        let _ = writeln!(out, "{r}");
    }
    out
}

/// `solution_t{t}.csv` for every snapshot time.
pub fn write_solution(dir: &Path, solution: &Solution) -> Result<()> {
    for f in &solution.fields {
        write(dir, &format!("solution_t{}.csv", f.t), &field_csv(f))?;
    }
    Ok(())
}

pub fn write_equilibrium(dir: &Path, rows: &[EquilibriumRow], manifest: &Manifest) -> Result<()> {
    let mut out = String::from("rho,lambda,phi,psi,flux\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.rho, r.lambda, r.phi, r.psi, r.flux);
    }
    write(dir, "equilibrium.csv", &out)?;
    write_manifest(dir, manifest)
}

/// `ordering.csv`; displacement coordinates are joined by `;`.
pub fn write_ordering(dir: &Path, rows: &[OrderingRow], manifest: &Manifest) -> Result<()> {
    let mut out = String::from("N,d,unordered_time_integral,stderr\n");
    for r in rows {
        let d: Vec<String> = r.d.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "{},{},{},{}", r.n, d.join(";"), r.unordered_time_integral, r.stderr);
    }
    write(dir, "ordering.csv", &out)?;
    write_manifest(dir, manifest)
}

/// `l1_table.csv`, `manifest.json`, `timing.json`, and, when present, the
/// snapshots, solver fields and weak residuals. Everything but
/// `timing.json` is a function of the configuration alone.
pub fn convergence_report_to_files(report: &ConvergenceReport, dir: &Path) -> Result<()> {
    let mut l1 = String::from("N,t,l1,l1_stderr\n");
    for r in &report.rows {
        let _ = writeln!(l1, "{},{},{},{}", r.n, r.t, r.l1, r.l1_stderr);
    }
    write(dir, "l1_table.csv", &l1)?;
    if !report.weak.is_empty() {
        let mut w = String::from("source,test,residual\n");
        for r in &report.weak {
            let _ = writeln!(w, "{},{},{}", r.source, r.test, r.residual);
        }
        write(dir, "weak_residuals.csv", &w)?;
    }
    if let Some(e) = &report.ensemble {
        write_snapshots(dir, &e.snapshots)?;
    }
    if let Some(s) = &report.solution {
        write_solution(dir, s)?;
    }
    write_manifest(dir, &report.manifest)?;
    write_timing(dir, &report.timing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{Experiment, ExperimentConfig, L1Row};

    fn manifest() -> Manifest {
        let cfg = ExperimentConfig::from_toml(
            "model = \"exclusion\"\nalpha = 2.0\nprofile = { shape = \"constant\", rho = 0.5 }\n",
        )
        .unwrap();
        Experiment::new(cfg).unwrap().manifest("compare")
    }

    #[test]
    fn empty_report_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        convergence_report_to_files(&ConvergenceReport::empty(manifest()), dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("l1_table.csv")).unwrap();
        assert_eq!(text, "N,t,l1,l1_stderr\n");
        assert!(dir.path().join("manifest.json").exists());
    }

    #[test]
    fn single_row_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let mut report = ConvergenceReport::empty(manifest());
        let row = L1Row {
            n: 64,
            t: 0.5,
            l1: 0.1 + 0.2,
            l1_stderr: 1.0 / 3.0,
        };
        report.rows.push(row);
        convergence_report_to_files(&report, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("l1_table.csv")).unwrap();
        let line = text.lines().nth(1).unwrap();
        let parts: Vec<&str> = line.split(',').collect();
        assert_eq!(parts[0].parse::<u64>().unwrap(), row.n);
        assert_eq!(parts[1].parse::<f64>().unwrap(), row.t);
        assert_eq!(parts[2].parse::<f64>().unwrap(), row.l1);
        assert_eq!(parts[3].parse::<f64>().unwrap(), row.l1_stderr);
    }

    #[test]
    fn io_errors_name_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = convergence_report_to_files(&ConvergenceReport::empty(manifest()), &blocker.join("sub"))
            .unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }
}
