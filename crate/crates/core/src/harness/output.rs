//! CSV tables and traces, VTK snapshots and the run manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::adaptive::StepRecord;
use crate::error::Result;
use crate::fem::io::{write_profile_csv, write_vtk};
use crate::harness::config::ExperimentConfig;
use crate::harness::run::{RunReport, StudyReport};

pub const RATE_HEADER: &str =
    "scheme,theta,k,k_max,err_linf_l2,err_l2_l2,err_l2_h1,rate_linf_l2,rate_l2_l2,rate_l2_h1,steps,rejections,h";

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6e}"))
}

/// Rate table of a study, one line per ladder point.
pub fn write_rate_csv<W: Write>(w: &mut W, study: &StudyReport) -> Result<()> {
    writeln!(w, "{RATE_HEADER}")?;
    for (run, row) in study.runs.iter().zip(&study.rows) {
        let k = run.steps.get(1).copied().unwrap_or(run.steps[0]);
        let h = run.problem.space.mesh.h();
        write!(w, "{},{},{:.6e},{:.6e}", run.scheme, run.theta, k, run.k_max())?;
        for e in row.errors {
            write!(w, ",{e:.6e}")?;
        }
        for j in 0..3 {
            write!(w, ",{}", opt(row.rates.map(|r| r[j])))?;
        }
        writeln!(w, ",{},{},{h:.6e}", run.n_steps(), run.rejections())?;
    }
    Ok(())
}

/// Per-level trace: time, step, energy and errors when known.
pub fn write_trace_csv<W: Write>(w: &mut W, run: &RunReport) -> Result<()> {
    writeln!(w, "n,t,k,energy,err_l2,err_h1")?;
    for n in 1..run.times.len() {
        writeln!(
            w,
            "{n},{:.17e},{:.17e},{:.17e},{},{}",
            run.times[n],
            run.steps[n - 1],
            run.energy[n - 1],
            opt(run.err_l2.get(n).copied()),
            opt(run.err_h1.get(n).copied()),
        )?;
    }
    Ok(())
}

/// Every attempted adaptive step.
pub fn write_steps_csv<W: Write>(w: &mut W, records: &[StepRecord]) -> Result<()> {
    writeln!(w, "{}", StepRecord::CSV_HEADER)?;
    for r in records {
        r.write_csv(w)?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes the resolved config plus run facts as `key = value` lines.
pub fn write_manifest(path: &Path, cfg: &ExperimentConfig, command: &str, facts: &[(&str, String)]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "# dlnac {} {command}", env!("CARGO_PKG_VERSION"))?;
    w.write_all(cfg.to_text().as_bytes())?;
    writeln!(w, "\n# results")?;
    for (k, v) in facts {
        writeln!(w, "# {k} = {v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Trace, step history and snapshots of one run into `dir`. Returns the
/// files written.
pub fn write_run(dir: &Path, run: &RunReport) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join("trace.csv");
    let mut w = create(&path)?;
    write_trace_csv(&mut w, run)?;
    w.flush()?;
    written.push(path);
    if !run.records.is_empty() {
        let path = dir.join("steps.csv");
        let mut w = create(&path)?;
        write_steps_csv(&mut w, &run.records)?;
        w.flush()?;
        written.push(path);
    }
    let space = &run.problem.space;
    let mut snaps: Vec<(f64, &[f64])> = run.snapshots.iter().map(|s| (s.t, &s.u[..])).collect();
    snaps.push((run.t_end(), &run.final_u[..]));
    for (i, (t, u)) in snaps.into_iter().enumerate() {
        let last = i == run.snapshots.len();
        let stem = if last { "final".to_string() } else { format!("snapshot_{i:03}") };
        let path = if space.dimension() == 1 {
            let path = dir.join(format!("{stem}.csv"));
            write_profile_csv(&mut create(&path)?, space, u)?;
            path
        } else {
            let path = dir.join(format!("{stem}.vtk"));
            write_vtk(&mut create(&path)?, space, &format!("u at t = {t}"), &[("u", u)])?;
            path
        };
        written.push(path);
    }
    Ok(written)
}

pub fn write_study(dir: &Path, study: &StudyReport) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("rates.csv");
    let mut w = create(&path)?;
    write_rate_csv(&mut w, study)?;
    w.flush()?;
    Ok(path)
}
