//! On-disk formats: trajectory and snapshot CSV, the analysis report, the
//! potential audit report, and the deterministic run manifest.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::json;
use sha2::{Digest, Sha256};
use tagdiff_core::audit::{AuditReport, Verdict};
use tagdiff_core::dynamics::Trajectory;
use tagdiff_core::{Configuration, Point, TorusBox, MAX_DIM};

use crate::estimators::EstimatorReport;

/// Write a trajectory as CSV with one row per integration step:
/// `t,X1..Xd,C1..Cd,n` (displacement, drift compensator, particle count).
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, dim: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("create {}", path.display()))?;
    let mut header = vec!["t".to_string()];
    for k in 1..=dim {
        header.push(format!("X{k}"));
    }
    for k in 1..=dim {
        header.push(format!("C{k}"));
    }
    header.push("n".to_string());
    w.write_record(&header)?;
    for i in 0..traj.times.len() {
        let mut row = vec![format!("{:.17e}", traj.times[i])];
        for k in 0..dim {
            row.push(format!("{:.17e}", traj.displacement[i][k]));
        }
        for k in 0..dim {
            row.push(format!("{:.17e}", traj.compensator[i][k]));
        }
        row.push(traj.particle_counts[i].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns read back from a trajectory CSV.
pub struct TrajectoryTable {
    pub times: Vec<f64>,
    pub displacement: Vec<Point>,
    pub compensator: Vec<Point>,
    pub particle_counts: Vec<usize>,
    pub dim: usize,
}

pub fn read_trajectory_csv(path: &Path) -> Result<TrajectoryTable> {
    let mut r = csv::Reader::from_path(path)
        .with_context(|| format!("open {}", path.display()))?;
    let header = r.headers()?.clone();
    let dim = header.iter().filter(|h| h.starts_with('X')).count();
    anyhow::ensure!(dim >= 1 && dim <= MAX_DIM, "trajectory header lists no X columns");
    let mut table = TrajectoryTable {
        times: Vec::new(),
        displacement: Vec::new(),
        compensator: Vec::new(),
        particle_counts: Vec::new(),
        dim,
    };
    for record in r.records() {
        let rec = record?;
        table.times.push(rec[0].parse()?);
        let mut x = [0.0; MAX_DIM];
        let mut c = [0.0; MAX_DIM];
        for k in 0..dim {
            x[k] = rec[1 + k].parse()?;
            c[k] = rec[1 + dim + k].parse()?;
        }
        table.displacement.push(x);
        table.compensator.push(c);
        table.particle_counts.push(rec[1 + 2 * dim].parse()?);
    }
    Ok(table)
}

/// Write a configuration snapshot as `particle,x1..xd` CSV plus a JSON
/// sidecar (`<stem>.box.json`) recording the periodic box.
pub fn write_snapshot_csv(path: &Path, config: &Configuration) -> Result<()> {
    let dim = config.bbox.dim;
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("create {}", path.display()))?;
    let mut header = vec!["particle".to_string()];
    for k in 1..=dim {
        header.push(format!("x{k}"));
    }
    w.write_record(&header)?;
    for (i, p) in config.iter().enumerate() {
        let mut row = vec![i.to_string()];
        for k in 0..dim {
            row.push(format!("{:.17e}", p[k]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    let sidecar = box_sidecar_path(path);
    let body = serde_json::to_string_pretty(
        &json!({"side": config.bbox.side, "dim": dim}),
    )?;
    fs::write(&sidecar, body + "\n")
        .with_context(|| format!("write {}", sidecar.display()))?;
    Ok(())
}

fn box_sidecar_path(path: &Path) -> std::path::PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("snapshot");
    path.with_file_name(format!("{stem}.box.json"))
}

pub fn read_snapshot_csv(path: &Path) -> Result<Configuration> {
    let sidecar = box_sidecar_path(path);
    let meta: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(&sidecar)
            .with_context(|| format!("read {}", sidecar.display()))?,
    )?;
    let side = meta["side"].as_f64().context("box sidecar missing `side`")?;
    let dim = meta["dim"].as_u64().context("box sidecar missing `dim`")? as usize;
    let bbox = TorusBox::new(side, dim);
    let mut r = csv::Reader::from_path(path)
        .with_context(|| format!("open {}", path.display()))?;
    let mut pts: Vec<Point> = Vec::new();
    for record in r.records() {
        let rec = record?;
        let mut p = [0.0; MAX_DIM];
        for k in 0..dim {
            p[k] = rec[1 + k].parse()?;
        }
        pts.push(p);
    }
    Ok(Configuration::from_positions(bbox, &pts))
}

/// Write the analysis report as CSV: one row per reported scalar,
/// `estimator,quantity,estimate,stderr,pass`.
pub fn write_report_csv(path: &Path, reports: &[EstimatorReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("create {}", path.display()))?;
    w.write_record(["estimator", "quantity", "estimate", "stderr", "pass"])?;
    for rep in reports {
        for (label, est, se) in &rep.scalars {
            w.write_record([
                rep.name.as_str(),
                label.as_str(),
                &format!("{est:.10e}"),
                &format!("{se:.10e}"),
                if rep.pass { "true" } else { "false" },
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Serialize the potential audit report (core types carry no serde support,
/// so the JSON is assembled by hand).
pub fn audit_report_json(report: &AuditReport) -> serde_json::Value {
    json!({
        "dimension": report.dimension,
        "pass": report.pass(),
        "findings": report
            .findings
            .iter()
            .map(|f| {
                json!({
                    "name": f.name,
                    "verdict": match f.verdict {
                        Verdict::Pass => "pass",
                        Verdict::Fail => "fail",
                        Verdict::Inconclusive => "inconclusive",
                    },
                    "value": f.value,
                    "detail": f.detail,
                })
            })
            .collect::<Vec<_>>(),
    })
}

/// Write the run manifest. Contains only reproducibility inputs (no
/// timestamps), so identical runs produce byte-identical manifests.
pub fn write_manifest(dir: &Path, config_json: &str, seed: u64, command: &str) -> Result<()> {
    let mut hasher = Sha256::new();
    hasher.update(config_json.as_bytes());
    let sha = hasher.finalize();
    let hex: String = sha.iter().map(|b| format!("{b:02x}")).collect();
    let manifest = json!({
        "config_sha256": hex,
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
    });
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("write {}", path.display()))?;
    Ok(())
}
