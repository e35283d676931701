//! JSON and CSV output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::pde::SpaceTimeRecord;
use crate::profile::WaveProfile;
use crate::shape::ShapeReport;

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn write_rows<S: AsRef<str>>(path: &Path, header: &[S], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header.iter().map(|s| s.as_ref()))?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:.17e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `t, phi, dphi`.
pub fn write_profile_csv(path: &Path, phi: &WaveProfile) -> Result<()> {
    let rows: Vec<Vec<f64>> = phi.rows().into_iter().map(|(t, v, d)| vec![t, v, d]).collect();
    write_rows(path, &["t", "phi", "dphi"], &rows)
}

/// Columns `t, value, kind`.
pub fn write_extrema_csv(path: &Path, report: &ShapeReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "value", "kind"])?;
    for e in &report.extrema {
        let kind = match e.kind {
            crate::shape::ExtremumKind::Max => "max",
            crate::shape::ExtremumKind::Min => "min",
        };
        w.write_record([format!("{:.17e}", e.t), format!("{:.17e}", e.value), kind.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `t, x_f`; empty where no crossing exists.
pub fn write_front_trace_csv(path: &Path, record: &SpaceTimeRecord, level: f64) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "x_f"])?;
    for (t, x) in record.front_trace(level) {
        w.write_record([format!("{t:.17e}"), x.map(|x| format!("{x:.17e}")).unwrap_or_default()])?;
    }
    w.flush()?;
    Ok(())
}

/// `t` followed by one column per probe position.
pub fn write_snapshots_csv(path: &Path, record: &SpaceTimeRecord, probes: &[f64]) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend(probes.iter().map(|p| format!("x={p}")));
    write_rows(path, &header, &record.probe_rows(probes))
}
