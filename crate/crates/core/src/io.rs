//! File artifacts: trajectory / metrics / bound-curve / sweep CSVs and the
//! TOML gain-plus-certificate record. Every writer here has a matching
//! reader, and floats are written in Rust's shortest round-trip form, so a
//! written file parses back to bit-identical values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::BoundKind;
use crate::conditions::ConditionReport;
use crate::controller::GainSet;
use crate::error::{Error, Result};
use crate::sim::{ErrorMetrics, SweepRow, Trajectory};

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn parse_field(field: &str, context: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|_| Error::Malformed {
        context: format!("{context}: cannot parse `{field}` as a number"),
    })
}

/// Writes one run as CSV: time, then per vehicle `q, v, zeta, u, a, d, e_gap`.
pub fn write_trajectory_csv(
    path: &Path,
    traj: &Trajectory,
    metrics: &ErrorMetrics,
) -> Result<()> {
    let n = traj.n_vehicles();
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    for i in 1..=n {
        for column in ["q", "v", "zeta", "u", "a", "d", "e_gap"] {
            header.push(format!("{column}_{i}"));
        }
    }
    writer.write_record(&header)?;

    for (step, &t) in traj.times.iter().enumerate() {
        let mut record = vec![fmt(t)];
        for i in 0..n {
            let series = &traj.vehicles[i];
            let state = series.states[step];
            record.push(fmt(state.q));
            record.push(fmt(state.v));
            record.push(fmt(state.zeta));
            record.push(fmt(series.control[step]));
            record.push(fmt(series.accel[step]));
            record.push(fmt(series.disturbance[step]));
            record.push(fmt(metrics.gap_err[i][step]));
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Column-oriented view of one vehicle read back from a trajectory CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VehicleColumns {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub zeta: Vec<f64>,
    pub u: Vec<f64>,
    pub a: Vec<f64>,
    pub d: Vec<f64>,
    pub e_gap: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryTable {
    pub times: Vec<f64>,
    pub vehicles: Vec<VehicleColumns>,
}

pub fn read_trajectory_csv(path: &Path) -> Result<TrajectoryTable> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    if header.len() < 8 || (header.len() - 1) % 7 != 0 || &header[0] != "t" {
        return Err(Error::Malformed {
            context: format!("unexpected trajectory header with {} columns", header.len()),
        });
    }
    let n = (header.len() - 1) / 7;
    let mut table =
        TrajectoryTable { times: Vec::new(), vehicles: vec![VehicleColumns::default(); n] };
    for record in reader.records() {
        let record = record?;
        table.times.push(parse_field(&record[0], "trajectory t")?);
        for i in 0..n {
            let base = 1 + 7 * i;
            let vehicle = &mut table.vehicles[i];
            vehicle.q.push(parse_field(&record[base], "trajectory q")?);
            vehicle.v.push(parse_field(&record[base + 1], "trajectory v")?);
            vehicle.zeta.push(parse_field(&record[base + 2], "trajectory zeta")?);
            vehicle.u.push(parse_field(&record[base + 3], "trajectory u")?);
            vehicle.a.push(parse_field(&record[base + 4], "trajectory a")?);
            vehicle.d.push(parse_field(&record[base + 5], "trajectory d")?);
            vehicle.e_gap.push(parse_field(&record[base + 6], "trajectory e_gap")?);
        }
    }
    Ok(table)
}

/// Run-level metrics next to the two headline bound curves.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsTable {
    pub times: Vec<f64>,
    pub sup_err: Vec<f64>,
    pub bound_original: Vec<f64>,
    pub bound_comparison: Vec<f64>,
}

pub fn write_metrics_csv(
    path: &Path,
    times: &[f64],
    sup_err: &[f64],
    bound_original: &[f64],
    bound_comparison: &[f64],
) -> Result<()> {
    if times.len() != sup_err.len()
        || times.len() != bound_original.len()
        || times.len() != bound_comparison.len()
    {
        return Err(Error::GridMismatch { context: "metrics columns differ in length".into() });
    }
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["t", "sup_err", "bound_original", "bound_comparison"])?;
    for i in 0..times.len() {
        writer.write_record([
            fmt(times[i]),
            fmt(sup_err[i]),
            fmt(bound_original[i]),
            fmt(bound_comparison[i]),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<MetricsTable> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut table = MetricsTable::default();
    for record in reader.records() {
        let record = record?;
        if record.len() != 4 {
            return Err(Error::Malformed {
                context: format!("metrics row with {} fields", record.len()),
            });
        }
        table.times.push(parse_field(&record[0], "metrics t")?);
        table.sup_err.push(parse_field(&record[1], "metrics sup_err")?);
        table.bound_original.push(parse_field(&record[2], "metrics bound_original")?);
        table.bound_comparison.push(parse_field(&record[3], "metrics bound_comparison")?);
    }
    Ok(table)
}

/// One sampled bound curve: `t, bound_value, kind`.
pub fn write_bound_curve_csv(path: &Path, curve: &[(f64, f64)], kind: BoundKind) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["t", "bound_value", "kind"])?;
    for (t, value) in curve {
        writer.write_record([fmt(*t), fmt(*value), kind.name().to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_bound_curve_csv(path: &Path) -> Result<(Vec<(f64, f64)>, Option<BoundKind>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut curve = Vec::new();
    let mut kind = None;
    for record in reader.records() {
        let record = record?;
        if record.len() != 3 {
            return Err(Error::Malformed {
                context: format!("bound curve row with {} fields", record.len()),
            });
        }
        curve.push((
            parse_field(&record[0], "bound t")?,
            parse_field(&record[1], "bound value")?,
        ));
        let row_kind: BoundKind = record[2].parse()?;
        match kind {
            None => kind = Some(row_kind),
            Some(k) if k == row_kind => {}
            Some(k) => {
                return Err(Error::Malformed {
                    context: format!("mixed bound kinds {} and {}", k.name(), row_kind.name()),
                })
            }
        }
    }
    Ok((curve, kind))
}

/// String-length sweep table: `n, worst_sup_err, bound_envelope`.
pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["n", "worst_sup_err", "bound_envelope"])?;
    for row in rows {
        writer.write_record([
            row.n.to_string(),
            fmt(row.worst_sup_err),
            fmt(row.bound_envelope),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != 3 {
            return Err(Error::Malformed {
                context: format!("sweep row with {} fields", record.len()),
            });
        }
        let n = record[0].parse::<usize>().map_err(|_| Error::Malformed {
            context: format!("sweep n: cannot parse `{}`", &record[0]),
        })?;
        rows.push(SweepRow {
            n,
            worst_sup_err: parse_field(&record[1], "sweep worst_sup_err")?,
            bound_envelope: parse_field(&record[2], "sweep bound_envelope")?,
        });
    }
    Ok(rows)
}

/// A gain set together with the certificate it was checked against; the
/// machine-readable output of certification and synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRecord {
    pub gains: GainSet,
    pub certificate: ConditionReport,
}

pub fn gain_record_to_toml(record: &GainRecord) -> Result<String> {
    Ok(toml::to_string_pretty(record)?)
}

pub fn write_gain_record(path: &Path, record: &GainRecord) -> Result<()> {
    std::fs::write(path, gain_record_to_toml(record)?)?;
    Ok(())
}

pub fn read_gain_record(path: &Path) -> Result<GainRecord> {
    let text = std::fs::read_to_string(path)?;
    Ok(toml::from_str(&text)?)
}
