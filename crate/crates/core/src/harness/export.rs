//! Flat files derived from a run report, for plotting and tables.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use super::report::RunReport;
use crate::error::Result;
use crate::metrics::MetricReport;

pub const EXPORT_SCHEMA: &str = "hazard-search/exports/v1";

/// Per-file schema versions written to `manifest.json`.
pub const FILE_SCHEMAS: &[(&str, &str)] = &[
    ("report.json", super::report::REPORT_SCHEMA),
    ("records.csv", "hazard-search/records/v1"),
    ("dynamics.csv", "hazard-search/dynamics/v1"),
    ("stop_trace.csv", "hazard-search/stop-trace/v1"),
    ("domains.csv", "hazard-search/domains/v1"),
    ("metrics.csv", crate::metrics::METRICS_SCHEMA),
    ("trace.jsonl", "hazard-search/trace/v1"),
];

fn coord_header(prefix: &str, dim: usize) -> Vec<String> {
    (0..dim).map(|d| format!("{prefix}{d}")).collect()
}

fn dim_of(report: &RunReport) -> usize {
    report.final_tree.root().region.dim()
}

/// `x0.., risk, hazardous, sample_index`.
pub fn write_records_csv(report: &RunReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = coord_header("x", dim_of(report));
    header.extend(["risk", "hazardous", "sample_index"].map(String::from));
    w.write_record(&header)?;
    for r in &report.records {
        let mut row: Vec<String> = r.point.iter().map(f64::to_string).collect();
        row.extend([
            r.risk.to_string(),
            r.hazardous.to_string(),
            r.sample_index.to_string(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Sampling dynamics: `x0.., sample_index, risk`.
pub fn write_dynamics_csv(report: &RunReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = coord_header("x", dim_of(report));
    header.extend(["sample_index", "risk"].map(String::from));
    w.write_record(&header)?;
    for r in &report.records {
        let mut row: Vec<String> = r.point.iter().map(f64::to_string).collect();
        row.extend([r.sample_index.to_string(), r.risk.to_string()]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per stop check: `n_samples, coverage, f2_obv, stop`.
pub fn write_stop_trace_csv(report: &RunReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["n_samples", "coverage", "f2_obv", "stop"])?;
    for d in &report.stop_history {
        w.write_record([
            d.n_samples.to_string(),
            d.coverage.to_string(),
            d.f2_obv.to_string(),
            d.stop.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per identified domain: `domain, lower0.., upper0.., members`.
pub fn write_domains_csv(report: &RunReport, path: &Path) -> Result<()> {
    let dim = dim_of(report);
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["domain".to_string()];
    header.extend(coord_header("lower", dim));
    header.extend(coord_header("upper", dim));
    header.push("members".into());
    w.write_record(&header)?;
    for (i, d) in report.domains.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(d.bounds.lower.iter().map(f64::to_string));
        row.extend(d.bounds.upper.iter().map(f64::to_string));
        row.push(d.members.len().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics_csv(report: &RunReport, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "seed,kind,n_samples,domains,{}",
        MetricReport::CSV_HEADER
    )?;
    if let Some(m) = &report.metrics {
        let kind = serde_json::to_value(report.kind)?;
        writeln!(
            w,
            "{},{},{},{},{}",
            report.seed,
            kind.as_str().unwrap_or_default(),
            report.records.len(),
            report.domains.len(),
            m.csv_row()
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Selection and stop-check events in sample order, one JSON object per line.
pub fn write_trace_jsonl(report: &RunReport, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut checks = report.stop_history.iter().peekable();
    for it in &report.iterations {
        while let Some(d) = checks.next_if(|d| d.n_samples <= it.n_before) {
            writeln!(w, "{}", json!({"event": "stop_check", "decision": d}))?;
        }
        writeln!(w, "{}", json!({"event": "select", "selection": it}))?;
    }
    for d in checks {
        writeln!(w, "{}", json!({"event": "stop_check", "decision": d}))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    schema: &'static str,
    objective: &'a str,
    seed: u64,
    files: BTreeMap<&'static str, &'static str>,
}

/// Writes the report and every derived file into `dir`; returns the paths
/// written.
pub fn emit_plots(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let path = |name: &str| dir.join(name);
    report.write_json(&path("report.json"))?;
    write_records_csv(report, &path("records.csv"))?;
    write_dynamics_csv(report, &path("dynamics.csv"))?;
    write_stop_trace_csv(report, &path("stop_trace.csv"))?;
    write_domains_csv(report, &path("domains.csv"))?;
    write_metrics_csv(report, &path("metrics.csv"))?;
    write_trace_jsonl(report, &path("trace.jsonl"))?;
    let manifest = Manifest {
        schema: EXPORT_SCHEMA,
        objective: &report.objective,
        seed: report.seed,
        files: FILE_SCHEMAS.iter().copied().collect(),
    };
    std::fs::write(
        path("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    let mut out: Vec<PathBuf> = FILE_SCHEMAS.iter().map(|(name, _)| path(name)).collect();
    out.push(path("manifest.json"));
    Ok(out)
}
