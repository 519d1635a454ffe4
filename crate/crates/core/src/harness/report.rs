use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::campaign::{CampaignResult, MetricRow, Summary};
use crate::Result;

/// Files written by [`emit_report`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub metrics: PathBuf,
    pub timings: PathBuf,
    pub summary: PathBuf,
    pub traces: PathBuf,
}

/// Writes `bytes` to a temporary file next to `path` and renames it over
/// `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub(crate) fn metrics_csv(rows: &[MetricRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "trial",
        "seed",
        "objective",
        "baseline_objective",
        "iterations",
        "feasible",
        "oracle_gap",
    ])?;
    for r in rows {
        w.write_record([
            r.trial.to_string(),
            r.seed.to_string(),
            r.objective.to_string(),
            r.baseline_objective.to_string(),
            r.iterations.to_string(),
            r.feasible.to_string(),
            fmt_opt(r.oracle_gap),
        ])?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn timings_csv(rows: &[MetricRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["trial", "wall_ms"])?;
    for r in rows {
        w.write_record([r.trial.to_string(), r.wall_ms.to_string()])?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn summary_text(s: &Summary) -> String {
    format!(
        "task: {}\ntrials: {}\nfeasible: {}\nobjective_mean: {}\nobjective_std: {}\nobjective_min: {}\nobjective_max: {}\noracle_gap_mean: {}\n",
        s.task,
        s.trials,
        s.feasible,
        s.mean,
        s.std,
        s.min,
        s.max,
        fmt_opt(s.oracle_gap_mean)
    )
}

fn traces_csv(result: &CampaignResult) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["trial", "iteration", "objective", "min_slack"])?;
    for (trial, trace) in result.traces.iter().enumerate() {
        for (i, (f, s)) in trace.iter().enumerate() {
            w.write_record([trial.to_string(), i.to_string(), f.to_string(), fmt_opt(*s)])?;
        }
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Writes `metrics.csv`, `timings.csv`, `summary.txt` and `traces.csv`
/// into `output_dir`, creating it if needed. Wall-clock times live only in
/// `timings.csv` so the other files are reproducible byte for byte.
pub fn emit_report(result: &CampaignResult, output_dir: &Path) -> Result<ReportPaths> {
    fs::create_dir_all(output_dir)?;
    let paths = ReportPaths {
        metrics: output_dir.join("metrics.csv"),
        timings: output_dir.join("timings.csv"),
        summary: output_dir.join("summary.txt"),
        traces: output_dir.join("traces.csv"),
    };
    write_atomic(&paths.metrics, &metrics_csv(&result.rows)?)?;
    write_atomic(&paths.timings, &timings_csv(&result.rows)?)?;
    write_atomic(&paths.summary, summary_text(&result.summary).as_bytes())?;
    write_atomic(&paths.traces, &traces_csv(result)?)?;
    Ok(paths)
}
