//! CSV and JSON writers with fixed headers.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{RunRecord, SweepRecord};
use crate::error::{Error, Result};
use crate::learners::RecommendationLaw;

pub const RUN_CSV_HEADER: &str =
    "algorithm,env,n,rep,seed,depth,index,law,regret,regret_se,evaluations,point";
pub const SWEEP_CSV_HEADER: &str = "algorithm,env,n,rep,regret";
pub const RANK_TRACE_HEADER: &str = "rep,t,depth,index,rank";
pub const PULLS_TRACE_HEADER: &str = "rep,t,depth,index,pulls";
pub const DEPTH_HISTOGRAM_HEADER: &str = "rep,depth,selections";

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::invariant(format!("csv: {other:?}")),
    }
}

fn writer<W: Write>(out: W, header: &str) -> Result<csv::Writer<W>> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(header.split(',')).map_err(csv_error)?;
    Ok(w)
}

fn point_field(point: &[f64]) -> String {
    point
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// One row per repetition; coordinates of the point are `;`-separated.
pub fn write_run_csv<W: Write>(record: &RunRecord, out: W) -> Result<()> {
    let mut w = writer(out, RUN_CSV_HEADER)?;
    for r in &record.repetitions {
        let law = match r.law {
            RecommendationLaw::CellUniform => "cell-uniform",
            RecommendationLaw::Point => "point",
        };
        w.write_record([
            record.algorithm.name().to_string(),
            record.env.clone(),
            record.n.to_string(),
            r.rep.to_string(),
            r.seed.to_string(),
            r.depth.to_string(),
            r.index.to_string(),
            law.to_string(),
            r.regret.to_string(),
            r.regret_se.to_string(),
            r.evaluations.to_string(),
            point_field(&r.point),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Long format: one row per `(n, repetition)`.
pub fn write_sweep_csv<W: Write>(sweep: &SweepRecord, out: W) -> Result<()> {
    let mut w = writer(out, SWEEP_CSV_HEADER)?;
    for row in sweep.rows() {
        w.write_record([
            row.algorithm.name().to_string(),
            row.env,
            row.n.to_string(),
            row.rep.to_string(),
            row.regret.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize, W: Write>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Writes `rank_trace.csv`, `pulls_trace.csv` and `depth_histogram.csv`
/// into `dir`. Returns `false`, writing nothing, when the run carries no
/// traces because the optimum is unknown.
pub fn emit_diagnostics(record: &RunRecord, dir: &Path) -> Result<bool> {
    if record.traces.is_empty() {
        tracing::warn!(env = %record.env, "no traces recorded; diagnostics skipped");
        return Ok(false);
    }
    fs::create_dir_all(dir)?;
    let mut ranks = writer(
        fs::File::create(dir.join("rank_trace.csv"))?,
        RANK_TRACE_HEADER,
    )?;
    let mut pulls = writer(
        fs::File::create(dir.join("pulls_trace.csv"))?,
        PULLS_TRACE_HEADER,
    )?;
    for (rep, trace) in record.traces.iter().enumerate() {
        for (k, &t) in trace.rounds.iter().enumerate() {
            for (h, cell) in trace.optimal_cells.iter().enumerate() {
                let head = [
                    rep.to_string(),
                    t.to_string(),
                    h.to_string(),
                    cell.report_index().to_string(),
                ];
                if let Some(rank) = trace.ranks[k][h] {
                    ranks
                        .write_record(head.iter().cloned().chain([rank.to_string()]))
                        .map_err(csv_error)?;
                }
                if let Some(p) = trace.pulls[k][h] {
                    pulls
                        .write_record(head.iter().cloned().chain([p.to_string()]))
                        .map_err(csv_error)?;
                }
            }
        }
    }
    ranks.flush()?;
    pulls.flush()?;
    let mut hist = writer(
        fs::File::create(dir.join("depth_histogram.csv"))?,
        DEPTH_HISTOGRAM_HEADER,
    )?;
    for r in &record.repetitions {
        for (h, count) in r.depth_histogram.iter().enumerate() {
            hist.write_record([r.rep.to_string(), h.to_string(), count.to_string()])
                .map_err(csv_error)?;
        }
    }
    hist.flush()?;
    Ok(true)
}
