//! Batch results on disk: per-trial CSV, summary CSV, JSON report and
//! per-tick trajectories.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::metrics::{AggregateReport, Stage, TrialRecord};
use super::runner::BatchResult;
use crate::servo::TrajectoryRecord;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Serialize)]
struct TrialRow<'a> {
    id: &'a str,
    utterance: &'a str,
    t_stt: f64,
    t_ae: f64,
    t_od: f64,
    t_ra: f64,
    c: f64,
    t_total: f64,
    a_stt: f64,
    a_ae: f64,
    a_od: f64,
    a_ra: f64,
    a_total: f64,
    first_failure: &'a str,
    failure: &'a str,
    errored: bool,
}

impl<'a> From<&'a TrialRecord> for TrialRow<'a> {
    fn from(r: &'a TrialRecord) -> Self {
        let m = &r.metrics;
        TrialRow {
            id: &r.id,
            utterance: &r.utterance,
            t_stt: m.t_stt,
            t_ae: m.t_ae,
            t_od: m.t_od,
            t_ra: m.t_ra,
            c: r.overhead,
            t_total: r.t_total,
            a_stt: m.a_stt.percent(),
            a_ae: m.a_ae.percent(),
            a_od: m.a_od.percent(),
            a_ra: m.a_ra.percent(),
            a_total: r.a_total.percent(),
            first_failure: m.first_failure().map(Stage::name).unwrap_or(""),
            failure: r.failure.as_deref().unwrap_or(""),
            errored: r.errored,
        }
    }
}

#[derive(Debug, Serialize)]
struct TickRow<'a> {
    trial: &'a str,
    #[serde(flatten)]
    tick: &'a TrajectoryRecord,
}

fn create(path: &Path) -> Result<BufWriter<File>, ExportError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| ExportError::Io {
            path: path.to_path_buf(),
            source,
        })
}

pub fn trials_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(TrialRow::from(r))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn summary_csv<W: Write>(report: &AggregateReport, out: W) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "mean", "sd", "min", "max"])?;
    for row in &report.rows {
        let s = row.summary;
        w.write_record([
            row.metric.clone(),
            format!("{:.4}", s.mean),
            format!("{:.4}", s.sd),
            format!("{:.4}", s.min),
            format!("{:.4}", s.max),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Files written by [`write_batch`].
pub const OUTPUT_FILES: [&str; 4] = [
    "trials.csv",
    "summary.csv",
    "report.json",
    "trajectories.jsonl",
];

pub fn write_batch(result: &BatchResult, dir: &Path) -> Result<(), ExportError> {
    std::fs::create_dir_all(dir).map_err(|source| ExportError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let records = result.records();
    trials_csv(&records, create(&dir.join("trials.csv"))?)?;
    summary_csv(&result.report, create(&dir.join("summary.csv"))?)?;

    let path = dir.join("report.json");
    let mut f = create(&path)?;
    serde_json::to_writer_pretty(&mut f, &result.report)?;
    let io = |source| ExportError::Io {
        path: path.clone(),
        source,
    };
    writeln!(f).map_err(io)?;
    f.flush().map_err(io)?;

    let path = dir.join("trajectories.jsonl");
    let mut f = create(&path)?;
    let io = |source| ExportError::Io {
        path: path.clone(),
        source,
    };
    for t in &result.trials {
        for tick in &t.trajectory {
            serde_json::to_writer(
                &mut f,
                &TickRow {
                    trial: &t.record.id,
                    tick,
                },
            )?;
            writeln!(f).map_err(io)?;
        }
    }
    f.flush().map_err(io)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::metrics::{aggregate, Accuracy, StageMetrics};

    fn rec(id: &str, ok: bool) -> TrialRecord {
        let a = Accuracy::from_bool(ok);
        let m = StageMetrics {
            t_stt: 1.0,
            t_ae: 0.5,
            t_od: 0.25,
            t_ra: 2.0,
            a_stt: Accuracy::PASS,
            a_ae: a,
            a_od: Accuracy::PASS,
            a_ra: Accuracy::PASS,
        };
        TrialRecord::new(id, "grab the apple, please", vec![], m, 10.0)
    }

    #[test]
    fn trials_csv_has_header_and_quoting() {
        let mut buf = vec![];
        trials_csv(&[rec("a", true), rec("b", false)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("id,utterance,t_stt"));
        assert!(lines.next().unwrap().contains("\"grab the apple, please\""));
        let b = lines.next().unwrap();
        assert!(b.contains(",AE,"), "{b}");
    }

    #[test]
    fn summary_rows_in_table_order() {
        let report = aggregate(&[rec("a", true), rec("b", false)]).unwrap();
        let mut buf = vec![];
        summary_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let names: Vec<&str> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap())
            .collect();
        assert_eq!(
            names,
            [
                "T_STT", "T_AE", "T_OD", "T_RA", "C", "T_total", "A_STT", "A_AE", "A_OD", "A_RA",
                "A_total"
            ]
        );
        assert!(text.contains("A_total,50.0000,70.7107,0.0000,100.0000"));
    }
}
