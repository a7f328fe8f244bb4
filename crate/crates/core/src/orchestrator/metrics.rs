//! Per-trial stage records and their aggregation.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::ActionCall;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Stt,
    Ae,
    Od,
    Ra,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Stt, Stage::Ae, Stage::Od, Stage::Ra];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Stt => "STT",
            Stage::Ae => "AE",
            Stage::Od => "OD",
            Stage::Ra => "RA",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Binary stage accuracy, stored as 0 or 100.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Accuracy(u8);

impl Accuracy {
    pub const PASS: Accuracy = Accuracy(100);
    pub const FAIL: Accuracy = Accuracy(0);

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Self::PASS
        } else {
            Self::FAIL
        }
    }

    pub fn passed(self) -> bool {
        self.0 == 100
    }

    pub fn percent(self) -> f64 {
        f64::from(self.0)
    }
}

impl TryFrom<u8> for Accuracy {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            0 | 100 => Ok(Accuracy(v)),
            _ => Err(format!("accuracy must be 0 or 100, got {v}")),
        }
    }
}

impl From<Accuracy> for u8 {
    fn from(a: Accuracy) -> u8 {
        a.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub t_stt: f64,
    pub t_ae: f64,
    pub t_od: f64,
    pub t_ra: f64,
    pub a_stt: Accuracy,
    pub a_ae: Accuracy,
    pub a_od: Accuracy,
    pub a_ra: Accuracy,
}

impl StageMetrics {
    pub fn time(&self, s: Stage) -> f64 {
        match s {
            Stage::Stt => self.t_stt,
            Stage::Ae => self.t_ae,
            Stage::Od => self.t_od,
            Stage::Ra => self.t_ra,
        }
    }

    pub fn accuracy(&self, s: Stage) -> Accuracy {
        match s {
            Stage::Stt => self.a_stt,
            Stage::Ae => self.a_ae,
            Stage::Od => self.a_od,
            Stage::Ra => self.a_ra,
        }
    }

    pub fn stage_sum(&self) -> f64 {
        self.t_stt + self.t_ae + self.t_od + self.t_ra
    }

    /// Earliest stage with accuracy 0.
    pub fn first_failure(&self) -> Option<Stage> {
        Stage::ALL.into_iter().find(|&s| !self.accuracy(s).passed())
    }

    /// Zero every accuracy from the first failure onwards.
    pub fn propagate_failures(mut self) -> Self {
        if let Some(first) = self.first_failure() {
            for s in Stage::ALL.into_iter().filter(|&s| s >= first) {
                match s {
                    Stage::Stt => self.a_stt = Accuracy::FAIL,
                    Stage::Ae => self.a_ae = Accuracy::FAIL,
                    Stage::Od => self.a_od = Accuracy::FAIL,
                    Stage::Ra => self.a_ra = Accuracy::FAIL,
                }
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub id: String,
    pub utterance: String,
    pub expected_actions: Vec<ActionCall>,
    pub metrics: StageMetrics,
    /// Time not spent inside the four stages (recording, hand-offs).
    pub overhead: f64,
    pub t_total: f64,
    pub a_total: Accuracy,
    /// Why the trial failed, if it did.
    pub failure: Option<String>,
    /// The harness itself broke (missing file, dead pose feed), as
    /// opposed to the task failing.
    pub errored: bool,
}

impl TrialRecord {
    /// Build a record from measured stage times and the measured total.
    /// Accuracies downstream of a failure are forced to 0.
    pub fn new(
        id: impl Into<String>,
        utterance: impl Into<String>,
        expected_actions: Vec<ActionCall>,
        metrics: StageMetrics,
        measured_total: f64,
    ) -> Self {
        let metrics = metrics.propagate_failures();
        let overhead = measured_total - metrics.stage_sum();
        TrialRecord {
            id: id.into(),
            utterance: utterance.into(),
            expected_actions,
            metrics,
            overhead,
            t_total: metrics.stage_sum() + overhead,
            a_total: Accuracy::from_bool(metrics.first_failure().is_none()),
            failure: None,
            errored: false,
        }
    }

    /// `t_total == T_stt + T_ae + T_od + T_ra + C`, compared bit for bit.
    pub fn identity_holds(&self) -> bool {
        self.t_total.to_bits() == (self.metrics.stage_sum() + self.overhead).to_bits()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no trials to aggregate")]
    Empty,
    #[error("trial {0}: total time does not equal stage times plus overhead")]
    Identity(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (n - 1); 0 for a single value.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Summary { mean, sd, min, max })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorAttribution {
    pub counts: BTreeMap<Stage, usize>,
    /// Percent of failed trials first failing at each stage.
    pub percent: BTreeMap<Stage, f64>,
    pub failed: usize,
    /// Set when no trial failed, so every share is a placeholder 0.
    pub no_failures: bool,
}

/// Credit each failed trial to its first failing stage.
pub fn error_attribution(records: &[TrialRecord]) -> ErrorAttribution {
    let mut counts: BTreeMap<Stage, usize> = Stage::ALL.iter().map(|&s| (s, 0)).collect();
    let mut failed = 0;
    for r in records {
        if let Some(s) = r.metrics.first_failure() {
            *counts.get_mut(&s).expect("all stages present") += 1;
            failed += 1;
        }
    }
    let percent = counts
        .iter()
        .map(|(&s, &c)| {
            let p = if failed == 0 {
                0.0
            } else {
                100.0 * c as f64 / failed as f64
            };
            (s, p)
        })
        .collect();
    ErrorAttribution {
        counts,
        percent,
        failed,
        no_failures: failed == 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub trials: usize,
    /// Rows in table order: stage times, overhead, total time, stage
    /// accuracies, total accuracy.
    pub rows: Vec<MetricRow>,
    /// Mean stage time over mean total time, in percent.
    pub time_contribution: BTreeMap<Stage, f64>,
    pub overhead_share: f64,
    pub errors: ErrorAttribution,
}

impl AggregateReport {
    pub fn row(&self, metric: &str) -> Option<&Summary> {
        self.rows
            .iter()
            .find(|r| r.metric == metric)
            .map(|r| &r.summary)
    }
}

pub fn aggregate(records: &[TrialRecord]) -> Result<AggregateReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(bad) = records.iter().find(|r| !r.identity_holds()) {
        return Err(MetricsError::Identity(bad.id.clone()));
    }
    let col = |f: &dyn Fn(&TrialRecord) -> f64| -> Summary {
        Summary::of(&records.iter().map(f).collect::<Vec<_>>()).expect("non-empty")
    };
    let mut rows = vec![];
    for s in Stage::ALL {
        rows.push(MetricRow {
            metric: format!("T_{}", s.name()),
            summary: col(&|r| r.metrics.time(s)),
        });
    }
    rows.push(MetricRow {
        metric: "C".into(),
        summary: col(&|r| r.overhead),
    });
    let total = col(&|r| r.t_total);
    rows.push(MetricRow {
        metric: "T_total".into(),
        summary: total,
    });
    for s in Stage::ALL {
        rows.push(MetricRow {
            metric: format!("A_{}", s.name()),
            summary: col(&|r| r.metrics.accuracy(s).percent()),
        });
    }
    rows.push(MetricRow {
        metric: "A_total".into(),
        summary: col(&|r| r.a_total.percent()),
    });
    let time_contribution: BTreeMap<Stage, f64> = Stage::ALL
        .iter()
        .map(|&s| {
            let mean = rows[s as usize].summary.mean;
            (s, share(mean, total.mean))
        })
        .collect();
    let overhead_share = share(rows[4].summary.mean, total.mean);
    Ok(AggregateReport {
        trials: records.len(),
        rows,
        time_contribution,
        overhead_share,
        errors: error_attribution(records),
    })
}

fn share(part: f64, whole: f64) -> f64 {
    if whole > 0.0 {
        100.0 * part / whole
    } else {
        0.0
    }
}
