//! Trial scripts (one JSON object per line) and fault plans.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::judge::FinalPredicate;
use super::metrics::Stage;
use crate::grammar::ActionCall;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialEntry {
    pub id: String,
    /// Relative to the script file.
    pub scene_file: PathBuf,
    pub utterance: String,
    pub expected_transcript: String,
    pub expected_actions: Vec<ActionCall>,
    pub expected_final: FinalPredicate,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("no trials")]
    Empty,
    #[error("duplicate trial id `{0}`")]
    DuplicateId(String),
}

pub fn parse_script(text: &str) -> Result<Vec<TrialEntry>, ScriptError> {
    let mut out = vec![];
    let mut ids = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e: TrialEntry = serde_json::from_str(line).map_err(|source| ScriptError::Parse {
            line: i + 1,
            source,
        })?;
        if ids.insert(e.id.clone(), ()).is_some() {
            return Err(ScriptError::DuplicateId(e.id));
        }
        out.push(e);
    }
    if out.is_empty() {
        return Err(ScriptError::Empty);
    }
    Ok(out)
}

pub fn load_script(path: impl AsRef<Path>) -> Result<Vec<TrialEntry>, ScriptError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_script(&text)
}

/// How many trials should first fail at each stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultPlan {
    pub counts: BTreeMap<Stage, usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FaultPlanError {
    #[error("bad fault spec `{0}`; expected e.g. `stt=2,ae=5,od=2,ra=6`")]
    Syntax(String),
    #[error("{planned} faults planned for only {trials} trials")]
    TooMany { planned: usize, trials: usize },
}

impl FaultPlan {
    pub fn none() -> Self {
        FaultPlan::default()
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    /// Pick disjoint trial sets for each stage, reproducibly.
    pub fn assign(&self, trials: usize) -> Result<Vec<Option<Stage>>, FaultPlanError> {
        let planned = self.total();
        if planned > trials {
            return Err(FaultPlanError::TooMany { planned, trials });
        }
        let mut order: Vec<usize> = (0..trials).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let mut out = vec![None; trials];
        let mut it = order.into_iter();
        for (&stage, &n) in &self.counts {
            for i in it.by_ref().take(n) {
                out[i] = Some(stage);
            }
        }
        Ok(out)
    }
}

impl FromStr for FaultPlan {
    type Err = FaultPlanError;

    fn from_str(s: &str) -> Result<Self, FaultPlanError> {
        let mut plan = FaultPlan::none();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let bad = || FaultPlanError::Syntax(part.to_string());
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            let stage = match k.trim().to_ascii_lowercase().as_str() {
                "stt" => Stage::Stt,
                "ae" => Stage::Ae,
                "od" => Stage::Od,
                "ra" => Stage::Ra,
                "seed" => {
                    plan.seed = v.trim().parse().map_err(|_| bad())?;
                    continue;
                }
                _ => return Err(bad()),
            };
            let n: usize = v.trim().parse().map_err(|_| bad())?;
            plan.counts.insert(stage, n);
        }
        Ok(plan)
    }
}
