//! Declarative rule-base files.
//!
//! ```toml
//! [[input]]
//! name = "error"
//! universe = { lo = -100.0, hi = 100.0, points = 200 }
//! terms = [
//!   { label = "Negative", center = -50.0, sigma = 20.0, spread = 2.0 },
//!   { label = "Zero",     center =   0.0, sigma = 20.0, spread = 2.0 },
//!   { label = "Positive", center =  50.0, sigma = 20.0, spread = 2.0 },
//! ]
//!
//! [[output]]
//! name = "correction"
//! # `standard` generates the eleven NegativeVeryLarge..PositiveVeryLarge terms
//! standard = { sigma = 10.0, spread = 2.0 }
//!
//! [[rule]]
//! when = { error = "Negative" }
//! then = { correction = "PositiveLarge" }
//! ```
//!
//! Every rule's `then` table names exactly one output variable.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::system::{Clause, It2FuzzySystem, LinguisticVariable, Rule, SNorm, TNorm, Term};
use super::{FuzzyError, It2GaussianMf, Universe};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default)]
    pub t_norm: TNorm,
    #[serde(default)]
    pub s_norm: SNorm,
    #[serde(default, rename = "input")]
    pub inputs: Vec<VariableConfig>,
    #[serde(default, rename = "output")]
    pub outputs: Vec<VariableConfig>,
    #[serde(default, rename = "rule")]
    pub rules: Vec<RuleConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableConfig {
    pub name: String,
    #[serde(default)]
    pub universe: Universe,
    #[serde(default)]
    pub terms: Vec<TermConfig>,
    #[serde(default)]
    pub standard: Option<StandardTerms>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub label: String,
    pub center: f64,
    pub sigma: f64,
    #[serde(default)]
    pub spread: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StandardTerms {
    pub sigma: f64,
    #[serde(default)]
    pub spread: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleConfig {
    pub when: BTreeMap<String, String>,
    pub then: BTreeMap<String, String>,
}

impl VariableConfig {
    fn build(&self) -> Result<LinguisticVariable, FuzzyError> {
        match (&self.standard, self.terms.is_empty()) {
            (Some(std), true) => {
                LinguisticVariable::standard(&self.name, self.universe, std.sigma, std.spread)
            }
            (None, false) => {
                let terms = self
                    .terms
                    .iter()
                    .map(|t| {
                        Ok(Term {
                            label: t.label.clone(),
                            mf: It2GaussianMf::new(t.center, t.sigma, t.spread)?,
                        })
                    })
                    .collect::<Result<Vec<_>, FuzzyError>>()?;
                LinguisticVariable::new(&self.name, self.universe, terms)
            }
            _ => Err(FuzzyError::Config(format!(
                "variable `{}` needs exactly one of `terms` or `standard`",
                self.name
            ))),
        }
    }
}

impl SystemConfig {
    pub fn build(&self) -> Result<It2FuzzySystem, FuzzyError> {
        let inputs = self
            .inputs
            .iter()
            .map(VariableConfig::build)
            .collect::<Result<Vec<_>, _>>()?;
        let outputs = self
            .outputs
            .iter()
            .map(VariableConfig::build)
            .collect::<Result<Vec<_>, _>>()?;
        let rules = self
            .rules
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut then = r.then.iter();
                let consequent = match (then.next(), then.next()) {
                    (Some((v, t)), None) => Clause::new(v, t),
                    _ => {
                        return Err(FuzzyError::Config(format!(
                            "rule {i}: `then` must name exactly one output"
                        )))
                    }
                };
                let antecedents = r.when.iter().map(|(v, t)| Clause::new(v, t)).collect();
                Ok(Rule::new(antecedents, consequent))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut system = It2FuzzySystem::new(inputs, outputs, rules)?;
        system.t_norm = self.t_norm;
        system.s_norm = self.s_norm;
        Ok(system)
    }
}

pub fn parse_system(text: &str) -> Result<It2FuzzySystem, FuzzyError> {
    let cfg: SystemConfig = toml::from_str(text).map_err(|e| FuzzyError::Config(e.to_string()))?;
    cfg.build()
}

pub fn load_system(path: impl AsRef<Path>) -> Result<It2FuzzySystem, FuzzyError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| FuzzyError::Config(format!("{}: {e}", path.display())))?;
    parse_system(&text)
}
