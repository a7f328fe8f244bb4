//! Interval type-2 Mamdani inference with Gaussian sets.
//!
//! Inference uses the minimum t-norm within a rule, the maximum s-norm to
//! merge rules that share a consequent, Karnik–Mendel center-of-sets type
//! reduction and midpoint defuzzification.

mod config;
mod membership;
mod reduction;
mod system;
mod type1;

use thiserror::Error;

pub use config::{load_system, parse_system, SystemConfig};
pub use membership::{it2_degree, mf_degree, FiringInterval, GaussianMf, It2GaussianMf, Universe};
pub use reduction::{
    center_of_sets, center_of_sets_traced, defuzzify, KmTrace, TypeReducedInterval,
    WeightedCentroid,
};
pub use system::{
    Clause, Inputs, It2FuzzySystem, LinguisticVariable, Rule, RuleFiring, SNorm, TNorm, Term,
    STANDARD_LABELS,
};

#[derive(Debug, Error)]
pub enum FuzzyError {
    #[error("invalid universe: {0}")]
    InvalidUniverse(String),
    #[error("invalid membership function: {0}")]
    InvalidMembership(String),
    #[error("invalid firing interval [{lower}, {upper}]")]
    InvalidFiring { lower: f64, upper: f64 },
    #[error("invalid centroid interval [{0}, {1}]")]
    InvalidCentroid(f64, f64),
    #[error("no rule fired")]
    NoRuleFired,
    #[error("missing input variable `{0}`")]
    MissingInput(String),
    #[error("input `{0}` is not finite")]
    NonFiniteInput(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{variable}` has no term `{term}`")]
    UnknownTerm { variable: String, term: String },
    #[error("variable `{variable}` defines term `{term}` twice")]
    DuplicateTerm { variable: String, term: String },
    #[error("variable `{0}` defined twice")]
    DuplicateVariable(String),
    #[error("terms of `{0}` must have strictly increasing centers")]
    TermOrder(String),
    #[error("rule {0} has no antecedent")]
    EmptyAntecedent(usize),
    #[error("no rule covers `{variable}` at {at}")]
    Coverage { variable: String, at: f64 },
    #[error("config: {0}")]
    Config(String),
}
