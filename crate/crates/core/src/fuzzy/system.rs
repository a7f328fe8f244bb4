use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::reduction::{center_of_sets, defuzzify, WeightedCentroid};
use super::{FiringInterval, FuzzyError, It2GaussianMf, Universe};

/// The eleven linguistic labels, ordered from most negative to most positive.
pub const STANDARD_LABELS: [&str; 11] = [
    "NegativeVeryLarge",
    "NegativeLarge",
    "NegativeMedium",
    "NegativeSmall",
    "NegativeVerySmall",
    "Zero",
    "PositiveVerySmall",
    "PositiveSmall",
    "PositiveMedium",
    "PositiveLarge",
    "PositiveVeryLarge",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub label: String,
    pub mf: It2GaussianMf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinguisticVariable {
    pub name: String,
    pub universe: Universe,
    terms: Vec<Term>,
}

impl LinguisticVariable {
    /// Terms must have unique labels and strictly increasing centers.
    pub fn new(
        name: impl Into<String>,
        universe: Universe,
        terms: Vec<Term>,
    ) -> Result<Self, FuzzyError> {
        let name = name.into();
        universe.validate()?;
        if terms.is_empty() {
            return Err(FuzzyError::Config(format!(
                "variable `{name}` has no terms"
            )));
        }
        let mut seen = HashSet::new();
        for t in &terms {
            It2GaussianMf::new(t.mf.center, t.mf.sigma, t.mf.spread)?;
            if !seen.insert(t.label.as_str()) {
                return Err(FuzzyError::DuplicateTerm {
                    variable: name,
                    term: t.label.clone(),
                });
            }
        }
        if terms.windows(2).any(|w| w[0].mf.center >= w[1].mf.center) {
            return Err(FuzzyError::TermOrder(name));
        }
        Ok(LinguisticVariable {
            name,
            universe,
            terms,
        })
    }

    /// Eleven evenly spaced terms spanning the universe, labelled with
    /// [`STANDARD_LABELS`].
    pub fn standard(
        name: impl Into<String>,
        universe: Universe,
        sigma: f64,
        spread: f64,
    ) -> Result<Self, FuzzyError> {
        let step = (universe.hi - universe.lo) / 10.0;
        let mid = 0.5 * (universe.lo + universe.hi);
        let terms = STANDARD_LABELS
            .iter()
            .enumerate()
            .map(|(i, label)| {
                // build from the middle out so opposite centers are exact negatives
                let offset = (i as f64 - 5.0) * step;
                Ok(Term {
                    label: (*label).to_string(),
                    mf: It2GaussianMf::new(mid + offset, sigma, spread)?,
                })
            })
            .collect::<Result<Vec<_>, FuzzyError>>()?;
        Self::new(name, universe, terms)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn term(&self, label: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.label == label)
    }

    /// Centers mirror each other about the middle of the universe.
    pub fn is_symmetric(&self) -> bool {
        let mid = 0.5 * (self.universe.lo + self.universe.hi);
        let n = self.terms.len();
        (0..n).all(|i| {
            let a = &self.terms[i].mf;
            let b = &self.terms[n - 1 - i].mf;
            ((a.center - mid) + (b.center - mid)).abs() < 1e-9
                && a.sigma == b.sigma
                && a.spread == b.spread
        })
    }

    pub(crate) fn set_spread(&mut self, spread: f64) {
        for t in &mut self.terms {
            t.mf.spread = spread;
        }
    }
}

/// `(variable, term)` reference inside a rule.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    pub variable: String,
    pub term: String,
}

impl Clause {
    pub fn new(variable: impl Into<String>, term: impl Into<String>) -> Self {
        Clause {
            variable: variable.into(),
            term: term.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub antecedents: Vec<Clause>,
    pub consequent: Clause,
}

impl Rule {
    pub fn new(antecedents: Vec<Clause>, consequent: Clause) -> Self {
        Rule {
            antecedents,
            consequent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TNorm {
    #[default]
    Minimum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SNorm {
    #[default]
    Maximum,
}

/// Interval type-2 Mamdani system with center-of-sets type reduction.
///
/// Immutable once built; `evaluate` takes `&self` so one system can serve
/// any number of callers.
#[derive(Debug, Clone, PartialEq)]
pub struct It2FuzzySystem {
    inputs: Vec<LinguisticVariable>,
    outputs: Vec<LinguisticVariable>,
    rules: Vec<Rule>,
    pub t_norm: TNorm,
    pub s_norm: SNorm,
}

/// One rule together with its firing interval for a given input.
#[derive(Debug, Clone, Copy)]
pub struct RuleFiring<'a> {
    pub rule: &'a Rule,
    pub firing: FiringInterval,
}

pub type Inputs = BTreeMap<String, f64>;

impl It2FuzzySystem {
    pub fn new(
        inputs: Vec<LinguisticVariable>,
        outputs: Vec<LinguisticVariable>,
        rules: Vec<Rule>,
    ) -> Result<Self, FuzzyError> {
        let mut names = HashSet::new();
        for v in inputs.iter().chain(&outputs) {
            if !names.insert(v.name.as_str()) {
                return Err(FuzzyError::DuplicateVariable(v.name.clone()));
            }
        }
        if outputs.is_empty() {
            return Err(FuzzyError::Config("system has no output variable".into()));
        }
        let system = It2FuzzySystem {
            inputs,
            outputs,
            rules,
            t_norm: TNorm::Minimum,
            s_norm: SNorm::Maximum,
        };
        for (i, rule) in system.rules.iter().enumerate() {
            system.check_rule(i, rule)?;
        }
        system.check_coverage()?;
        Ok(system)
    }

    fn check_rule(&self, index: usize, rule: &Rule) -> Result<(), FuzzyError> {
        if rule.antecedents.is_empty() {
            return Err(FuzzyError::EmptyAntecedent(index));
        }
        for clause in &rule.antecedents {
            let var = self
                .input(&clause.variable)
                .ok_or_else(|| FuzzyError::UnknownVariable(clause.variable.clone()))?;
            if var.term(&clause.term).is_none() {
                return Err(FuzzyError::UnknownTerm {
                    variable: clause.variable.clone(),
                    term: clause.term.clone(),
                });
            }
        }
        let out = self
            .output(&rule.consequent.variable)
            .ok_or_else(|| FuzzyError::UnknownVariable(rule.consequent.variable.clone()))?;
        if out.term(&rule.consequent.term).is_none() {
            return Err(FuzzyError::UnknownTerm {
                variable: rule.consequent.variable.clone(),
                term: rule.consequent.term.clone(),
            });
        }
        Ok(())
    }

    /// Every grid point of every input universe must reach some rule with a
    /// nonzero upper degree, and every output needs at least one rule.
    fn check_coverage(&self) -> Result<(), FuzzyError> {
        for out in &self.outputs {
            if !self.rules.iter().any(|r| r.consequent.variable == out.name) {
                return Err(FuzzyError::Coverage {
                    variable: out.name.clone(),
                    at: f64::NAN,
                });
            }
        }
        for var in &self.inputs {
            let used: Vec<&It2GaussianMf> = self
                .rules
                .iter()
                .flat_map(|r| &r.antecedents)
                .filter(|c| c.variable == var.name)
                .filter_map(|c| var.term(&c.term).map(|t| &t.mf))
                .collect();
            if used.is_empty() {
                continue;
            }
            for x in var.universe.grid() {
                if !used.iter().any(|mf| mf.upper(x) > 0.0) {
                    return Err(FuzzyError::Coverage {
                        variable: var.name.clone(),
                        at: x,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn inputs(&self) -> &[LinguisticVariable] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[LinguisticVariable] {
        &self.outputs
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn input(&self, name: &str) -> Option<&LinguisticVariable> {
        self.inputs.iter().find(|v| v.name == name)
    }

    pub fn output(&self, name: &str) -> Option<&LinguisticVariable> {
        self.outputs.iter().find(|v| v.name == name)
    }

    /// Copy of the system with every term's center spread replaced.
    pub fn with_spread(&self, spread: f64) -> Result<Self, FuzzyError> {
        It2GaussianMf::new(0.0, 1.0, spread)?;
        let mut s = self.clone();
        for v in s.inputs.iter_mut().chain(s.outputs.iter_mut()) {
            v.set_spread(spread);
        }
        Ok(s)
    }

    /// Firing interval of every rule (minimum over antecedent bounds).
    pub fn fire_rules(&self, inputs: &Inputs) -> Result<Vec<RuleFiring<'_>>, FuzzyError> {
        self.rules
            .iter()
            .map(|rule| {
                let mut firing = FiringInterval::crisp(1.0);
                for clause in &rule.antecedents {
                    let x = *inputs
                        .get(&clause.variable)
                        .ok_or_else(|| FuzzyError::MissingInput(clause.variable.clone()))?;
                    if !x.is_finite() {
                        return Err(FuzzyError::NonFiniteInput(clause.variable.clone()));
                    }
                    let mf = self.term_mf(&self.inputs, clause);
                    firing = firing.meet(mf.degree(x));
                }
                Ok(RuleFiring { rule, firing })
            })
            .collect()
    }

    fn term_mf<'a>(&'a self, vars: &'a [LinguisticVariable], clause: &Clause) -> &'a It2GaussianMf {
        // existence is checked at construction
        &vars
            .iter()
            .find(|v| v.name == clause.variable)
            .and_then(|v| v.term(&clause.term))
            .expect("rule validated against variables")
            .mf
    }

    /// Full inference chain: clamp, fire, type-reduce, defuzzify.
    pub fn evaluate(&self, inputs: &Inputs) -> Result<BTreeMap<String, f64>, FuzzyError> {
        let clamped = self.clamp_inputs(inputs)?;
        let firings = self.fire_rules(&clamped)?;
        let mut result = BTreeMap::new();
        for out in &self.outputs {
            let interval = center_of_sets(&self.consequent_terms(out, &firings))?;
            let y = defuzzify(interval).clamp(out.universe.lo, out.universe.hi);
            result.insert(out.name.clone(), y);
        }
        Ok(result)
    }

    /// Evaluate a single-input single-output system.
    pub fn evaluate_scalar(&self, x: f64) -> Result<f64, FuzzyError> {
        let (input, output) = match (self.inputs.as_slice(), self.outputs.as_slice()) {
            ([i], [o]) => (i, o),
            _ => {
                return Err(FuzzyError::Config(
                    "scalar evaluation needs exactly one input and one output".into(),
                ))
            }
        };
        let mut inputs = Inputs::new();
        inputs.insert(input.name.clone(), x);
        let out = self.evaluate(&inputs)?;
        Ok(out[&output.name])
    }

    pub(crate) fn clamp_inputs(&self, inputs: &Inputs) -> Result<Inputs, FuzzyError> {
        let mut clamped = inputs.clone();
        for var in &self.inputs {
            if let Some(x) = clamped.get_mut(&var.name) {
                if !x.is_finite() {
                    return Err(FuzzyError::NonFiniteInput(var.name.clone()));
                }
                *x = var.universe.clamp(*x);
            }
        }
        Ok(clamped)
    }

    /// Rules sharing a consequent set are merged with the s-norm before
    /// reduction; each set then contributes once with its centroid interval.
    fn consequent_terms(
        &self,
        out: &LinguisticVariable,
        firings: &[RuleFiring<'_>],
    ) -> Vec<WeightedCentroid> {
        let mut merged: Vec<(&str, FiringInterval)> = Vec::new();
        for f in firings
            .iter()
            .filter(|f| f.rule.consequent.variable == out.name)
        {
            let label = f.rule.consequent.term.as_str();
            match merged.iter_mut().find(|(l, _)| *l == label) {
                Some((_, acc)) => *acc = acc.join(f.firing),
                None => merged.push((label, f.firing)),
            }
        }
        merged
            .into_iter()
            .map(|(label, firing)| WeightedCentroid {
                firing,
                centroid: out.term(label).expect("validated").mf.centroid(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mirror_system(spread: f64) -> It2FuzzySystem {
        let u = Universe::default();
        let input = LinguisticVariable::standard("error", u, 10.0, spread).unwrap();
        let output = LinguisticVariable::standard("correction", u, 10.0, spread).unwrap();
        let rules = (0..11)
            .map(|i| {
                Rule::new(
                    vec![Clause::new("error", STANDARD_LABELS[i])],
                    Clause::new("correction", STANDARD_LABELS[10 - i]),
                )
            })
            .collect();
        It2FuzzySystem::new(vec![input], vec![output], rules).unwrap()
    }

    fn two_input_system() -> It2FuzzySystem {
        let u = Universe::default();
        let a = LinguisticVariable::standard("a", u, 10.0, 2.0).unwrap();
        let b = LinguisticVariable::standard("b", u, 10.0, 2.0).unwrap();
        let out = LinguisticVariable::standard("y", u, 10.0, 2.0).unwrap();
        let rules = STANDARD_LABELS
            .iter()
            .map(|l| {
                Rule::new(
                    vec![Clause::new("a", *l), Clause::new("b", *l)],
                    Clause::new("y", *l),
                )
            })
            .collect();
        It2FuzzySystem::new(vec![a, b], vec![out], rules).unwrap()
    }

    #[test]
    fn standard_layout() {
        let v = LinguisticVariable::standard("x", Universe::default(), 10.0, 2.0).unwrap();
        let centers: Vec<f64> = v.terms().iter().map(|t| t.mf.center).collect();
        assert_eq!(centers.len(), 11);
        assert_eq!(centers[0], -100.0);
        assert_eq!(centers[5], 0.0);
        assert_eq!(centers[10], 100.0);
        assert!(v.is_symmetric());
        for i in 0..11 {
            assert_eq!(centers[i], -centers[10 - i]);
        }
    }

    #[test]
    fn variable_validation() {
        let u = Universe::default();
        let t = |l: &str, c: f64| Term {
            label: l.into(),
            mf: It2GaussianMf::new(c, 5.0, 0.0).unwrap(),
        };
        assert!(matches!(
            LinguisticVariable::new("v", u, vec![t("a", 0.0), t("a", 10.0)]),
            Err(FuzzyError::DuplicateTerm { .. })
        ));
        assert!(matches!(
            LinguisticVariable::new("v", u, vec![t("a", 10.0), t("b", 0.0)]),
            Err(FuzzyError::TermOrder(_))
        ));
    }

    #[test]
    fn rule_validation() {
        let u = Universe::default();
        let input = LinguisticVariable::standard("e", u, 10.0, 0.0).unwrap();
        let output = LinguisticVariable::standard("c", u, 10.0, 0.0).unwrap();
        let bad_term = Rule::new(vec![Clause::new("e", "Huge")], Clause::new("c", "Zero"));
        assert!(matches!(
            It2FuzzySystem::new(vec![input.clone()], vec![output.clone()], vec![bad_term]),
            Err(FuzzyError::UnknownTerm { .. })
        ));
        let bad_var = Rule::new(vec![Clause::new("q", "Zero")], Clause::new("c", "Zero"));
        assert!(matches!(
            It2FuzzySystem::new(vec![input.clone()], vec![output.clone()], vec![bad_var]),
            Err(FuzzyError::UnknownVariable(_))
        ));
        let empty = Rule::new(vec![], Clause::new("c", "Zero"));
        assert!(matches!(
            It2FuzzySystem::new(vec![input], vec![output], vec![empty]),
            Err(FuzzyError::EmptyAntecedent(0))
        ));
    }

    #[test]
    fn coverage_gap_is_rejected() {
        let u = Universe::default();
        let narrow = LinguisticVariable::new(
            "e",
            u,
            vec![Term {
                label: "Zero".into(),
                mf: It2GaussianMf::new(0.0, 0.5, 0.0).unwrap(),
            }],
        )
        .unwrap();
        let output = LinguisticVariable::standard("c", u, 10.0, 0.0).unwrap();
        let rule = Rule::new(vec![Clause::new("e", "Zero")], Clause::new("c", "Zero"));
        assert!(matches!(
            It2FuzzySystem::new(vec![narrow], vec![output], vec![rule]),
            Err(FuzzyError::Coverage { .. })
        ));
    }

    #[test]
    fn single_antecedent_firing_equals_degree() {
        let s = mirror_system(2.0);
        let inputs = Inputs::from([("error".to_string(), 13.0)]);
        let firings = s.fire_rules(&inputs).unwrap();
        for f in &firings {
            let mf = s
                .input("error")
                .unwrap()
                .term(&f.rule.antecedents[0].term)
                .unwrap()
                .mf;
            assert_eq!(f.firing, mf.degree(13.0));
        }
    }

    #[test]
    fn conjunction_takes_elementwise_minimum() {
        let s = two_input_system();
        let inputs = Inputs::from([("a".to_string(), -7.0), ("b".to_string(), 31.0)]);
        let firings = s.fire_rules(&inputs).unwrap();
        let a = s.input("a").unwrap();
        let b = s.input("b").unwrap();
        for f in firings {
            let da = a.term(&f.rule.antecedents[0].term).unwrap().mf.degree(-7.0);
            let db = b.term(&f.rule.antecedents[1].term).unwrap().mf.degree(31.0);
            assert_eq!(f.firing.lower, da.lower.min(db.lower));
            assert_eq!(f.firing.upper, da.upper.min(db.upper));
        }
    }

    #[test]
    fn missing_input_names_variable() {
        let s = two_input_system();
        let inputs = Inputs::from([("a".to_string(), 1.0)]);
        match s.fire_rules(&inputs) {
            Err(FuzzyError::MissingInput(v)) => assert_eq!(v, "b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let s = mirror_system(2.0);
        assert!(s.evaluate_scalar(0.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn negative_error_gives_positive_correction() {
        let s = mirror_system(2.0);
        assert!(s.evaluate_scalar(-40.0).unwrap() > 0.0);
        assert!(s.evaluate_scalar(40.0).unwrap() < 0.0);
    }

    #[test]
    fn out_of_universe_inputs_are_clamped() {
        let s = mirror_system(2.0);
        assert_eq!(
            s.evaluate_scalar(450.0).unwrap(),
            s.evaluate_scalar(100.0).unwrap()
        );
        assert_eq!(
            s.evaluate_scalar(-1e6).unwrap(),
            s.evaluate_scalar(-100.0).unwrap()
        );
        assert!(matches!(
            s.evaluate_scalar(f64::NAN),
            Err(FuzzyError::NonFiniteInput(_))
        ));
    }

    #[test]
    fn evaluation_is_bit_identical() {
        let s = mirror_system(2.0);
        for x in [-73.2, -0.5, 12.25, 99.0] {
            assert_eq!(
                s.evaluate_scalar(x).unwrap().to_bits(),
                s.evaluate_scalar(x).unwrap().to_bits()
            );
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn antisymmetric_and_bounded(x in -150.0f64..150.0, spread in 0.0f64..4.0) {
                let s = mirror_system(spread);
                let y = s.evaluate_scalar(x).unwrap();
                let y_neg = s.evaluate_scalar(-x).unwrap();
                prop_assert!((y + y_neg).abs() < 1e-6);
                prop_assert!((-100.0..=100.0).contains(&y));
            }

            #[test]
            fn two_input_outputs_stay_in_universe(a in -120.0f64..120.0, b in -120.0f64..120.0) {
                let s = two_input_system();
                let out = s.evaluate(&Inputs::from([("a".into(), a), ("b".into(), b)]));
                match out {
                    Ok(m) => prop_assert!((-100.0..=100.0).contains(&m["y"])),
                    // far-apart inputs can underflow every conjunction
                    Err(e) => prop_assert!(matches!(e, FuzzyError::NoRuleFired)),
                }
            }
        }
    }
}
