//! Type-1 counterpart of [`It2FuzzySystem`]: same variables and rules, but
//! each set is replaced by its principal Gaussian and reduction is a plain
//! weighted mean of consequent centers.

use std::collections::BTreeMap;

use super::system::{Inputs, It2FuzzySystem, LinguisticVariable};
use super::FuzzyError;

impl It2FuzzySystem {
    pub fn evaluate_type1(&self, inputs: &Inputs) -> Result<BTreeMap<String, f64>, FuzzyError> {
        let mut result = BTreeMap::new();
        for out in self.outputs() {
            // consequent label -> max firing strength
            let mut strengths: BTreeMap<&str, f64> = BTreeMap::new();
            for rule in self
                .rules()
                .iter()
                .filter(|r| r.consequent.variable == out.name)
            {
                let mut strength = 1.0f64;
                for clause in &rule.antecedents {
                    let var = self.input(&clause.variable).expect("validated");
                    let raw = *inputs
                        .get(&clause.variable)
                        .ok_or_else(|| FuzzyError::MissingInput(clause.variable.clone()))?;
                    if !raw.is_finite() {
                        return Err(FuzzyError::NonFiniteInput(clause.variable.clone()));
                    }
                    let x = raw.clamp(var.universe.lo, var.universe.hi);
                    strength = strength.min(principal_degree(var, &clause.term, x));
                }
                let slot = strengths
                    .entry(rule.consequent.term.as_str())
                    .or_insert(0.0);
                *slot = slot.max(strength);
            }
            let (mut num, mut den) = (0.0, 0.0);
            // sum in rule-base term order so results do not depend on map order
            for term in out.terms() {
                if let Some(&f) = strengths.get(term.label.as_str()) {
                    num += f * term.mf.center;
                    den += f;
                }
            }
            if den <= 0.0 {
                return Err(FuzzyError::NoRuleFired);
            }
            result.insert(
                out.name.clone(),
                (num / den).clamp(out.universe.lo, out.universe.hi),
            );
        }
        Ok(result)
    }
}

fn principal_degree(var: &LinguisticVariable, label: &str, x: f64) -> f64 {
    let mf = var.term(label).expect("validated").mf.principal();
    mf.degree(x)
}
