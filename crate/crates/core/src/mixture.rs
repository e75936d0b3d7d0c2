//! Mixtures of fully factorized Bernoulli components ("scenarios").
//!
//! `Q(x) = sum_i q_i Q(x|i)` with `Q(x|i) = prod_j q_ij^x_j (1 - q_ij)^(1 - x_j)`.
//! Densities are accumulated in log space; a component with an exact zero
//! factor contributes exactly zero.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::Evidence;
use crate::network::{Assignment, BayesNet};

/// Weight sums within this distance of one are renormalized on construction.
pub const WEIGHT_RENORMALIZE_TOL: f64 = 1e-6;

#[inline]
pub(crate) fn bernoulli(q: f64, value: bool) -> f64 {
    if value {
        q
    } else {
        1.0 - q
    }
}

#[inline]
fn ln_bernoulli(q: f64, value: bool) -> f64 {
    bernoulli(q, value).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    names: Vec<String>,
    weights: Vec<f64>,
    params: Vec<Vec<f64>>,
}

/// Serialized mixture document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureDoc {
    pub variables: Vec<String>,
    pub weights: Vec<f64>,
    pub params: Vec<Vec<f64>>,
}

impl MixtureModel {
    pub fn new(names: Vec<String>, weights: Vec<f64>, params: Vec<Vec<f64>>) -> Result<Self> {
        let m = weights.len();
        if m == 0 {
            return Err(Error::InvalidMixture("at least one component required".into()));
        }
        if params.len() != m {
            return Err(Error::InvalidMixture(format!(
                "{m} weights but {} parameter rows",
                params.len()
            )));
        }
        let n = names.len();
        for (i, row) in params.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidMixture(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if let Some(q) = row.iter().find(|q| !(0.0..=1.0).contains(*q)) {
                return Err(Error::InvalidMixture(format!(
                    "parameter {q} in row {i} outside [0, 1]"
                )));
            }
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidMixture("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_RENORMALIZE_TOL {
            return Err(Error::InvalidMixture(format!("weights sum to {total}")));
        }
        // already normalized up to rounding: dividing again would drift by an ulp
        let weights = if (total - 1.0).abs() <= 4.0 * f64::EPSILON {
            weights
        } else {
            weights.into_iter().map(|w| w / total).collect()
        };
        Ok(Self {
            names,
            weights,
            params,
        })
    }

    /// A single component with parameters `params`.
    pub fn single(names: Vec<String>, params: Vec<f64>) -> Result<Self> {
        Self::new(names, vec![1.0], vec![params])
    }

    pub fn from_doc(doc: MixtureDoc) -> Result<Self> {
        Self::new(doc.variables, doc.weights, doc.params)
    }

    pub fn to_doc(&self) -> MixtureDoc {
        MixtureDoc {
            variables: self.names.clone(),
            weights: self.weights.clone(),
            params: self.params.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("mixture document serializes")
    }

    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn num_variables(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn params(&self) -> &[Vec<f64>] {
        &self.params
    }

    pub fn param(&self, i: usize, j: usize) -> f64 {
        self.params[i][j]
    }

    /// Errors unless the columns bind to the network's variables in order.
    pub fn check_variables(&self, net: &BayesNet) -> Result<()> {
        if self.names.len() != net.len() {
            return Err(Error::VariableMismatch(format!(
                "mixture has {} variables, network {}",
                self.names.len(),
                net.len()
            )));
        }
        for (j, name) in self.names.iter().enumerate() {
            if name != net.name(j) {
                return Err(Error::VariableMismatch(format!(
                    "column {j} is `{name}`, network has `{}`",
                    net.name(j)
                )));
            }
        }
        Ok(())
    }

    /// `ln Q(x|i)`, `-inf` when a factor is exactly zero.
    pub fn component_ln_density(&self, i: usize, x: &Assignment) -> f64 {
        self.params[i]
            .iter()
            .enumerate()
            .map(|(j, &q)| ln_bernoulli(q, x.get(j)))
            .sum()
    }

    pub fn component_density(&self, i: usize, x: &Assignment) -> f64 {
        self.component_ln_density(i, x).exp()
    }

    /// `Q(x|i)` for a bitmask state.
    pub fn component_density_state(&self, i: usize, state: usize) -> f64 {
        self.params[i]
            .iter()
            .enumerate()
            .map(|(j, &q)| ln_bernoulli(q, (state >> j) & 1 == 1))
            .sum::<f64>()
            .exp()
    }

    pub fn mixture_density(&self, x: &Assignment) -> f64 {
        (0..self.num_components())
            .map(|i| self.weights[i] * self.component_density(i, x))
            .sum()
    }

    pub fn mixture_density_state(&self, state: usize) -> f64 {
        (0..self.num_components())
            .map(|i| self.weights[i] * self.component_density_state(i, state))
            .sum()
    }

    /// `P(x_j = 1) = sum_i q_i q_ij`.
    pub fn mixture_marginals(&self) -> Vec<f64> {
        (0..self.num_variables())
            .map(|j| {
                self.weights
                    .iter()
                    .zip(&self.params)
                    .map(|(w, row)| w * row[j])
                    .sum()
            })
            .collect()
    }

    /// `sum_x Q(x|i) Q(x|k) = prod_j [q_ij q_kj + (1 - q_ij)(1 - q_kj)]`.
    pub fn component_overlap(&self, i: usize, k: usize) -> f64 {
        self.params[i]
            .iter()
            .zip(&self.params[k])
            .map(|(a, b)| a * b + (1.0 - a) * (1.0 - b))
            .product()
    }

    /// `ln Q(e|i)`.
    pub fn evidence_ln_likelihood(&self, i: usize, e: &Evidence) -> f64 {
        e.iter()
            .map(|(&j, &v)| ln_bernoulli(self.params[i][j], v))
            .sum()
    }

    /// Reweights the scenarios by `q_i Q(e|i)`. Component parameters are
    /// left untouched.
    pub fn condition(&self, e: &Evidence) -> Result<ConditionalScenarioView> {
        if let Some((&j, _)) = e.iter().find(|(&j, _)| j >= self.num_variables()) {
            return Err(Error::UnknownVariable(format!("#{j}")));
        }
        let logs: Vec<f64> = (0..self.num_components())
            .map(|i| self.weights[i].ln() + self.evidence_ln_likelihood(i, e))
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::ImpossibleEvidence);
        }
        let unnorm: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = unnorm.iter().sum();
        let reweighted: Vec<f64> = unnorm.iter().map(|u| u / z).collect();
        let posterior = (0..self.num_variables())
            .map(|j| match e.get(j) {
                Some(v) => v as u8 as f64,
                None => reweighted
                    .iter()
                    .zip(&self.params)
                    .map(|(w, row)| w * row[j])
                    .sum::<f64>()
                    .clamp(0.0, 1.0),
            })
            .collect();
        Ok(ConditionalScenarioView {
            reweighted_weights: reweighted,
            evidence: e.clone(),
            posterior_marginals: posterior,
        })
    }

    /// The same scenarios with new weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.names.clone(), weights, self.params.clone())
    }

    /// Components reordered by descending weight (stable on ties).
    pub fn sorted_by_weight(&self) -> Self {
        let mut order: Vec<usize> = (0..self.num_components()).collect();
        order.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]));
        Self {
            names: self.names.clone(),
            weights: order.iter().map(|&i| self.weights[i]).collect(),
            params: order.iter().map(|&i| self.params[i].clone()).collect(),
        }
    }

    /// Scenario table: one row per component, its weight, then `q_ij` per
    /// variable (the probability of a positive finding of node `j` in
    /// scenario `i`). Four decimals.
    pub fn write_scenario_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["component".to_string(), "weight".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (i, row) in self.params.iter().enumerate() {
            let mut rec = vec![(i + 1).to_string(), format!("{:.4}", self.weights[i])];
            rec.extend(row.iter().map(|q| format!("{q:.4}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn parse_mixture(text: &str) -> Result<MixtureModel> {
    MixtureModel::from_doc(serde_json::from_str(text)?)
}

/// A mixture conditioned on evidence: the same scenarios, reweighted.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalScenarioView {
    pub reweighted_weights: Vec<f64>,
    pub evidence: Evidence,
    /// `Q(x_j = 1 | e)` per variable; observed variables carry their value.
    pub posterior_marginals: Vec<f64>,
}

impl ConditionalScenarioView {
    /// Unobserved variables with their posterior marginals.
    pub fn unknowns(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.posterior_marginals
            .iter()
            .enumerate()
            .filter(|(j, _)| !self.evidence.contains(*j))
            .map(|(j, &p)| (j, p))
    }
}
