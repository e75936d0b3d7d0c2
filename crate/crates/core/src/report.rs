//! The JSON report written by a fit run.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fit::{FitMethod, FitOutcome, FitSettings};
use crate::metrics::{distance_report, DistanceReport, ENUMERATION_LIMIT};
use crate::mixture::{MixtureDoc, MixtureModel};
use crate::network::BayesNet;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub method: FitMethod,
    pub config: FitSettings,
    pub mixture: MixtureDoc,
    /// Absent when the network is too large to enumerate.
    pub distances: Option<DistanceReport>,
    #[serde(with = "crate::serde_float::vec")]
    pub trace: Vec<f64>,
    pub best_restart: usize,
    #[serde(with = "crate::serde_float::vec")]
    pub restart_objectives: Vec<f64>,
    pub duration_seconds: f64,
}

impl FitReport {
    pub fn new(
        net: &BayesNet,
        method: FitMethod,
        config: &FitSettings,
        outcome: &FitOutcome,
        duration_seconds: f64,
    ) -> Result<Self> {
        let distances = if net.len() <= ENUMERATION_LIMIT {
            Some(distance_report(net, &outcome.model, method.as_str())?)
        } else {
            None
        };
        Ok(Self {
            method,
            config: config.clone(),
            mixture: outcome.model.to_doc(),
            distances,
            trace: outcome.trace.clone(),
            best_restart: outcome.best_restart,
            restart_objectives: outcome.restart_objectives.clone(),
            duration_seconds,
        })
    }

    pub fn model(&self) -> Result<MixtureModel> {
        MixtureModel::from_doc(self.mixture.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
