//! Divergences between a network's joint distribution and a mixture, by
//! enumeration of all `2^N` states.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{run_fit, FitMethod, FitSettings};
use crate::fit_meanfield::bkl_value;
use crate::fit_quadratic::{ese_value, se_value};
use crate::mixture::MixtureModel;
use crate::network::BayesNet;

/// Enumeration-based routines refuse networks larger than this.
pub const ENUMERATION_LIMIT: usize = 20;

pub(crate) fn check_enumerable(n: usize) -> Result<()> {
    if n > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            size: n,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

/// `P(x)` for every bitmask state.
pub fn joint_table(net: &BayesNet) -> Result<Vec<f64>> {
    check_enumerable(net.len())?;
    Ok((0..1usize << net.len()).map(|s| net.joint_of_state(s)).collect())
}

/// `Q(x)` for every bitmask state.
pub fn mixture_table(m: &MixtureModel) -> Result<Vec<f64>> {
    check_enumerable(m.num_variables())?;
    Ok((0..1usize << m.num_variables())
        .map(|s| m.mixture_density_state(s))
        .collect())
}

/// `sum_x a(x) ln(a(x) / b(x))` with `0 ln 0 = 0`; `+inf` when `b(x) = 0 < a(x)`.
pub(crate) fn divergence(a: &[f64], b: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&p, &q) in a.iter().zip(b) {
        if p > 0.0 {
            if q <= 0.0 {
                return f64::INFINITY;
            }
            total += p * (p / q).ln();
        }
    }
    total
}

/// `KL(P || Q)`.
pub fn kl_divergence(net: &BayesNet, m: &MixtureModel) -> Result<f64> {
    m.check_variables(net)?;
    Ok(divergence(&joint_table(net)?, &mixture_table(m)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub method: String,
    pub num_components: usize,
    #[serde(with = "crate::serde_float::scalar")]
    pub kl: f64,
    #[serde(with = "crate::serde_float::scalar")]
    pub bkl: f64,
    pub se: f64,
    pub ese: f64,
}

impl DistanceReport {
    pub const CSV_HEADER: &'static str = "method,M,kl,bkl,se,ese";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.4},{:.4},{:.4e},{:.4e}",
            self.method, self.num_components, self.kl, self.bkl, self.se, self.ese
        )
    }
}

/// All four distances. SE and ESE come from the factorized evaluators.
pub fn distance_report(net: &BayesNet, m: &MixtureModel, method: &str) -> Result<DistanceReport> {
    Ok(DistanceReport {
        method: method.to_string(),
        num_components: m.num_components(),
        kl: kl_divergence(net, m)?,
        bkl: bkl_value(net, m)?,
        se: se_value(net, m)?,
        ese: ese_value(net, m)?,
    })
}

/// Best objective per component count, fitted independently for each `M`.
pub fn kl_vs_components_curve(
    net: &BayesNet,
    method: FitMethod,
    m_range: std::ops::RangeInclusive<usize>,
    settings: &FitSettings,
) -> Result<Vec<(usize, f64)>> {
    check_enumerable(net.len())?;
    m_range
        .map(|m| {
            let s = FitSettings {
                components: m,
                ..settings.clone()
            };
            let out = run_fit(net, method, &s)?;
            Ok((m, kl_divergence(net, &out.model)?))
        })
        .collect()
}

pub fn write_curve_csv<W: Write>(mut out: W, curve: &[(usize, f64)]) -> Result<()> {
    writeln!(out, "M,kl")?;
    for (m, kl) in curve {
        writeln!(out, "{m},{kl:.4}")?;
    }
    Ok(())
}
