//! Pieces shared by the fitters: outcomes, initialization, restart selection
//! and a dispatcher over fitting methods.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit_kl::{em_fit_exact, em_fit_sampled, EmConfig};
use crate::fit_meanfield::{mixture_of_meanfield, MeanFieldConfig};
use crate::fit_quadratic::{fit_quadratic, Objective, QuadraticFitConfig};
use crate::mixture::MixtureModel;
use crate::network::BayesNet;
use crate::parallel::Execution;

/// Parameters are kept inside `[PARAM_FLOOR, 1 - PARAM_FLOOR]`.
pub const PARAM_FLOOR: f64 = 1e-6;

pub(crate) fn clamp_param(q: f64) -> f64 {
    q.clamp(PARAM_FLOOR, 1.0 - PARAM_FLOOR)
}

/// Uniform weights, parameters uniform in `[0.25, 0.75]`.
pub(crate) fn init_params<R: Rng + ?Sized>(rng: &mut R, m: usize, n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let weights = vec![1.0 / m as f64; m];
    let params = (0..m)
        .map(|_| (0..n).map(|_| rng.gen_range(0.25..=0.75)).collect())
        .collect();
    (weights, params)
}

/// A fitted model with the objective trace of the winning restart.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: MixtureModel,
    pub trace: Vec<f64>,
    pub best_restart: usize,
    /// Final objective of every restart, in restart order.
    pub restart_objectives: Vec<f64>,
}

impl FitOutcome {
    pub fn objective(&self) -> f64 {
        self.trace.last().copied().unwrap_or(f64::NAN)
    }
}

/// Lowest final objective wins, ties to the lowest restart index.
pub(crate) fn best_of(runs: Vec<(MixtureModel, Vec<f64>)>) -> FitOutcome {
    let finals: Vec<f64> = runs
        .iter()
        .map(|(_, t)| t.last().copied().unwrap_or(f64::INFINITY))
        .collect();
    let best = finals
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v < finals[best] { i } else { best });
    let (model, trace) = runs.into_iter().nth(best).expect("at least one restart");
    FitOutcome {
        model,
        trace,
        best_restart: best,
        restart_objectives: finals,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    KlExact,
    KlSampled,
    Se,
    Ese,
    Meanfield,
}

impl FitMethod {
    pub const ALL: [FitMethod; 5] = [
        FitMethod::KlExact,
        FitMethod::KlSampled,
        FitMethod::Se,
        FitMethod::Ese,
        FitMethod::Meanfield,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FitMethod::KlExact => "kl-exact",
            FitMethod::KlSampled => "kl-sampled",
            FitMethod::Se => "se",
            FitMethod::Ese => "ese",
            FitMethod::Meanfield => "meanfield",
        }
    }
}

impl fmt::Display for FitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FitMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

/// Method-independent fitting settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSettings {
    pub components: usize,
    pub seed: u64,
    pub restarts: usize,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    /// Sample count for `kl-sampled`.
    pub samples: usize,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            components: 4,
            seed: 0,
            restarts: 20,
            tol: None,
            max_iters: None,
            samples: 200_000,
            execution: Execution::default(),
        }
    }
}

/// Runs `method` with `settings`. For `meanfield` the component count is
/// decided by the number of distinct fixed points; `components` is ignored.
pub fn run_fit(net: &BayesNet, method: FitMethod, settings: &FitSettings) -> Result<FitOutcome> {
    match method {
        FitMethod::KlExact | FitMethod::KlSampled => {
            let mut cfg = EmConfig::new(settings.components)
                .seed(settings.seed)
                .restarts(settings.restarts)
                .execution(settings.execution);
            if let Some(t) = settings.tol {
                cfg = cfg.tol(t);
            }
            if let Some(m) = settings.max_iters {
                cfg = cfg.max_iters(m);
            }
            if method == FitMethod::KlExact {
                em_fit_exact(net, &cfg)
            } else {
                em_fit_sampled(net, &cfg, settings.samples)
            }
        }
        FitMethod::Se | FitMethod::Ese => {
            let objective = if method == FitMethod::Se {
                Objective::Se
            } else {
                Objective::Ese
            };
            let mut cfg = QuadraticFitConfig::new(objective, settings.components)
                .seed(settings.seed)
                .restarts(settings.restarts)
                .execution(settings.execution);
            if let Some(t) = settings.tol {
                cfg = cfg.tol(t);
            }
            if let Some(m) = settings.max_iters {
                cfg = cfg.max_sweeps(m);
            }
            fit_quadratic(net, &cfg)
        }
        FitMethod::Meanfield => {
            let mut cfg = MeanFieldConfig::new(settings.restarts.max(1))
                .seed(settings.seed)
                .execution(settings.execution);
            if let Some(t) = settings.tol {
                cfg = cfg.tol(t);
            }
            if let Some(m) = settings.max_iters {
                cfg = cfg.max_sweeps(m);
            }
            let ensemble = mixture_of_meanfield(net, &cfg)?;
            let trace = vec![crate::fit_meanfield::bkl_value(net, &ensemble)?];
            Ok(FitOutcome {
                model: ensemble,
                trace,
                best_restart: 0,
                restart_objectives: vec![],
            })
        }
    }
}
