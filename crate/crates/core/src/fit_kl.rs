//! KL(P || Q) minimization by EM over the full state space, or over an
//! ancestral sample drawn from the network.
//!
//! Both variants run the same weighted Bernoulli-mixture EM: the exact one
//! weighs every state by `P(x)`, the sampled one by its empirical frequency.
//! The objective reported is `KL(weights || Q)`, which for the exact variant
//! is the true `KL(P || Q)`.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
pub use crate::fit::FitOutcome;
use crate::fit::{best_of, clamp_param, init_params};
use crate::metrics::{joint_table, ENUMERATION_LIMIT};
use crate::mixture::MixtureModel;
use crate::network::{Assignment, BayesNet};
use crate::parallel::{derive_seed, map_indexed, Execution};

/// Components whose total responsibility falls below this are empty.
const EMPTY_RESPONSIBILITY: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct EmConfig {
    pub num_components: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub restarts: usize,
    pub execution: Execution,
}

impl EmConfig {
    pub fn new(num_components: usize) -> Self {
        Self {
            num_components,
            max_iters: 500,
            tol: 1e-9,
            seed: 0,
            restarts: 1,
            execution: Execution::default(),
        }
    }

    pub fn max_iters(mut self, v: usize) -> Self {
        self.max_iters = v;
        self
    }

    pub fn tol(mut self, v: f64) -> Self {
        self.tol = v;
        self
    }

    pub fn seed(mut self, v: u64) -> Self {
        self.seed = v;
        self
    }

    pub fn restarts(mut self, v: usize) -> Self {
        self.restarts = v;
        self
    }

    pub fn execution(mut self, v: Execution) -> Self {
        self.execution = v;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_components == 0 {
            return Err(Error::InvalidConfig("components must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidConfig("tol must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// `Q(i | x)` for every weighted point; row `p` sums to one.
#[derive(Debug, Clone)]
pub struct Responsibilities {
    rows: Vec<Vec<f64>>,
}

impl Responsibilities {
    pub fn get(&self, component: usize, point: usize) -> f64 {
        self.rows[point][component]
    }

    pub fn row(&self, point: usize) -> &[f64] {
        &self.rows[point]
    }
}

/// Weighted data: bitmask states and nonnegative weights summing to one.
struct WeightedStates {
    states: Vec<usize>,
    weights: Vec<f64>,
    entropy: f64,
}

impl WeightedStates {
    fn new(states: Vec<usize>, weights: Vec<f64>) -> Self {
        let entropy = weights
            .iter()
            .filter(|&&w| w > 0.0)
            .map(|w| w * w.ln())
            .sum::<f64>();
        Self {
            states,
            weights,
            entropy,
        }
    }
}

struct EmState {
    weights: Vec<f64>,
    params: Vec<Vec<f64>>,
    reseeded: Vec<bool>,
}

impl EmState {
    fn ln_joint(&self, i: usize, state: usize) -> f64 {
        self.weights[i].ln()
            + self.params[i]
                .iter()
                .enumerate()
                .map(|(j, &q)| if (state >> j) & 1 == 1 { q.ln() } else { (1.0 - q).ln() })
                .sum::<f64>()
    }

    fn ln_row(&self, state: usize, row: &mut [f64]) -> f64 {
        for (i, r) in row.iter_mut().enumerate() {
            *r = self.ln_joint(i, state);
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return max;
        }
        max + row.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
    }

    /// `KL(data || Q)`.
    fn objective(&self, data: &WeightedStates) -> f64 {
        let mut row = vec![0.0; self.weights.len()];
        let cross: f64 = data
            .states
            .iter()
            .zip(&data.weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&s, &w)| w * self.ln_row(s, &mut row))
            .sum();
        data.entropy - cross
    }

    fn responsibilities(&self, data: &WeightedStates) -> Responsibilities {
        let m = self.weights.len();
        let rows = data
            .states
            .iter()
            .map(|&s| {
                let mut row = vec![0.0; m];
                let z = self.ln_row(s, &mut row);
                for r in &mut row {
                    *r = (*r - z).exp();
                }
                row
            })
            .collect();
        Responsibilities { rows }
    }

    fn step(&mut self, data: &WeightedStates, rng: &mut ChaCha8Rng) {
        let m = self.weights.len();
        let n = self.params[0].len();
        let resp = self.responsibilities(data);
        let mut mass = vec![0.0; m];
        let mut ones = vec![vec![0.0; n]; m];
        for (p, (&s, &w)) in data.states.iter().zip(&data.weights).enumerate() {
            for i in 0..m {
                let r = w * resp.get(i, p);
                mass[i] += r;
                for (j, acc) in ones[i].iter_mut().enumerate() {
                    if (s >> j) & 1 == 1 {
                        *acc += r;
                    }
                }
            }
        }
        let total: f64 = mass.iter().sum();
        let mut reseed = Vec::new();
        for i in 0..m {
            if self.weights[i] == 0.0 {
                continue;
            }
            if mass[i] < EMPTY_RESPONSIBILITY {
                if self.reseeded[i] {
                    self.weights[i] = 0.0;
                } else {
                    reseed.push(i);
                }
                continue;
            }
            self.weights[i] = mass[i] / total;
            for (q, &one) in self.params[i].iter_mut().zip(&ones[i]) {
                *q = clamp_param(one / mass[i]);
            }
        }
        if !reseed.is_empty() {
            let (_, fresh) = init_params(rng, reseed.len(), n);
            for (&i, row) in reseed.iter().zip(fresh) {
                self.reseeded[i] = true;
                self.params[i] = row;
                self.weights[i] = 1.0 / m as f64;
            }
        }
        let z: f64 = self.weights.iter().sum();
        for w in &mut self.weights {
            *w /= z;
        }
    }
}

fn run_restart(data: &WeightedStates, names: &[String], cfg: &EmConfig, seed: u64) -> (MixtureModel, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (weights, params) = init_params(&mut rng, cfg.num_components, names.len());
    let mut state = EmState {
        weights,
        params,
        reseeded: vec![false; cfg.num_components],
    };
    let mut trace = vec![state.objective(data)];
    for _ in 0..cfg.max_iters {
        state.step(data, &mut rng);
        let obj = state.objective(data);
        let prev = *trace.last().unwrap();
        trace.push(obj);
        if (prev - obj).abs() < cfg.tol {
            break;
        }
    }
    let model = MixtureModel::new(names.to_vec(), state.weights, state.params)
        .expect("EM keeps weights on the simplex and parameters in range");
    (model, trace)
}

fn fit_weighted(data: &WeightedStates, names: &[String], cfg: &EmConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    let runs = map_indexed(cfg.execution, cfg.restarts, |r| {
        run_restart(data, names, cfg, derive_seed(cfg.seed, r as u64))
    });
    Ok(best_of(runs))
}

/// EM over all `2^N` states weighted by `P(x)`. The trace holds
/// `KL(P || Q)` at initialization and after every iteration.
pub fn em_fit_exact(net: &BayesNet, cfg: &EmConfig) -> Result<FitOutcome> {
    let joint = joint_table(net)?;
    let (states, weights): (Vec<usize>, Vec<f64>) = joint
        .into_iter()
        .enumerate()
        .filter(|(_, p)| *p > 0.0)
        .unzip();
    fit_weighted(&WeightedStates::new(states, weights), &net.names(), cfg)
}

/// Draws `num_samples` ancestral samples and fits them by EM. The trace holds
/// the KL divergence from the empirical distribution.
pub fn em_fit_sampled(net: &BayesNet, cfg: &EmConfig, num_samples: usize) -> Result<FitOutcome> {
    if num_samples == 0 {
        return Err(Error::InvalidConfig("num_samples must be at least 1".into()));
    }
    let samples = net.sample_many(num_samples, derive_seed(cfg.seed, u64::MAX));
    em_fit_samples(&samples, &net.names(), cfg)
}

/// EM on an explicit sample set. Repeated samples are merged into weighted
/// points, which leaves every EM quantity unchanged.
pub fn em_fit_samples(samples: &[Assignment], names: &[String], cfg: &EmConfig) -> Result<FitOutcome> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("empty sample set".into()));
    }
    if names.len() >= usize::BITS as usize {
        return Err(Error::TooLarge {
            size: names.len(),
            limit: usize::BITS as usize - 1,
        });
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for s in samples {
        *counts.entry(s.to_state()).or_default() += 1;
    }
    let total = samples.len() as f64;
    let (states, weights): (Vec<usize>, Vec<f64>) =
        counts.into_iter().map(|(s, c)| (s, c as f64 / total)).unzip();
    fit_weighted(&WeightedStates::new(states, weights), names, cfg)
}

/// Responsibilities `Q(i | x)` of `model` for every state of the network.
pub fn responsibilities(model: &MixtureModel, n: usize) -> Result<Responsibilities> {
    if n > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            size: n,
            limit: ENUMERATION_LIMIT,
        });
    }
    let state = EmState {
        weights: model.weights().to_vec(),
        params: model.params().to_vec(),
        reseeded: vec![],
    };
    let data = WeightedStates::new((0..1usize << n).collect(), vec![0.0; 1 << n]);
    Ok(state.responsibilities(&data))
}
