//! Mixture fitting under the squared error `SE = sum_x (P(x) - Q(x))^2` and
//! the expected squared error `ESE = sum_x P(x) (P(x) - Q(x))^2`.
//!
//! Both costs are quadratic in every single parameter `q_ij` and in the weight
//! vector, and every sum they need has the form
//! `sum_x P(x)^A prod_j f_j(x_j)`. Those sums go through
//! [`factored_weighted_sum`], so nothing here enumerates the state space.
//!
//! With `R_i(x) = prod_{k != j} Bern(x_k; q_ik)` and `s = 2 x_j - 1`, the
//! mixture is affine in `q_ij`:
//!
//! ```text
//! Q(x) = alpha(x) + q_ij * beta(x)
//! beta(x)  = q_i R_i(x) s
//! alpha(x) = sum_{l != i} q_l Q(x|l) + [x_j = 0] q_i R_i(x)
//! ```
//!
//! so with `w(x) = 1` (SE) or `P(x)` (ESE) the cost restricted to `q_ij` is
//! `a q^2 - 2 c q + const` where `a = sum w beta^2` and
//! `c = sum w beta (P - alpha)`. The coordinate update is `c / a` projected on
//! the allowed interval.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{factored_weighted_split, factored_weighted_sum, FactorSumQuery};
pub use crate::fit::FitOutcome;
use crate::fit::{best_of, clamp_param, init_params, PARAM_FLOOR};
use crate::fit_kl::{em_fit_exact, EmConfig};
use crate::metrics::ENUMERATION_LIMIT;
use crate::mixture::MixtureModel;
use crate::network::BayesNet;
use crate::parallel::{derive_seed, map_indexed, Execution};
use crate::simplex::{minimize_on_simplex, objective as qp_objective};

/// Quadratic coefficients below this leave the coordinate unchanged.
pub const DEGENERATE_CURVATURE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Se,
    Ese,
}

#[derive(Debug, Clone)]
pub struct QuadraticFitConfig {
    pub objective: Objective,
    pub num_components: usize,
    pub max_sweeps: usize,
    pub tol: f64,
    pub seed: u64,
    pub restarts: usize,
    /// Also descend from the best KL-EM fit (same components, seed and
    /// restart count) when the network is small enough to enumerate.
    pub warm_start: bool,
    pub execution: Execution,
}

impl QuadraticFitConfig {
    pub fn new(objective: Objective, num_components: usize) -> Self {
        Self {
            objective,
            num_components,
            max_sweeps: 500,
            tol: 1e-12,
            seed: 0,
            restarts: 1,
            warm_start: true,
            execution: Execution::default(),
        }
    }

    pub fn max_sweeps(mut self, v: usize) -> Self {
        self.max_sweeps = v;
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

    pub fn warm_start(mut self, v: bool) -> Self {
        self.warm_start = v;
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
        if self.max_sweeps == 0 {
            return Err(Error::InvalidConfig("max_sweeps must be at least 1".into()));
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

fn bern_weights(row: &[f64]) -> Vec<[f64; 2]> {
    row.iter().map(|&q| [1.0 - q, q]).collect()
}

fn product_weights(a: &[f64], b: &[f64]) -> Vec<[f64; 2]> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| [(1.0 - x) * (1.0 - y), x * y])
        .collect()
}

fn query(exponent: u32, weights: Vec<[f64; 2]>) -> FactorSumQuery {
    FactorSumQuery::new(exponent, weights).expect("mixture-derived weights are nonnegative")
}

fn overlap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x * y + (1.0 - x) * (1.0 - y))
        .product()
}

/// The weight subproblem `min_q q' G q - 2 b' q + constant` on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightQp {
    /// `sum_x Q(x|i) Q(x|k)` (SE) or `sum_x P(x) Q(x|i) Q(x|k)` (ESE).
    pub gram: Vec<Vec<f64>>,
    /// `sum_x P(x) Q(x|i)` (SE) or `sum_x P(x)^2 Q(x|i)` (ESE).
    pub linear: Vec<f64>,
    /// `sum_x P(x)^2` (SE) or `sum_x P(x)^3` (ESE).
    pub constant: f64,
}

impl WeightQp {
    pub fn build(net: &BayesNet, params: &[Vec<f64>], objective: Objective) -> Self {
        let n = net.len();
        let m = params.len();
        let mut gram = vec![vec![0.0; m]; m];
        let (constant, linear) = match objective {
            Objective::Se => {
                for i in 0..m {
                    for k in i..m {
                        let g = overlap(&params[i], &params[k]);
                        gram[i][k] = g;
                        gram[k][i] = g;
                    }
                }
                let linear = params
                    .iter()
                    .map(|row| factored_weighted_sum(net, &query(1, bern_weights(row))))
                    .collect();
                (factored_weighted_sum(net, &FactorSumQuery::ones(2, n)), linear)
            }
            Objective::Ese => {
                for i in 0..m {
                    for k in i..m {
                        let g = factored_weighted_sum(net, &query(1, product_weights(&params[i], &params[k])));
                        gram[i][k] = g;
                        gram[k][i] = g;
                    }
                }
                let linear = params
                    .iter()
                    .map(|row| factored_weighted_sum(net, &query(2, bern_weights(row))))
                    .collect();
                (factored_weighted_sum(net, &FactorSumQuery::ones(3, n)), linear)
            }
        };
        Self {
            gram,
            linear,
            constant,
        }
    }

    pub fn value(&self, weights: &[f64]) -> f64 {
        self.constant + qp_objective(&self.gram, &self.linear, weights)
    }
}

/// Objective value for raw (possibly unnormalized) weights and parameters.
pub fn objective_at(net: &BayesNet, weights: &[f64], params: &[Vec<f64>], objective: Objective) -> f64 {
    WeightQp::build(net, params, objective).value(weights)
}

fn check(net: &BayesNet, m: &MixtureModel) -> Result<()> {
    m.check_variables(net)
}

/// `SE(P || Q)` from its three-term decomposition.
pub fn se_value(net: &BayesNet, m: &MixtureModel) -> Result<f64> {
    check(net, m)?;
    Ok(objective_at(net, m.weights(), m.params(), Objective::Se))
}

/// `ESE(P || Q)` from its three-term decomposition.
pub fn ese_value(net: &BayesNet, m: &MixtureModel) -> Result<f64> {
    check(net, m)?;
    Ok(objective_at(net, m.weights(), m.params(), Objective::Ese))
}

/// Coefficients `(a, c)` of the cost restricted to `q_ij`:
/// `cost(q) = a q^2 - 2 c q + const`.
fn coordinate_coefficients(
    net: &BayesNet,
    weights: &[f64],
    params: &[Vec<f64>],
    objective: Objective,
    i: usize,
    j: usize,
) -> (f64, f64) {
    let n = net.len();
    let qi = weights[i];
    let row = &params[i];
    // R_i over all variables except j, as weights with f_j = 1
    let mut rest = bern_weights(row);
    rest[j] = [1.0, 1.0];
    match objective {
        Objective::Se => {
            let self_overlap: f64 = (0..n)
                .filter(|&k| k != j)
                .map(|k| row[k] * row[k] + (1.0 - row[k]) * (1.0 - row[k]))
                .product();
            let a = qi * qi * 2.0 * self_overlap;
            let [p0, p1] = factored_weighted_split(net, &query(1, rest), j);
            let beta_p = qi * (p1 - p0);
            let mut beta_alpha = -qi * qi * self_overlap;
            for (l, other) in params.iter().enumerate() {
                if l == i || weights[l] == 0.0 {
                    continue;
                }
                let cross: f64 = (0..n)
                    .filter(|&k| k != j)
                    .map(|k| row[k] * other[k] + (1.0 - row[k]) * (1.0 - other[k]))
                    .product();
                beta_alpha += qi * weights[l] * (2.0 * other[j] - 1.0) * cross;
            }
            (a, beta_p - beta_alpha)
        }
        Objective::Ese => {
            let squared: Vec<[f64; 2]> = rest.iter().map(|[x, y]| [x * x, y * y]).collect();
            let [v0, v1] = factored_weighted_split(net, &query(1, squared), j);
            let a = qi * qi * (v0 + v1);
            let [t0, t1] = factored_weighted_split(net, &query(2, rest.clone()), j);
            let beta_pp = qi * (t1 - t0);
            let mut beta_p_alpha = -qi * qi * v0;
            for (l, other) in params.iter().enumerate() {
                if l == i || weights[l] == 0.0 {
                    continue;
                }
                let mut w = product_weights(row, other);
                w[j] = [1.0 - other[j], other[j]];
                let [u0, u1] = factored_weighted_split(net, &query(1, w), j);
                beta_p_alpha += qi * weights[l] * (u1 - u0);
            }
            (a, beta_pp - beta_p_alpha)
        }
    }
}

fn minimize_coordinate(a: f64, c: f64, current: f64, lo: f64, hi: f64) -> f64 {
    if a.abs() < DEGENERATE_CURVATURE {
        return current;
    }
    if a > 0.0 {
        (c / a).clamp(lo, hi)
    } else {
        let f = |q: f64| a * q * q - 2.0 * c * q;
        if f(lo) <= f(hi) {
            lo
        } else {
            hi
        }
    }
}

/// Exact minimizer of the cost over `q_ij` in `[0, 1]` with everything else
/// fixed.
pub fn coordinate_update(net: &BayesNet, m: &MixtureModel, objective: Objective, i: usize, j: usize) -> Result<f64> {
    coordinate_update_within(net, m, objective, i, j, 0.0, 1.0)
}

/// As [`coordinate_update`], restricted to `[lo, hi]`.
pub fn coordinate_update_within(
    net: &BayesNet,
    m: &MixtureModel,
    objective: Objective,
    i: usize,
    j: usize,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    check(net, m)?;
    if i >= m.num_components() || j >= net.len() {
        return Err(Error::InvalidConfig(format!("coordinate ({i}, {j}) out of range")));
    }
    let (a, c) = coordinate_coefficients(net, m.weights(), m.params(), objective, i, j);
    Ok(minimize_coordinate(a, c, m.param(i, j), lo, hi))
}

/// Minimizes the cost over the weight simplex starting from the current
/// weights. Never returns weights with a higher cost than the current ones.
pub fn optimize_weights(net: &BayesNet, m: &MixtureModel, objective: Objective) -> Result<Vec<f64>> {
    check(net, m)?;
    Ok(optimize_weights_raw(net, m.weights(), m.params(), objective))
}

fn optimize_weights_raw(net: &BayesNet, weights: &[f64], params: &[Vec<f64>], objective: Objective) -> Vec<f64> {
    let qp = WeightQp::build(net, params, objective);
    let cand = minimize_on_simplex(&qp.gram, &qp.linear, weights);
    // ties (flat directions) go to the solver's answer
    let slack = 1e-14 * qp.constant.abs();
    if qp.value(&cand) <= qp.value(weights) + slack {
        cand
    } else {
        weights.to_vec()
    }
}

/// Partial derivatives of the cost with respect to every `q_ij` and every
/// weight `q_i` (weights treated as free variables).
#[derive(Debug, Clone)]
pub struct Gradient {
    pub params: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

pub fn gradient_at(net: &BayesNet, weights: &[f64], params: &[Vec<f64>], objective: Objective) -> Gradient {
    let m = weights.len();
    let n = net.len();
    let mut gp = vec![vec![0.0; n]; m];
    for (i, row) in gp.iter_mut().enumerate() {
        for (j, g) in row.iter_mut().enumerate() {
            let (a, c) = coordinate_coefficients(net, weights, params, objective, i, j);
            *g = 2.0 * a * params[i][j] - 2.0 * c;
        }
    }
    let qp = WeightQp::build(net, params, objective);
    let gw = (0..m)
        .map(|i| {
            2.0 * qp.gram[i].iter().zip(weights).map(|(g, w)| g * w).sum::<f64>() - 2.0 * qp.linear[i]
        })
        .collect();
    Gradient {
        params: gp,
        weights: gw,
    }
}

fn run_restart(net: &BayesNet, cfg: &QuadraticFitConfig, seed: u64) -> (MixtureModel, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (weights, params) = init_params(&mut rng, cfg.num_components, net.len());
    descend(net, cfg, weights, params)
}

fn descend(
    net: &BayesNet,
    cfg: &QuadraticFitConfig,
    mut weights: Vec<f64>,
    mut params: Vec<Vec<f64>>,
) -> (MixtureModel, Vec<f64>) {
    let n = net.len();
    let mut trace = vec![objective_at(net, &weights, &params, cfg.objective)];
    for _ in 0..cfg.max_sweeps {
        for i in 0..cfg.num_components {
            for j in 0..n {
                let (a, c) = coordinate_coefficients(net, &weights, &params, cfg.objective, i, j);
                params[i][j] = minimize_coordinate(a, c, params[i][j], PARAM_FLOOR, 1.0 - PARAM_FLOOR);
            }
        }
        weights = optimize_weights_raw(net, &weights, &params, cfg.objective);
        let obj = objective_at(net, &weights, &params, cfg.objective);
        let prev = *trace.last().unwrap();
        trace.push(obj);
        if (prev - obj).abs() < cfg.tol {
            break;
        }
    }
    let model = MixtureModel::new(net.names(), weights, params)
        .expect("simplex solver returns feasible weights");
    (model, trace)
}

/// Alternates coordinate sweeps (components outer, variables inner) with
/// weight re-optimization. Best of `restarts` random starts, plus the
/// KL-EM warm start (reported as the last restart) when enabled.
pub fn fit_quadratic(net: &BayesNet, cfg: &QuadraticFitConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    let warm = if cfg.warm_start && net.len() <= ENUMERATION_LIMIT {
        let em = EmConfig::new(cfg.num_components)
            .seed(cfg.seed)
            .restarts(cfg.restarts)
            .execution(cfg.execution);
        Some(em_fit_exact(net, &em)?.model)
    } else {
        None
    };
    fit_quadratic_seeded(net, cfg, warm.as_ref())
}

/// [`fit_quadratic`] with an explicit warm start (ignoring
/// `cfg.warm_start`); the warm run is reported as the last restart.
pub fn fit_quadratic_seeded(
    net: &BayesNet,
    cfg: &QuadraticFitConfig,
    warm: Option<&MixtureModel>,
) -> Result<FitOutcome> {
    cfg.validate()?;
    if let Some(start) = warm {
        check_start(net, cfg, start)?;
    }
    let mut runs = map_indexed(cfg.execution, cfg.restarts, |r| {
        run_restart(net, cfg, derive_seed(cfg.seed, r as u64))
    });
    if let Some(start) = warm {
        runs.push(descend(net, cfg, start.weights().to_vec(), clamped(start.params())));
    }
    Ok(best_of(runs))
}

fn check_start(net: &BayesNet, cfg: &QuadraticFitConfig, start: &MixtureModel) -> Result<()> {
    start.check_variables(net)?;
    if start.num_components() != cfg.num_components {
        return Err(Error::InvalidConfig(format!(
            "start model has {} components, config asks for {}",
            start.num_components(),
            cfg.num_components
        )));
    }
    Ok(())
}

fn clamped(params: &[Vec<f64>]) -> Vec<Vec<f64>> {
    params
        .iter()
        .map(|row| row.iter().map(|&q| clamp_param(q)).collect())
        .collect()
}

/// Runs the same descent from a given starting model instead of random
/// restarts. `cfg.num_components` must match the model.
pub fn refine_quadratic(net: &BayesNet, cfg: &QuadraticFitConfig, start: &MixtureModel) -> Result<FitOutcome> {
    cfg.validate()?;
    check_start(net, cfg, start)?;
    let (model, trace) = descend(net, cfg, start.weights().to_vec(), clamped(start.params()));
    Ok(FitOutcome {
        model,
        restart_objectives: vec![*trace.last().unwrap()],
        trace,
        best_restart: 0,
    })
}
