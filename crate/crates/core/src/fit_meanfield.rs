//! Backward-KL machinery: single-component mean-field fixed points, the
//! collection of distinct local optima from many restarts, and mixture
//! weights under a small-overlap assumption.
//!
//! The mean-field update for variable `j` is
//! `q_j = sig(E_Q[log-odds of x_j given its Markov blanket])`, applied in
//! ascending index order, in place. The log-odds splits into one term per
//! family touching `j`, so the expectation is taken family by family.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fit::PARAM_FLOOR;
use crate::metrics::{divergence, joint_table, mixture_table};
use crate::mixture::{bernoulli, MixtureModel};
use crate::network::{Assignment, BayesNet, Cpt};
use crate::parallel::{derive_seed, map_indexed, Execution};

/// CPT entries are clamped to `[CPT_FLOOR, 1 - CPT_FLOOR]` before any log.
pub const CPT_FLOOR: f64 = 1e-9;
/// Fixed points closer than this in max norm are the same solution.
pub const DEDUP_DISTANCE: f64 = 1e-3;

#[inline]
fn ln_cpt(cpt: &Cpt, config: usize, value: bool) -> f64 {
    cpt.prob(config, value).clamp(CPT_FLOOR, 1.0 - CPT_FLOOR).ln()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone)]
pub struct MeanFieldConfig {
    pub restarts: usize,
    pub seed: u64,
    pub max_sweeps: usize,
    /// Sweep residual below which a run counts as converged.
    pub tol: f64,
    /// `new = (1 - damping) * update + damping * old`.
    pub damping: f64,
    pub execution: Execution,
}

impl MeanFieldConfig {
    pub fn new(restarts: usize) -> Self {
        Self {
            restarts,
            seed: 0,
            max_sweeps: 500,
            tol: 1e-12,
            damping: 0.0,
            execution: Execution::default(),
        }
    }

    pub fn seed(mut self, v: u64) -> Self {
        self.seed = v;
        self
    }

    pub fn max_sweeps(mut self, v: usize) -> Self {
        self.max_sweeps = v;
        self
    }

    pub fn tol(mut self, v: f64) -> Self {
        self.tol = v;
        self
    }

    pub fn damping(mut self, v: f64) -> Self {
        self.damping = v;
        self
    }

    pub fn execution(mut self, v: Execution) -> Self {
        self.execution = v;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldState {
    pub q: Vec<f64>,
    /// Largest absolute change during the last sweep.
    pub residual: f64,
}

impl MeanFieldState {
    pub fn new(q: Vec<f64>) -> Self {
        Self {
            q: q.into_iter().map(clamp_q).collect(),
            residual: f64::INFINITY,
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Self {
        Self::new((0..n).map(|_| rng.gen_range(0.05..=0.95)).collect())
    }

    pub fn converged(&self, tol: f64) -> bool {
        self.residual < tol
    }
}

fn clamp_q(q: f64) -> f64 {
    q.clamp(PARAM_FLOOR, 1.0 - PARAM_FLOOR)
}

/// `log P(x_j=1 | blanket) - log P(x_j=0 | blanket)` for the blanket values
/// found in `x`. Entries of `x` outside the Markov blanket of `j` (and `x_j`
/// itself) are not read.
pub fn full_conditional_log_odds(net: &BayesNet, j: usize, x: &Assignment) -> f64 {
    let mut x = x.clone();
    let own = net.cpt(j);
    let k = own.config_of(&x);
    let mut total = ln_cpt(own, k, true) - ln_cpt(own, k, false);
    for &c in net.children(j) {
        let cpt = net.cpt(c);
        let xc = x.get(c);
        x.set(j, true);
        let on = ln_cpt(cpt, cpt.config_of(&x), xc);
        x.set(j, false);
        let off = ln_cpt(cpt, cpt.config_of(&x), xc);
        total += on - off;
    }
    total
}

/// `sum_{configs of scope} prod Bern(q) * f(config as a state bitmask)`.
fn expect_over<F: Fn(usize) -> f64>(scope: &[usize], q: &[f64], f: F) -> f64 {
    (0..1usize << scope.len())
        .map(|k| {
            let mut state = 0;
            let mut w = 1.0;
            for (b, &v) in scope.iter().enumerate() {
                let on = (k >> b) & 1 == 1;
                w *= bernoulli(q[v], on);
                state |= (on as usize) << v;
            }
            if w == 0.0 {
                0.0
            } else {
                w * f(state)
            }
        })
        .sum()
}

/// `E_Q[full_conditional_log_odds(j)]` under the factorized `q`.
pub fn expected_log_odds(net: &BayesNet, j: usize, q: &[f64]) -> f64 {
    let own = net.cpt(j);
    let mut total = expect_over(&own.parents, q, |s| {
        let k = own.config_of_state(s);
        ln_cpt(own, k, true) - ln_cpt(own, k, false)
    });
    for &c in net.children(j) {
        let cpt = net.cpt(c);
        let mut scope: Vec<usize> = cpt.parents.iter().copied().filter(|&p| p != j).collect();
        scope.push(c);
        total += expect_over(&scope, q, |s| {
            let xc = (s >> c) & 1 == 1;
            let on = ln_cpt(cpt, cpt.config_of_state(s | (1 << j)), xc);
            let off = ln_cpt(cpt, cpt.config_of_state(s & !(1 << j)), xc);
            on - off
        });
    }
    total
}

/// One Gauss-Seidel pass over all variables in ascending order.
pub fn mean_field_sweep(net: &BayesNet, state: &MeanFieldState) -> MeanFieldState {
    sweep_damped(net, state, 0.0)
}

pub fn sweep_damped(net: &BayesNet, state: &MeanFieldState, damping: f64) -> MeanFieldState {
    let mut q = state.q.clone();
    let mut residual: f64 = 0.0;
    for j in 0..net.len() {
        let old = q[j];
        let update = sigmoid(expected_log_odds(net, j, &q));
        let new = clamp_q((1.0 - damping) * update + damping * old);
        residual = residual.max((new - old).abs());
        q[j] = new;
    }
    MeanFieldState { q, residual }
}

/// Sweeps until the residual drops below `cfg.tol` or `cfg.max_sweeps`.
pub fn run_to_convergence(net: &BayesNet, mut state: MeanFieldState, cfg: &MeanFieldConfig) -> (MeanFieldState, usize) {
    for sweep in 1..=cfg.max_sweeps {
        state = sweep_damped(net, &state, cfg.damping);
        if state.converged(cfg.tol) {
            return (state, sweep);
        }
    }
    (state, cfg.max_sweeps)
}

/// `BKL(Q || P) = KL(Q || P)` for a single factorized component, from local
/// family expectations (CPT entries clamped as in the log-odds).
pub fn component_bkl(net: &BayesNet, q: &[f64]) -> f64 {
    let entropy_term: f64 = q
        .iter()
        .map(|&p| {
            let mut t = 0.0;
            if p > 0.0 {
                t += p * p.ln();
            }
            if p < 1.0 {
                t += (1.0 - p) * (1.0 - p).ln();
            }
            t
        })
        .sum();
    let cross: f64 = net
        .cpts()
        .iter()
        .map(|cpt| {
            let family = cpt.family();
            expect_over(&family, q, |s| {
                ln_cpt(cpt, cpt.config_of_state(s), (s >> cpt.child) & 1 == 1)
            })
        })
        .sum();
    entropy_term - cross
}

/// Distinct converged fixed points from `cfg.restarts` random starts, sorted
/// by backward KL ascending.
pub fn collect_fixed_points(net: &BayesNet, cfg: &MeanFieldConfig) -> Vec<MeanFieldState> {
    let runs = map_indexed(cfg.execution, cfg.restarts.max(1), |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, r as u64));
        run_to_convergence(net, MeanFieldState::random(&mut rng, net.len()), cfg).0
    });
    let any_converged = runs.iter().any(|s| s.converged(cfg.tol));
    let mut distinct: Vec<MeanFieldState> = Vec::new();
    for s in runs {
        if any_converged && !s.converged(cfg.tol) {
            continue;
        }
        let dup = distinct.iter().any(|d| {
            d.q.iter()
                .zip(&s.q)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                < DEDUP_DISTANCE
        });
        if !dup {
            distinct.push(s);
        }
    }
    let mut keyed: Vec<(f64, MeanFieldState)> = distinct
        .into_iter()
        .map(|s| (component_bkl(net, &s.q), s))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    keyed.into_iter().map(|(_, s)| s).collect()
}

#[derive(Debug, Clone)]
pub struct MeanFieldEnsemble {
    pub components: Vec<MeanFieldState>,
    pub weights: Vec<f64>,
    /// `C = sum_i exp(exponent_i)`.
    pub normalizer: f64,
    /// `-BKL(Q_i || P)` per component.
    pub exponents: Vec<f64>,
}

impl MeanFieldEnsemble {
    pub fn to_mixture(&self, net: &BayesNet) -> MixtureModel {
        MixtureModel::new(
            net.names(),
            self.weights.clone(),
            self.components.iter().map(|c| c.q.clone()).collect(),
        )
        .expect("normalized weights and clamped parameters")
    }
}

/// The exponent of each component's weight:
/// `-sum_j sum_{x_j, parents} Q(x_j, parents | i) log(Q(x_j | i) / P(x_j | parents))`.
pub fn small_overlap_exponents(net: &BayesNet, components: &[MeanFieldState]) -> Vec<f64> {
    components
        .iter()
        .map(|c| -component_bkl(net, &c.q))
        .collect()
}

/// `q_i = exp(exponent_i) / C`.
pub fn small_overlap_weights(net: &BayesNet, components: &[MeanFieldState]) -> Vec<f64> {
    ensemble_from(net, components.to_vec()).weights
}

fn ensemble_from(net: &BayesNet, components: Vec<MeanFieldState>) -> MeanFieldEnsemble {
    let exponents = small_overlap_exponents(net, &components);
    let max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = exponents.iter().map(|e| (e - max).exp()).collect();
    let z: f64 = shifted.iter().sum();
    MeanFieldEnsemble {
        weights: shifted.iter().map(|s| s / z).collect(),
        normalizer: z * max.exp(),
        exponents,
        components,
    }
}

pub fn meanfield_ensemble(net: &BayesNet, cfg: &MeanFieldConfig) -> MeanFieldEnsemble {
    ensemble_from(net, collect_fixed_points(net, cfg))
}

/// Distinct mean-field fixed points weighted by the small-overlap rule.
pub fn mixture_of_meanfield(net: &BayesNet, cfg: &MeanFieldConfig) -> Result<MixtureModel> {
    Ok(meanfield_ensemble(net, cfg).to_mixture(net))
}

/// `BKL(P || Q) = KL(Q || P)` of a whole mixture, by enumeration. `+inf` when
/// `Q` puts mass where `P` has none.
pub fn bkl_value(net: &BayesNet, m: &MixtureModel) -> Result<f64> {
    m.check_variables(net)?;
    Ok(divergence(&mixture_table(m)?, &joint_table(net)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::chest_clinic;
    use crate::network::parse_network;

    fn root(p: f64) -> BayesNet {
        parse_network(&format!(
            r#"{{"variables":[{{"name":"a"}}],"cpts":[{{"child":"a","parents":[],"p_one":[{p}]}}]}}"#
        ))
        .unwrap()
    }

    fn half_net() -> BayesNet {
        parse_network(
            r#"{"variables":[{"name":"a"},{"name":"b"},{"name":"c"}],
                "cpts":[{"child":"a","parents":[],"p_one":[0.5]},
                        {"child":"b","parents":["a"],"p_one":[0.5,0.5]},
                        {"child":"c","parents":["a","b"],"p_one":[0.5,0.5,0.5,0.5]}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn root_log_odds() {
        assert_eq!(full_conditional_log_odds(&root(0.5), 0, &Assignment::zeros(1)), 0.0);
        let p: f64 = 0.2;
        let lo = full_conditional_log_odds(&root(p), 0, &Assignment::zeros(1));
        assert!((lo - (p / (1.0 - p)).ln()).abs() < 1e-15);
    }

    #[test]
    fn half_net_stays_put() {
        let net = half_net();
        let s = mean_field_sweep(&net, &MeanFieldState::new(vec![0.5; 3]));
        assert_eq!(s.q, vec![0.5; 3]);
        assert_eq!(s.residual, 0.0);
        let fps = collect_fixed_points(&net, &MeanFieldConfig::new(10));
        assert_eq!(fps.len(), 1);
        for q in &fps[0].q {
            assert!((q - 0.5).abs() < 1e-9);
        }
        let m = mixture_of_meanfield(&net, &MeanFieldConfig::new(10)).unwrap();
        assert_eq!(m.num_components(), 1);
        assert!(crate::metrics::kl_divergence(&net, &m).unwrap() < 1e-12);
    }

    #[test]
    fn converged_state_is_stationary() {
        let net = chest_clinic();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (s, _) = run_to_convergence(&net, MeanFieldState::random(&mut rng, 8), &MeanFieldConfig::new(1));
        let again = mean_field_sweep(&net, &s);
        for (a, b) in s.q.iter().zip(&again.q) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn fixed_points_are_deterministic() {
        let net = chest_clinic();
        let cfg = MeanFieldConfig::new(12).seed(3);
        assert_eq!(collect_fixed_points(&net, &cfg), collect_fixed_points(&net, &cfg));
    }

    #[test]
    fn single_component_weight() {
        let net = chest_clinic();
        let c = MeanFieldState::new(vec![0.3; 8]);
        assert_eq!(small_overlap_weights(&net, &[c]), vec![1.0]);
    }

    #[test]
    fn damping_reaches_the_same_fixed_point() {
        let net = chest_clinic();
        let start = MeanFieldState::new(vec![0.4; 8]);
        let (plain, _) = run_to_convergence(&net, start.clone(), &MeanFieldConfig::new(1));
        let (damped, _) = run_to_convergence(&net, start, &MeanFieldConfig::new(1).damping(0.5).max_sweeps(5000));
        for (a, b) in plain.q.iter().zip(&damped.q) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}
