//! Enumeration, grid-search and finite-difference oracles. Everything here
//! works from CPTs and parameters directly, never through the elimination
//! engine or the factorized evaluators.

#![allow(dead_code)]

use bnmix::exact::Evidence;
use bnmix::{BayesNet, MixtureModel};

pub fn joint(net: &BayesNet, state: usize) -> f64 {
    net.cpts()
        .iter()
        .map(|cpt| {
            let config = cpt
                .parents
                .iter()
                .enumerate()
                .fold(0, |k, (b, &p)| k | (((state >> p) & 1) << b));
            let p1 = cpt.p_one[config];
            if (state >> cpt.child) & 1 == 1 {
                p1
            } else {
                1.0 - p1
            }
        })
        .product()
}

pub fn joint_table(net: &BayesNet) -> Vec<f64> {
    (0..1usize << net.len()).map(|s| joint(net, s)).collect()
}

pub fn component(params: &[f64], state: usize) -> f64 {
    params
        .iter()
        .enumerate()
        .map(|(j, &q)| if (state >> j) & 1 == 1 { q } else { 1.0 - q })
        .product()
}

pub fn mixture_at(weights: &[f64], params: &[Vec<f64>], state: usize) -> f64 {
    weights
        .iter()
        .zip(params)
        .map(|(w, p)| w * component(p, state))
        .sum()
}

pub fn mixture_table(m: &MixtureModel) -> Vec<f64> {
    (0..1usize << m.num_variables())
        .map(|s| mixture_at(m.weights(), m.params(), s))
        .collect()
}

/// `sum_x P(x)^A prod_j f_j(x_j)`.
pub fn weighted_sum(net: &BayesNet, exponent: u32, weights: &[[f64; 2]]) -> f64 {
    (0..1usize << net.len())
        .map(|s| {
            let f: f64 = weights
                .iter()
                .enumerate()
                .map(|(j, w)| w[(s >> j) & 1])
                .product();
            joint(net, s).powi(exponent as i32) * f
        })
        .sum()
}

pub fn se(net: &BayesNet, weights: &[f64], params: &[Vec<f64>]) -> f64 {
    (0..1usize << net.len())
        .map(|s| (joint(net, s) - mixture_at(weights, params, s)).powi(2))
        .sum()
}

pub fn ese(net: &BayesNet, weights: &[f64], params: &[Vec<f64>]) -> f64 {
    (0..1usize << net.len())
        .map(|s| {
            let p = joint(net, s);
            p * (p - mixture_at(weights, params, s)).powi(2)
        })
        .sum()
}

pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).ln())
        .sum()
}

/// `KL(Q || P)` of one factorized component.
pub fn component_bkl(net: &BayesNet, params: &[f64]) -> f64 {
    (0..1usize << net.len())
        .map(|s| {
            let q = component(params, s);
            if q > 0.0 {
                q * (q / joint(net, s)).ln()
            } else {
                0.0
            }
        })
        .sum()
}

pub fn posterior(net: &BayesNet, e: &Evidence, j: usize) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for s in 0..1usize << net.len() {
        if e.matches_state(s) {
            let p = joint(net, s);
            den += p;
            if (s >> j) & 1 == 1 {
                num += p;
            }
        }
    }
    num / den
}

pub fn marginals(net: &BayesNet) -> Vec<f64> {
    (0..net.len()).map(|j| posterior(net, &Evidence::new(), j)).collect()
}

/// `P(x_j = 1 | rest)` at a full state, as log-odds.
pub fn conditional_log_odds(net: &BayesNet, j: usize, state: usize) -> f64 {
    let on = joint(net, state | (1 << j));
    let off = joint(net, state & !(1 << j));
    (on / off).ln()
}

/// `min_q q'Gq - 2b'q` over the simplex on a grid of the given step.
pub fn grid_simplex(gram: &[Vec<f64>], linear: &[f64], step: f64) -> (f64, Vec<f64>) {
    let value = |q: &[f64]| {
        let mut v = 0.0;
        for i in 0..q.len() {
            for k in 0..q.len() {
                v += q[i] * gram[i][k] * q[k];
            }
            v -= 2.0 * linear[i] * q[i];
        }
        v
    };
    let n = (1.0 / step).round() as usize;
    let mut best = (f64::INFINITY, vec![]);
    match linear.len() {
        1 => best = (value(&[1.0]), vec![1.0]),
        2 => {
            for a in 0..=n {
                let q = [a as f64 / n as f64, 1.0 - a as f64 / n as f64];
                let v = value(&q);
                if v < best.0 {
                    best = (v, q.to_vec());
                }
            }
        }
        3 => {
            for a in 0..=n {
                for b in 0..=n - a {
                    let q = [a as f64 / n as f64, b as f64 / n as f64, (n - a - b) as f64 / n as f64];
                    let v = value(&q);
                    if v < best.0 {
                        best = (v, q.to_vec());
                    }
                }
            }
        }
        _ => panic!("grid oracle supports up to three weights"),
    }
    best
}

pub fn central_difference<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
