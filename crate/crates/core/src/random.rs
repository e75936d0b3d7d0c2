//! Random networks and mixtures for property tests and benchmarks.

use rand::Rng;

use crate::mixture::MixtureModel;
use crate::network::{BayesNet, Cpt};

/// A random DAG over `n` variables: each variable draws up to `max_parents`
/// parents among lower indices, CPT entries uniform in `[lo, hi]`.
pub fn random_network<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    max_parents: usize,
    lo: f64,
    hi: f64,
) -> BayesNet {
    let names = (0..n).map(|i| format!("v{i}")).collect();
    let cpts = (0..n)
        .map(|child| {
            let k = rng.gen_range(0..=max_parents.min(child));
            let mut pool: Vec<usize> = (0..child).collect();
            let mut parents = Vec::with_capacity(k);
            for _ in 0..k {
                let at = rng.gen_range(0..pool.len());
                parents.push(pool.swap_remove(at));
            }
            let p_one = (0..1usize << k).map(|_| rng.gen_range(lo..=hi)).collect();
            Cpt {
                child,
                parents,
                p_one,
            }
        })
        .collect();
    BayesNet::new(names, cpts).expect("random construction is valid")
}

/// A random mixture bound to `names`, parameters uniform in `[lo, hi]`.
pub fn random_mixture<R: Rng + ?Sized>(
    rng: &mut R,
    names: Vec<String>,
    components: usize,
    lo: f64,
    hi: f64,
) -> MixtureModel {
    let n = names.len();
    let raw: Vec<f64> = (0..components).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    let params = (0..components)
        .map(|_| (0..n).map(|_| rng.gen_range(lo..=hi)).collect())
        .collect();
    MixtureModel::new(names, weights, params).expect("random construction is valid")
}
