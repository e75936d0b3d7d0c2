mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bnmix::exact::{
    brute_force_sum, evidence_probability, factored_weighted_split, factored_weighted_sum,
    marginals, posterior_marginal, posterior_marginals, Evidence, FactorSumQuery,
};
use bnmix::fixtures::chest_clinic;
use bnmix::network::{BayesNet, Cpt};
use bnmix::random::random_network;

fn net_from(seed: u64, n: usize) -> BayesNet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_network(&mut rng, n, 3, 0.02, 0.98)
}

fn weights_from(seed: u64, n: usize) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
    (0..n)
        .map(|_| {
            let mut w = [rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0)];
            if rng.gen_bool(0.2) {
                w[rng.gen_range(0..2)] = 0.0;
            }
            w
        })
        .collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn elimination_matches_enumeration(seed in any::<u64>(), n in 1usize..=10, a in 1u32..=3) {
        let net = net_from(seed, n);
        let w = weights_from(seed, n);
        let q = FactorSumQuery::new(a, w.clone()).unwrap();
        let ve = factored_weighted_sum(&net, &q);
        prop_assert!(rel_err(ve, brute_force_sum(&net, &q).unwrap()) < 1e-10);
        prop_assert!(rel_err(ve, common::weighted_sum(&net, a, &w)) < 1e-10);
    }

    #[test]
    fn split_halves_match_enumeration(seed in any::<u64>(), n in 1usize..=9, a in 1u32..=3) {
        let net = net_from(seed, n);
        let w = weights_from(seed, n);
        let j = (seed as usize) % n;
        let halves = factored_weighted_split(&net, &FactorSumQuery::new(a, w.clone()).unwrap(), j);
        for v in 0..2 {
            let mut wv = w.clone();
            wv[j][1 - v] = 0.0;
            prop_assert!(rel_err(halves[v], common::weighted_sum(&net, a, &wv)) < 1e-10);
        }
    }

    #[test]
    fn enlarging_a_weight_never_decreases_the_sum(seed in any::<u64>(), n in 1usize..=8, a in 1u32..=3, bump in 0.0f64..2.0) {
        let net = net_from(seed, n);
        let w = weights_from(seed, n);
        let base = factored_weighted_sum(&net, &FactorSumQuery::new(a, w.clone()).unwrap());
        let mut w2 = w;
        let j = (seed as usize) % n;
        w2[j][(seed >> 8) as usize & 1] += bump;
        let bigger = factored_weighted_sum(&net, &FactorSumQuery::new(a, w2).unwrap());
        prop_assert!(bigger >= base * (1.0 - 1e-12));
    }

    #[test]
    fn evidence_chain_rule(seed in any::<u64>(), n in 2usize..=8) {
        let net = net_from(seed, n);
        let (a, b) = (0, n - 1);
        let (va, vb) = (seed & 1 == 1, seed & 2 == 2);
        let ea = Evidence::from_pairs([(a, va)]);
        let eab = Evidence::from_pairs([(a, va), (b, vb)]);
        let pb = posterior_marginal(&net, &ea, b).unwrap();
        let cond = if vb { pb } else { 1.0 - pb };
        let lhs = evidence_probability(&net, &eab);
        let rhs = evidence_probability(&net, &ea) * cond;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(1e-300).max(rhs));
    }

    #[test]
    fn posteriors_match_enumeration(seed in any::<u64>(), n in 2usize..=9) {
        let net = net_from(seed, n);
        let e = Evidence::from_pairs([((seed as usize) % n, seed & 1 == 1)]);
        let post = posterior_marginals(&net, &e).unwrap();
        for (j, &p) in post.iter().enumerate() {
            if !e.contains(j) {
                prop_assert!((p - common::posterior(&net, &e, j)).abs() < 1e-10);
            }
        }
        let m = marginals(&net);
        for (j, &p) in m.iter().enumerate() {
            prop_assert!((p - common::posterior(&net, &Evidence::new(), j)).abs() < 1e-10);
        }
    }

    #[test]
    fn joint_normalizes(seed in any::<u64>(), n in 1usize..=12) {
        let net = net_from(seed, n);
        let total: f64 = (0..1usize << n).map(|s| net.joint_of_state(s)).sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn joint_is_invariant_under_relabeling(seed in any::<u64>(), n in 2usize..=7) {
        let net = net_from(seed, n);
        // reverse the variable indices and rebuild the same CPTs on the new labels
        let relabel = |j: usize| n - 1 - j;
        let names: Vec<String> = (0..n).map(|j| net.name(relabel(j)).to_string()).collect();
        let cpts = net
            .cpts()
            .iter()
            .map(|c| Cpt {
                child: relabel(c.child),
                parents: c.parents.iter().map(|&p| relabel(p)).collect(),
                p_one: c.p_one.clone(),
            })
            .collect();
        let other = BayesNet::new(names, cpts).unwrap();
        for s in 0..1usize << n {
            let t = (0..n).fold(0, |acc, j| acc | (((s >> j) & 1) << relabel(j)));
            prop_assert!((net.joint_of_state(s) - other.joint_of_state(t)).abs() < 1e-15);
        }
    }
}

#[test]
fn powered_factors_are_not_renormalized() {
    let net = chest_clinic();
    for a in 2..=3u32 {
        let q = FactorSumQuery::ones(a, net.len());
        let expected: f64 = common::joint_table(&net).iter().map(|p| p.powi(a as i32)).sum();
        let got = factored_weighted_sum(&net, &q);
        assert!(rel_err(got, expected) < 1e-12);
        assert!(got < 1.0);
    }
}

#[test]
fn chest_clinic_all_zero_state_by_hand() {
    let net = chest_clinic();
    // asia, smoker, tub|asia=0, lung|smoker=0, bronc|smoker=0, either|0,0, xray|0, dysp|0,0
    let by_hand = 0.99 * 0.5 * 0.99 * 0.99 * 0.7 * 1.0 * 0.95 * 0.9;
    assert!((net.joint_of_state(0) - by_hand).abs() < 1e-15);
    assert!((common::joint(&net, 0) - by_hand).abs() < 1e-15);
}

#[test]
fn chest_clinic_order_respects_edges() {
    let net = chest_clinic();
    let order = net.topological_order();
    let pos = |name: &str| order.iter().position(|&j| j == net.index_of(name).unwrap()).unwrap();
    assert!(pos("either") < pos("xray"));
    assert!(pos("either") < pos("dysp"));
    for cpt in net.cpts() {
        for &p in &cpt.parents {
            assert!(order.iter().position(|&j| j == p) < order.iter().position(|&j| j == cpt.child));
        }
    }
}

#[test]
fn sample_marginals_converge() {
    let net = chest_clinic();
    let samples = net.sample_many(100_000, 42);
    let exact = marginals(&net);
    for (j, p) in exact.iter().enumerate() {
        let freq = samples.iter().filter(|x| x.get(j)).count() as f64 / samples.len() as f64;
        assert!((freq - p).abs() < 0.01, "{}: {freq} vs {p}", net.name(j));
    }
}

#[test]
fn rare_evidence_probability() {
    let net = chest_clinic();
    let e = Evidence::from_names(&net, [("asia", true), ("xray", true)]).unwrap();
    let p = evidence_probability(&net, &e);
    assert!((p - 0.0015).abs() < 1e-4);
    let mut enumerated = 0.0;
    for s in 0..256 {
        if e.matches_state(s) {
            enumerated += common::joint(&net, s);
        }
    }
    assert!(rel_err(p, enumerated) < 1e-12);
}
