mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bnmix::exact::marginals;
use bnmix::fit_kl::{em_fit_exact, em_fit_sampled, em_fit_samples, responsibilities, EmConfig};
use bnmix::fixtures::chest_clinic;
use bnmix::metrics::kl_divergence;
use bnmix::parallel::Execution;
use bnmix::random::{random_mixture, random_network};
use bnmix::MixtureModel;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn em_trace_never_increases(seed in any::<u64>(), n in 2usize..=9, m in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&mut rng, n, 3, 0.05, 0.95);
        let out = em_fit_exact(&net, &EmConfig::new(m).seed(seed).max_iters(100)).unwrap();
        for pair in out.trace.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-12, "{} -> {}", pair[0], pair[1]);
        }
        let kl = common::kl(&common::joint_table(&net), &common::mixture_table(&out.model));
        prop_assert!((out.objective() - kl).abs() < 1e-9);
    }

    #[test]
    fn kl_is_nonnegative_and_matches_enumeration(seed in any::<u64>(), n in 1usize..=9, m in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&mut rng, n, 3, 0.02, 0.98);
        let model = random_mixture(&mut rng, net.names(), m, 0.02, 0.98);
        let kl = kl_divergence(&net, &model).unwrap();
        prop_assert!(kl >= 0.0);
        prop_assert!((kl - common::kl(&common::joint_table(&net), &common::mixture_table(&model))).abs() < 1e-12);
    }

    #[test]
    fn kl_ignores_component_order(seed in any::<u64>(), n in 1usize..=8, m in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&mut rng, n, 3, 0.02, 0.98);
        let model = random_mixture(&mut rng, net.names(), m, 0.02, 0.98);
        let mut order: Vec<usize> = (0..m).collect();
        order.rotate_left(1 + (seed as usize) % (m - 1));
        let permuted = MixtureModel::new(
            net.names(),
            order.iter().map(|&i| model.weights()[i]).collect(),
            order.iter().map(|&i| model.params()[i].clone()).collect(),
        )
        .unwrap();
        let (a, b) = (kl_divergence(&net, &model).unwrap(), kl_divergence(&net, &permuted).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn responsibilities_are_a_posterior(seed in any::<u64>(), n in 1usize..=7, m in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_mixture(&mut rng, (0..n).map(|j| format!("v{j}")).collect(), m, 0.05, 0.95);
        let r = responsibilities(&model, n).unwrap();
        let s = rng.gen_range(0..1usize << n);
        let total = common::mixture_at(model.weights(), model.params(), s);
        for i in 0..m {
            let expect = model.weights()[i] * common::component(&model.params()[i], s) / total;
            prop_assert!((r.get(i, s) - expect).abs() < 1e-12);
        }
        prop_assert!((r.row(s).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn single_component_recovers_marginals() {
    let net = chest_clinic();
    let exact = em_fit_exact(&net, &EmConfig::new(1)).unwrap();
    for (q, p) in exact.model.params()[0].iter().zip(marginals(&net)) {
        assert!((q - p.clamp(1e-6, 1.0 - 1e-6)).abs() < 1e-9);
    }
    let sampled = em_fit_sampled(&net, &EmConfig::new(1), 200_000).unwrap();
    for (q, p) in sampled.model.params()[0].iter().zip(marginals(&net)) {
        assert!((q - p).abs() < 0.01);
    }
}

#[test]
fn sampled_four_components_reach_low_kl() {
    let net = chest_clinic();
    let cfg = EmConfig::new(4).restarts(20);
    let out = em_fit_sampled(&net, &cfg, 200_000).unwrap();
    let kl = kl_divergence(&net, &out.model).unwrap();
    assert!(kl <= 0.01, "KL {kl}");
}

#[test]
fn exact_four_components_reach_low_kl() {
    let net = chest_clinic();
    let out = em_fit_exact(&net, &EmConfig::new(4).restarts(20)).unwrap();
    assert!(out.objective() <= 0.01, "KL {}", out.objective());
    assert_eq!(out.restart_objectives.len(), 20);
    assert_eq!(out.objective(), out.restart_objectives[out.best_restart]);
}

#[test]
fn duplicated_samples_match_weighted_data() {
    let net = chest_clinic();
    let samples = net.sample_many(2000, 5);
    let doubled: Vec<_> = samples.iter().chain(&samples).cloned().collect();
    let cfg = EmConfig::new(3).seed(2);
    let a = em_fit_samples(&samples, &net.names(), &cfg).unwrap();
    let b = em_fit_samples(&doubled, &net.names(), &cfg).unwrap();
    for (x, y) in a.trace.iter().zip(&b.trace) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn execution_mode_does_not_change_the_fit() {
    let net = chest_clinic();
    let cfg = EmConfig::new(3).restarts(6).seed(4);
    let a = em_fit_exact(&net, &cfg.clone().execution(Execution::Parallel)).unwrap();
    let b = em_fit_exact(&net, &cfg.execution(Execution::Sequential)).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.trace, b.trace);
}

#[test]
fn invalid_configs_are_rejected() {
    let net = chest_clinic();
    assert!(em_fit_exact(&net, &EmConfig::new(0)).is_err());
    assert!(em_fit_exact(&net, &EmConfig::new(2).restarts(0)).is_err());
    assert!(em_fit_exact(&net, &EmConfig::new(2).tol(0.0)).is_err());
    assert!(em_fit_sampled(&net, &EmConfig::new(2), 0).is_err());
    assert!(em_fit_samples(&[], &net.names(), &EmConfig::new(2)).is_err());
}
