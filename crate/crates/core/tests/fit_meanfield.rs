mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bnmix::fit_meanfield::{
    collect_fixed_points, component_bkl, expected_log_odds, full_conditional_log_odds, meanfield_ensemble,
    mixture_of_meanfield, run_to_convergence, small_overlap_exponents, MeanFieldConfig, MeanFieldState,
};
use bnmix::fixtures::chest_clinic;
use bnmix::metrics::kl_divergence;
use bnmix::network::{BayesNet, Cpt};
use bnmix::parallel::Execution;
use bnmix::random::random_network;
use bnmix::Assignment;

fn net_from(seed: u64, n: usize) -> BayesNet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_network(&mut rng, n, 3, 0.05, 0.95)
}

/// `E_Q[log-odds of x_j given the rest]` over every state of the other variables.
fn enumerated_expectation(net: &BayesNet, j: usize, q: &[f64]) -> f64 {
    let n = net.len();
    (0..1usize << n)
        .filter(|s| (s >> j) & 1 == 0)
        .map(|s| {
            let w: f64 = (0..n)
                .filter(|&k| k != j)
                .map(|k| if (s >> k) & 1 == 1 { q[k] } else { 1.0 - q[k] })
                .product();
            w * common::conditional_log_odds(net, j, s)
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn log_odds_match_enumerated_conditional(seed in any::<u64>(), n in 1usize..=9) {
        let net = net_from(seed, n);
        let s = (seed as usize) & ((1 << n) - 1);
        let x = Assignment::from_state(s, n);
        for j in 0..n {
            let got = full_conditional_log_odds(&net, j, &x);
            prop_assert!((got - common::conditional_log_odds(&net, j, s)).abs() < 1e-9);
        }
    }

    #[test]
    fn blanket_expectation_matches_enumeration(seed in any::<u64>(), n in 1usize..=8) {
        let net = net_from(seed, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.99)).collect();
        for j in 0..n {
            prop_assert!((expected_log_odds(&net, j, &q) - enumerated_expectation(&net, j, &q)).abs() < 1e-10);
        }
    }

    #[test]
    fn exponent_is_negative_backward_kl(seed in any::<u64>(), n in 1usize..=8) {
        let net = net_from(seed, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let states: Vec<MeanFieldState> = (0..3).map(|_| MeanFieldState::random(&mut rng, n)).collect();
        for (st, e) in states.iter().zip(small_overlap_exponents(&net, &states)) {
            prop_assert!((e + common::component_bkl(&net, &st.q)).abs() < 1e-10);
            prop_assert!((component_bkl(&net, &st.q) - common::component_bkl(&net, &st.q)).abs() < 1e-10);
        }
    }

    #[test]
    fn fixed_points_solve_the_update_and_are_local_minima(seed in any::<u64>(), n in 1usize..=7) {
        let net = net_from(seed, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let cfg = MeanFieldConfig::new(1).max_sweeps(5000);
        let (state, _) = run_to_convergence(&net, MeanFieldState::random(&mut rng, n), &cfg);
        prop_assume!(state.converged(cfg.tol));
        for j in 0..n {
            let target = 1.0 / (1.0 + (-enumerated_expectation(&net, j, &state.q)).exp());
            prop_assert!((state.q[j] - target).abs() < 1e-8);
        }
        let base = common::component_bkl(&net, &state.q);
        for _ in 0..20 {
            let moved: Vec<f64> = state.q.iter().map(|&q| (q + rng.gen_range(-1e-3..1e-3)).clamp(1e-9, 1.0 - 1e-9)).collect();
            prop_assert!(common::component_bkl(&net, &moved) >= base - 1e-12);
        }
    }

    #[test]
    fn ensemble_weights_are_a_softmax(seed in any::<u64>(), n in 2usize..=7) {
        let net = net_from(seed, n);
        let ens = meanfield_ensemble(&net, &MeanFieldConfig::new(10).seed(seed));
        prop_assert!((ens.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (w, e) in ens.weights.iter().zip(&ens.exponents) {
            prop_assert!((w - e.exp() / ens.normalizer).abs() < 1e-12);
        }
    }
}

#[test]
fn chest_clinic_has_three_fixed_points() {
    let net = chest_clinic();
    let found = collect_fixed_points(&net, &MeanFieldConfig::new(100));
    assert_eq!(found.len(), 3);
    let more = collect_fixed_points(&net, &MeanFieldConfig::new(200).seed(1));
    assert!(more.len() <= 3);
    let bkl: Vec<f64> = found.iter().map(|s| component_bkl(&net, &s.q)).collect();
    assert!(bkl.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn chest_clinic_runs_converge() {
    let net = chest_clinic();
    let cfg = MeanFieldConfig::new(1).tol(1e-9).max_sweeps(500);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let converged = (0..100)
        .filter(|_| run_to_convergence(&net, MeanFieldState::random(&mut rng, net.len()), &cfg).0.converged(1e-9))
        .count();
    assert!(converged >= 99, "{converged} of 100");
}

#[test]
fn chest_clinic_log_odds_on_supported_states() {
    let net = chest_clinic();
    let tub = net.index_of("tub").unwrap();
    let mut checked = 0;
    for s in 0..256usize {
        let (on, off) = (common::joint(&net, s | (1 << tub)), common::joint(&net, s & !(1 << tub)));
        if on > 0.0 && off > 0.0 {
            let got = full_conditional_log_odds(&net, tub, &Assignment::from_state(s, 8));
            assert!((got - common::conditional_log_odds(&net, tub, s)).abs() < 1e-9);
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn uniform_independent_net_has_one_fixed_point() {
    let n = 5;
    let cpts = (0..n)
        .map(|j| Cpt {
            child: j,
            parents: vec![],
            p_one: vec![0.5],
        })
        .collect();
    let net = BayesNet::new((0..n).map(|j| format!("v{j}")).collect(), cpts).unwrap();
    let model = mixture_of_meanfield(&net, &MeanFieldConfig::new(20)).unwrap();
    assert_eq!(model.num_components(), 1);
    assert!(model.params()[0].iter().all(|q| (q - 0.5).abs() < 1e-12));
    assert!(kl_divergence(&net, &model).unwrap() < 1e-15);
}

#[test]
fn execution_mode_does_not_change_the_ensemble() {
    let net = chest_clinic();
    let a = mixture_of_meanfield(&net, &MeanFieldConfig::new(30).execution(Execution::Parallel)).unwrap();
    let b = mixture_of_meanfield(&net, &MeanFieldConfig::new(30).execution(Execution::Sequential)).unwrap();
    assert_eq!(a, b);
}
