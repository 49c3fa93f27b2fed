mod common;

use bmrmm::datamodel::MixedRadix;
use bmrmm::dist::chain_rng;
use bmrmm::dur_sampler::{approx_shape_conditional, mixture_ln_density, ComponentStats, DurationSampler};
use bmrmm::hierarchy::{
    check_params, cluster_move_log_ratio, fixed_allocation_prob, log_partition_prior, Layout,
};
use bmrmm::simulate::{make_demo_corpus, DemoKind};
use bmrmm::trans_sampler::TransitionSampler;
use bmrmm::{DurationMode, ModelConfig};
use common::*;
use proptest::prelude::*;
use statrs::distribution::{Continuous, Gamma};

fn one_cov_layout(d_j: usize, d0: usize) -> Layout {
    Layout {
        combos: MixedRadix::new(vec![d_j]),
        n_contexts: 1,
        n_outcomes: d0,
        n_individuals: 1,
        fixed_effect: true,
        random_effect: true,
    }
}

#[test]
fn allocation_probability_by_hand() {
    assert!((fixed_allocation_prob(0.5, 0.2, 0.6).unwrap() - 0.25).abs() < 1e-15);
    assert_eq!(fixed_allocation_prob(1.0, 0.3, 0.9).unwrap(), 1.0);
    assert!(fixed_allocation_prob(0.5, 0.0, 0.0).is_err());
}

#[test]
fn merge_of_identical_rows_is_favoured() {
    let layout = one_cov_layout(2, 2);
    let counts = [5, 0, 5, 0];
    let lr = cluster_move_log_ratio(&layout, &counts, &[vec![0, 1]], 0, &[0, 0], 50.0, &[0.5, 0.5], 1.0);
    assert!(lr > 0.0);
    let oracle = pooled_marginal(&[vec![vec![5, 0]], vec![vec![5, 0]]], &[0, 0], 50.0, &[vec![0.5, 0.5]])
        * partition_prior_by_enumeration(&[0, 0], 1.0)
        / (pooled_marginal(&[vec![vec![5, 0]], vec![vec![5, 0]]], &[0, 1], 50.0, &[vec![0.5, 0.5]])
            * partition_prior_by_enumeration(&[0, 1], 1.0));
    assert!(rel_err(lr.exp(), oracle) < 1e-12);
}

#[test]
fn shape_approximation_without_data_is_the_prior() {
    assert_eq!(approx_shape_conditional(0, 0.0, 0.3, (2.5, 0.7)).unwrap(), (2.5, 0.7));
}

#[test]
fn approximation_mean_increases_with_log_sum() {
    let (n, log_beta, prior) = (20, 0.5f64, (1.0, 1.0));
    let mut last = (0.0, 0.0);
    for i in 0..8 {
        let s = -10.0 + 2.5 * i as f64;
        let (a, b) = approx_shape_conditional(n, s, log_beta, prior).unwrap();
        let (q, _) = positive_density_moments(&|x| shape_conditional_log(x, n, s, log_beta.exp(), prior));
        assert!(a / b > last.0 && q > last.1, "not monotone at sum_log={s}");
        last = (a / b, q);
    }
}

#[test]
fn rate_update_is_conjugate() {
    let (data, _) = make_demo_corpus(DemoKind::AsthmaLike, 1).unwrap();
    let cfg = ModelConfig {
        duration_mode: DurationMode::gamma(1),
        ..Default::default()
    };
    let s = DurationSampler::new(&data, &cfg).unwrap();
    let mut rng = chain_rng(9, 0);
    let mut state = s.init_state(&mut rng);
    state.shapes = vec![2.0];
    let stats = [ComponentStats {
        n: 2,
        sum: 4.0,
        sum_log: 3f64.ln(),
    }];
    // Ga(1 + 2·2, 1 + 4) = Ga(5, 5): mean 1, variance 0.2
    let draws = 20_000;
    let mut sum = 0.0;
    for _ in 0..draws {
        s.update_rates(&mut state, &stats, &mut rng);
        sum += state.rates[0];
    }
    let se = (0.2f64 / draws as f64).sqrt();
    assert!((sum / draws as f64 - 1.0).abs() < 3.0 * se);
}

#[test]
fn mixture_density_matches_direct_evaluation() {
    let mut scratch = vec![0.0; 3];
    assert!((mixture_ln_density(1.0, &[1.0], &[1.0], &[1.0], &mut scratch[..1]) + 1.0).abs() < 1e-15);
    let same = mixture_ln_density(2.3, &[0.5, 0.5], &[3.0, 3.0], &[2.0, 2.0], &mut scratch[..2]);
    let single = mixture_ln_density(2.3, &[1.0], &[3.0], &[2.0], &mut scratch[..1]);
    assert!((same - single).abs() < 1e-14);
    let (w, a, b) = ([0.2, 0.5, 0.3], [0.7, 3.0, 12.0], [1.5, 2.0, 0.4]);
    for tau in [0.01, 0.3, 1.0, 4.2, 30.0] {
        let direct: f64 = (0..3).map(|k| w[k] * Gamma::new(a[k], b[k]).unwrap().pdf(tau)).sum();
        let got = mixture_ln_density(tau, &w, &a, &b, &mut scratch);
        assert!(rel_err(got, direct.ln()) < 1e-12, "tau={tau}");
    }
}

#[test]
fn shape_update_without_data_always_accepts() {
    let (data, _) = make_demo_corpus(DemoKind::AsthmaLike, 1).unwrap();
    let cfg = ModelConfig {
        duration_mode: DurationMode::gamma(2),
        ..Default::default()
    };
    let mut s = DurationSampler::new(&data, &cfg).unwrap();
    let mut rng = chain_rng(4, 0);
    let mut state = s.init_state(&mut rng);
    let stats = [ComponentStats::default(); 2];
    for _ in 0..200 {
        s.update_shapes(&mut state, &stats, &mut rng).unwrap();
    }
    assert_eq!(s.shape_acceptance.accepted, s.shape_acceptance.proposed);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn partition_prior_matches_enumeration(alpha in 0.05f64..20.0, d in 1usize..=4) {
        let parts = set_partitions(d);
        let mut total = 0.0;
        for p in &parts {
            let lib = log_partition_prior(p, alpha).exp();
            let oracle = partition_prior_by_enumeration(p, alpha);
            prop_assert!(rel_err(lib, oracle) < 1e-10);
            total += lib;
        }
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn identity_move_has_zero_log_ratio(c in proptest::collection::vec(0u32..6, 6), alpha0 in 0.1f64..10.0) {
        let layout = one_cov_layout(3, 2);
        let labels = vec![0, 1, 0];
        let lr = cluster_move_log_ratio(&layout, &c, &[labels.clone()], 0, &labels, alpha0, &[0.3, 0.7], 1.0);
        prop_assert_eq!(lr, 0.0);
    }

    #[test]
    fn transition_sweeps_keep_invariants(seed in 0u64..1000, fixed in any::<bool>(), random in any::<bool>()) {
        prop_assume!(fixed || random);
        let (data, _) = make_demo_corpus(DemoKind::AsthmaLike, seed % 7).unwrap();
        let cfg = ModelConfig { fixed_effect: fixed, random_effect: random, seed, ..Default::default() };
        let mut s = TransitionSampler::new(&data, &cfg);
        let mut rng = chain_rng(seed, 0);
        let mut state = s.init_state(&mut rng);
        for t in 0..20 {
            s.sweep(&mut state, &mut rng, t < 10).unwrap();
            prop_assert!(check_params(s.layout(), &state.params).is_ok());
        }
    }

    #[test]
    fn duration_sweeps_keep_invariants(seed in 0u64..1000, k in 1usize..4) {
        let (data, _) = make_demo_corpus(DemoKind::AsthmaLike, seed % 5).unwrap();
        let cfg = ModelConfig { duration_mode: DurationMode::gamma(k), seed, ..Default::default() };
        let mut s = DurationSampler::new(&data, &cfg).unwrap();
        let mut rng = chain_rng(seed, 0);
        let mut state = s.init_state(&mut rng);
        for t in 0..20 {
            s.sweep(&mut state, &mut rng, t < 10).unwrap();
            prop_assert!(check_params(&s.hier.layout, &state.mixture.params).is_ok());
            prop_assert!(state.shapes.iter().chain(&state.rates).all(|&x| x > 0.0 && x.is_finite()));
        }
    }
}
