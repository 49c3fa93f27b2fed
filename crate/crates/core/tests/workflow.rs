mod common;

use bmrmm::diagnostics::{acf, default_max_lag, trace, write_diagnostic, Selector};
use bmrmm::engine::potential_scale_reduction;
use bmrmm::model_selection::{lpml, selection_scores, waic, ScoreAccumulator};
use bmrmm::persist::{fmt_real, read_fit, read_meta, write_fit, FORMAT_VERSION};
use bmrmm::simulate::{make_demo_corpus, write_corpus, DemoKind};
use bmrmm::summaries::local_test;
use bmrmm::{fit, run_chains, summarize, DurationMode, Error, ModelConfig, SummaryOptions};
use common::*;
use proptest::prelude::*;

fn small_fit(mode: DurationMode) -> bmrmm::PosteriorSamples {
    let (data, _) = make_demo_corpus(DemoKind::AsthmaLike, 2).unwrap();
    let cfg = ModelConfig {
        duration_mode: mode,
        simsize: 120,
        thin: 2,
        seed: 5,
        ..Default::default()
    };
    fit(&data, &cfg).unwrap()
}

#[test]
fn kept_iterations_follow_burnin_and_thin() {
    let s = small_fit(DurationMode::gamma(2));
    assert_eq!(s.kept(), 30);
    assert_eq!(s.trans_draws.len(), 30);
    assert_eq!(s.dur_draws.len(), 30);
    assert_eq!(s.invariant_violations(), 0);
    assert!(s.acceptance.contains_key("dur.shapes"));
}

#[test]
fn ignoring_durations_has_no_duration_model() {
    let s = small_fit(DurationMode::Ignore);
    assert!(s.dur_draws.is_empty());
    assert!(matches!(selection_scores(&s), Err(Error::DurationModelRequired(_))));
}

#[test]
fn discretized_durations_add_a_state() {
    let s = small_fit(DurationMode::Discretize { unit: 0.5 });
    assert_eq!(s.trans_layout().n_outcomes, 4);
}

#[test]
fn chains_differ_but_are_reproducible() {
    let (data, _) = make_demo_corpus(DemoKind::AsthmaLike, 2).unwrap();
    let cfg = ModelConfig {
        simsize: 60,
        seed: 3,
        ..Default::default()
    };
    let a = run_chains(&data, &cfg, 2).unwrap();
    let b = run_chains(&data, &cfg, 2).unwrap();
    assert_eq!(a[0].trans_draws, b[0].trans_draws);
    assert_ne!(a[0].trans_draws, a[1].trans_draws);
    assert_eq!(a[0].trans_draws, fit(&data, &cfg).unwrap().trans_draws);
    assert!(run_chains(&data, &cfg, 0).is_err());
}

#[test]
fn scale_reduction_of_identical_chains_is_near_one() {
    let c: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64).collect();
    let r = potential_scale_reduction(&[c.clone(), c]).unwrap();
    assert!((r - 1.0).abs() < 0.01);
}

#[test]
fn fit_directory_round_trip() {
    let s = small_fit(DurationMode::gamma(2));
    let dir = tempfile::tempdir().unwrap();
    write_fit(&s, dir.path()).unwrap();
    assert_eq!(read_meta(dir.path()).unwrap().format_version, FORMAT_VERSION);
    let back = read_fit(dir.path()).unwrap();
    assert_eq!(back.trans_draws, s.trans_draws);
    assert_eq!(back.dur_draws, s.dur_draws);
    assert_eq!(back.data.records, s.data.records);
    assert_eq!(back.config, s.config);
}

#[test]
fn summary_contents() {
    let s = small_fit(DurationMode::gamma(2));
    let sum = summarize(&s, &SummaryOptions::default()).unwrap();
    assert_eq!(sum.kept_iterations, 30);
    for g in sum.trans_global.iter().chain(sum.dur_global.as_ref().unwrap()) {
        assert!((g.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    for m in &sum.trans_probs_mean {
        for row in &m.matrix {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
    assert_eq!(sum.dur_mix_params.as_ref().unwrap().len(), 2);
    let scores = sum.model_selection.unwrap();
    let ll = s.loglik().unwrap();
    assert!(rel_err(scores.lpml, lpml_direct(&ll)) < 1e-10);
    assert!(rel_err(scores.waic, waic_direct(&ll)) < 1e-10);
    let dir = tempfile::tempdir().unwrap();
    sum.write(dir.path()).unwrap();
    assert!(dir.path().join("summary.json").is_file());
    assert!(dir.path().join("trans_local.csv").is_file());
    assert!(!sum.report().is_empty());
}

#[test]
fn local_test_rejects_nonpositive_delta() {
    let s = small_fit(DurationMode::Ignore);
    assert!(matches!(local_test(&s, 0, 0.0), Err(Error::Config(_))));
    assert!(summarize(
        &s,
        &SummaryOptions {
            delta: -1.0,
            ..Default::default()
        }
    )
    .is_err());
}

#[test]
fn diagnostics_tables() {
    let s = small_fit(DurationMode::gamma(2));
    let sel = Selector::Transition {
        levels: vec![0, 1, 0],
        prev: 0,
        cur: 1,
        individual: None,
    };
    assert_eq!(trace(&s, &sel).unwrap().len(), 30);
    assert_eq!(trace(&s, &Selector::KernelRate(1)).unwrap().len(), 30);
    assert!(matches!(trace(&s, &Selector::KernelShape(7)), Err(Error::Selector(_))));
    let dir = tempfile::tempdir().unwrap();
    write_diagnostic(dir.path(), &s, &Selector::KernelShape(0), None).unwrap();
    assert!(dir.path().join("acf_shape_comp1.csv").is_file());
    assert!(dir.path().join("trace_shape_comp1.csv").is_file());
}

#[test]
fn acf_edge_cases() {
    assert!(acf(&[2.0; 10], None).is_err());
    assert_eq!(default_max_lag(10), 9);
    assert_eq!(default_max_lag(1000), 50);
    // alternating series: lag-1 autocorrelation (n−1)/n with the biased estimator
    let alt: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let r = acf(&alt, Some(1)).unwrap();
    assert!((r[1] + 0.9).abs() < 1e-15);
}

#[test]
fn simulate_writes_truth() {
    let dir = tempfile::tempdir().unwrap();
    let (data, spec) = make_demo_corpus(DemoKind::Foxp2Like, 1).unwrap();
    assert_eq!(data.num_sequences, 50);
    assert!((4000..6000).contains(&data.len()));
    write_corpus(dir.path(), "demo", &data, &spec).unwrap();
    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("demo.truth.json")).unwrap()).unwrap();
    assert!(truth.is_object());
    assert!("asthma-like".parse::<DemoKind>().is_ok());
    assert!("other".parse::<DemoKind>().is_err());
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(-30.0f64..5.0, cols), rows)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scores_are_permutation_invariant(ll in matrix(6, 8), rot in 1usize..6) {
        let mut draws = ll.clone();
        draws.rotate_left(rot);
        let records: Vec<Vec<f64>> = ll.iter().map(|r| { let mut r = r.clone(); r.reverse(); r }).collect();
        let (l, w) = (lpml(&ll).unwrap(), waic(&ll).unwrap());
        for other in [&draws, &records] {
            prop_assert!(rel_err(lpml(other).unwrap(), l) < 1e-12);
            prop_assert!(rel_err(waic(other).unwrap(), w) < 1e-12);
        }
        let mut acc = ScoreAccumulator::new(8);
        for r in &ll { acc.push(r).unwrap(); }
        let s = acc.finish().unwrap();
        prop_assert!(rel_err(s.lpml, l) < 1e-10 && rel_err(s.waic, w) < 1e-10);
        prop_assert!(s.lpml <= s.lppd + 1e-9);
    }

    #[test]
    fn acf_bounded_and_affine_invariant(xs in proptest::collection::vec(-100.0f64..100.0, 3..60), a in 0.1f64..10.0, b in -50.0f64..50.0) {
        let sd = { let m = xs.iter().sum::<f64>() / xs.len() as f64; xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() };
        prop_assume!(sd > 1e-6);
        let r = acf(&xs, None).unwrap();
        prop_assert_eq!(r[0], 1.0);
        prop_assert!(r.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let q = acf(&ys, None).unwrap();
        for (u, v) in r.iter().zip(&q) {
            prop_assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn kept_count_formula(simsize in 2usize..500, burn_frac in 0.0f64..0.99, thin in 1usize..10) {
        let burnin = ((simsize as f64 * burn_frac) as usize).min(simsize - 1);
        let cfg = ModelConfig { simsize, burnin: Some(burnin), thin, ..Default::default() };
        let counted = (1..=simsize).filter(|&t| cfg.is_kept(t)).count();
        prop_assert_eq!(counted, (simsize - burnin) / thin);
        prop_assert_eq!(cfg.kept_iterations(), counted);
    }

    #[test]
    fn reals_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
        prop_assert_eq!(fmt_real(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}
