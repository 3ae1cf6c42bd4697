use archgen::families::{Family, FamilyFit};
use archgen::io::{CovariateKind, Dataset};
use archgen::pipeline::{run_pipeline, BandwidthChoice, Mode, PipelineOptions};
use archgen::selector::{select_copula, SelectionConfig};
use archgen::synth::{synth_generate, CensoringLaw, SynthConfig};

fn independence(seed: u64) -> Dataset {
    let mut cfg = SynthConfig::simple(2000, Family::Frank, 0.0, CensoringLaw::TargetFraction { fraction: 0.2 }, seed);
    cfg.copula.tau = None;
    cfg.copula.alpha = Some(1e-6);
    synth_generate(&cfg).unwrap()
}

#[test]
fn independent_data_gives_small_tau_in_both_modes() {
    let ds = independence(31);
    let opts = PipelineOptions { grid_size: 501, ..PipelineOptions::default() };
    for mode in [Mode::Param, Mode::Nonparam] {
        let r = run_pipeline(&ds, mode, &[], &opts).unwrap();
        assert!(r.tau.abs() <= 0.05, "{mode}: {}", r.tau);
    }
}

#[test]
fn constant_covariate_is_dropped_without_changing_tau() {
    let cfg = SynthConfig::simple(400, Family::Gumbel, 0.4, CensoringLaw::TargetFraction { fraction: 0.25 }, 8);
    let plain = synth_generate(&cfg).unwrap();
    let mut with_const = plain.clone();
    for r in &mut with_const.records {
        r.z = vec![3.0];
    }
    with_const.covariate_names = vec!["c".into()];
    with_const.covariate_kinds = vec![CovariateKind::Continuous];
    let opts = PipelineOptions { grid_size: 401, ..PipelineOptions::default() };
    let a = run_pipeline(&plain, Mode::Param, &[], &opts).unwrap();
    let b = run_pipeline(&with_const, Mode::Param, &[], &opts).unwrap();
    assert!((a.tau - b.tau).abs() <= 1e-6, "{} vs {}", a.tau, b.tau);
    assert_eq!(b.diagnostics.dropped_covariates, vec!["c"]);
}

#[test]
fn nonparam_recovers_clayton_under_censoring() {
    let cfg = SynthConfig::simple(1000, Family::Clayton, 0.5, CensoringLaw::TargetFraction { fraction: 0.3 }, 12);
    let ds = synth_generate(&cfg).unwrap();
    let opts = PipelineOptions { bandwidth: BandwidthChoice::Fixed { h1: 0.4, h2: 0.3 }, ..PipelineOptions::default() };
    let r = run_pipeline(&ds, Mode::Nonparam, &[], &opts).unwrap();
    assert!((r.tau - 0.5).abs() < 0.07, "{}", r.tau);
    assert!(r.diagnostics.total_mass > 0.95);
}

#[test]
fn pinned_condition_needs_param_mode() {
    let cfg = SynthConfig::simple(100, Family::Clayton, 0.3, CensoringLaw::None, 1);
    let mut ds = synth_generate(&cfg).unwrap();
    for (i, r) in ds.records.iter_mut().enumerate() {
        r.z = vec![i as f64 / 10.0];
    }
    ds.covariate_names = vec!["x".into()];
    ds.covariate_kinds = vec![CovariateKind::Continuous];
    let pin = vec!["x=2.5".parse().unwrap()];
    let opts = PipelineOptions { grid_size: 201, ..PipelineOptions::default() };
    assert!(run_pipeline(&ds, Mode::Nonparam, &pin, &opts).is_err());
    assert!(run_pipeline(&ds, Mode::Param, &pin, &opts).is_ok());
}

#[test]
fn selection_identifies_its_own_family() {
    let fit = FamilyFit::from_alpha(Family::Clayton, 2.0).unwrap();
    let k = fit.kendall_curve(1001).unwrap();
    let gen = fit.exact_generator_curve(1001, 0.5).unwrap();
    let wins = (1..=20u64)
        .filter(|&seed| {
            let config = SelectionConfig { j: 200, n: 500, seed, ..SelectionConfig::default() };
            select_copula(&gen, &k, &config).unwrap().best() == Family::Clayton
        })
        .count();
    assert!(wins >= 16, "{wins}/20");
}

#[test]
fn pseudo_p_values_sum_to_one_without_ties() {
    let fit = FamilyFit::from_tau(Family::Frank, 0.3).unwrap();
    let k = fit.kendall_curve(501).unwrap();
    let gen = fit.exact_generator_curve(501, 0.5).unwrap();
    let config = SelectionConfig { j: 100, n: 300, grid_size: 501, seed: 4, ..SelectionConfig::default() };
    let r = select_copula(&gen, &k, &config).unwrap();
    let sum: f64 = r.pseudo_p.iter().sum();
    if r.diagnostics.ties == 0 && r.diagnostics.ineligible.iter().all(|&c| c == 0) {
        assert!((sum - 1.0).abs() < 1e-12);
    }
    assert!(r.pseudo_p.iter().all(|p| (0.0..=1.0).contains(p)));
}
