use proptest::prelude::*;

use archgen::export::{read_curve_from, write_curve_to};
use archgen::families::{Family, FamilyFit};
use archgen::io::{read_csv, write_csv_to, Dataset, Schema};
use archgen::joint::{joint_cdf_nonparam, joint_cdf_param, MarginalModels, WeightPolicy};
use archgen::kendall::KendallCurve;
use archgen::numeric::kendall_tau_pairs;
use archgen::pipeline::fit_marginal_models;
use archgen::survival::CensoredRecord;
use archgen::synth::{synth_generate, CensoringLaw, SynthConfig};

fn records() -> impl Strategy<Value = Vec<CensoredRecord>> {
    prop::collection::vec((0.1f64..10.0, 0.1f64..10.0, any::<bool>(), any::<bool>()), 6..40).prop_map(|rows| {
        let mut rs: Vec<CensoredRecord> =
            rows.into_iter().map(|(a, b, d1, d2)| CensoredRecord::new(a, b, d1, d2, vec![])).collect();
        rs[0].delta1 = true;
        rs[0].delta2 = true;
        rs
    })
}

fn brute_tau_b(p: &[(f64, f64)]) -> f64 {
    let (mut s, mut t1, mut t2) = (0.0, 0.0, 0.0);
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            let a = (p[i].0 - p[j].0).signum() * ((p[i].0 != p[j].0) as u8 as f64);
            let b = (p[i].1 - p[j].1).signum() * ((p[i].1 != p[j].1) as u8 as f64);
            s += a * b;
            t1 += a * a;
            t2 += b * b;
        }
    }
    s / (t1 * t2).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nonparam_joint_is_monotone_and_within_frechet_bounds(
        sample in records(),
        pts in prop::collection::vec((0.0f64..11.0, 0.0f64..11.0), 10),
    ) {
        let cdf = joint_cdf_nonparam(&sample, 3.0, 3.0, &WeightPolicy::default()).unwrap();
        let total = cdf.total_mass;
        prop_assert!(cdf.masses.iter().all(|&m| m >= 0.0));
        prop_assert!(total <= 1.0 + 1e-12);
        for &(x, y) in &pts {
            let f = cdf.eval(x, y);
            prop_assert!(cdf.eval(x + 0.5, y) >= f - 1e-12);
            prop_assert!(cdf.eval(x, y + 0.5) >= f - 1e-12);
            let (f1, f2) = (cdf.eval(x, f64::INFINITY), cdf.eval(f64::INFINITY, y));
            prop_assert!(f <= f1.min(f2) + 1e-12);
            prop_assert!(f >= f1 + f2 - total - 1e-12);
        }
    }

    #[test]
    fn fast_kendall_tau_matches_pairwise_count(
        pairs in prop::collection::vec((0u8..12, 0u8..12), 3..60),
    ) {
        let p: Vec<(f64, f64)> = pairs.iter().map(|&(a, b)| (a as f64, b as f64)).collect();
        let brute = brute_tau_b(&p);
        let fast = kendall_tau_pairs(&p);
        if brute.is_finite() {
            prop_assert!((brute - fast).abs() < 1e-12, "{} vs {}", brute, fast);
        }
    }

    #[test]
    fn kendall_curve_cleanup_yields_a_distribution(raw in prop::collection::vec(-0.2f64..1.2, 20)) {
        let grid: Vec<f64> = (1..=20).map(|g| g as f64 / 20.0).collect();
        let c = KendallCurve::from_values(grid, raw).unwrap();
        prop_assert!(c.k_values.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(c.k_values.iter().all(|&k| (0.0..=1.0).contains(&k)));
        prop_assert_eq!(*c.k_values.last().unwrap(), 1.0);
    }

    #[test]
    fn curve_csv_round_trip_is_exact(ys in prop::collection::vec(-1e6f64..1e6, 1..50)) {
        let xs: Vec<f64> = (0..ys.len()).map(|i| (i as f64 + 0.1) / 7.0).collect();
        let mut buf = Vec::new();
        write_curve_to(&mut buf, ("nu", "v"), &xs, &ys).unwrap();
        let (bx, by) = read_curve_from(buf.as_slice()).unwrap();
        prop_assert_eq!(bx, xs);
        prop_assert_eq!(by, ys);
    }

    #[test]
    fn dataset_csv_round_trip(sample in records(), codes in prop::collection::vec(0u8..3, 40)) {
        let records: Vec<CensoredRecord> = sample
            .into_iter()
            .zip(&codes)
            .map(|(mut r, &c)| { r.z = vec![c as f64, r.y1 * 0.5]; r })
            .collect();
        let ds = Dataset {
            records,
            covariate_names: vec!["grp".into(), "x".into()],
            covariate_kinds: vec![
                archgen::io::CovariateKind::Categorical { levels: vec!["a".into(), "b".into(), "c".into()] },
                archgen::io::CovariateKind::Continuous,
            ],
            source: "memory".into(),
        };
        let mut buf = Vec::new();
        write_csv_to(&ds, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &archgen::io::schema_for(&ds)).unwrap();
        prop_assert_eq!(&back.covariate_names, &ds.covariate_names);
        let used: std::collections::BTreeSet<u8> = codes[..ds.len()].iter().copied().collect();
        let levels: Vec<String> = used.iter().map(|&c| ["a", "b", "c"][c as usize].to_string()).collect();
        prop_assert_eq!(&back.covariate_kinds[0], &archgen::io::CovariateKind::Categorical { levels: levels.clone() });
        for (a, b) in back.records.iter().zip(&ds.records) {
            prop_assert_eq!((a.y1, a.y2, a.delta1, a.delta2, a.z[1]), (b.y1, b.y2, b.delta1, b.delta2, b.z[1]));
            prop_assert_eq!(&levels[a.z[0] as usize], ["a", "b", "c"][b.z[0] as usize]);
        }
    }

    #[test]
    fn psi_inverts_phi(fi in 0usize..4, tau in 0.05f64..0.9, t in 0.001f64..0.999) {
        let fit = FamilyFit::from_tau(Family::ALL[fi], tau).unwrap();
        prop_assert!((fit.psi(fit.phi(t)) - t).abs() < 1e-10);
        prop_assert!(fit.kendall_k(t) >= t - 1e-12);
    }
}

fn models() -> (Vec<CensoredRecord>, MarginalModels) {
    let cfg = SynthConfig::simple(150, Family::Frank, 0.4, CensoringLaw::TargetFraction { fraction: 0.2 }, 77);
    let ds = synth_generate(&cfg).unwrap();
    let (m, _) = fit_marginal_models(&ds.records, &[]).unwrap();
    (ds.records, m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn unused_conditional_model_does_not_change_the_estimate(d in -0.5f64..0.5, e in -0.5f64..0.5) {
        let (sample, base) = models();
        let mut perturbed = base.clone();
        perturbed.model_2_given_1.scale_coeffs[0] += d;
        perturbed.model_2_given_1.shape_coeffs[0] += e;
        let w1 = WeightPolicy::constant(1.0).unwrap();
        let a = joint_cdf_param(&base, &sample, &w1).unwrap();
        let b = joint_cdf_param(&perturbed, &sample, &w1).unwrap();
        prop_assert_eq!(&a.masses, &b.masses);
        prop_assert_eq!(&a.support, &b.support);

        let mut perturbed = base.clone();
        perturbed.model_1_given_2.scale_coeffs[0] += d;
        let w0 = WeightPolicy::constant(0.0).unwrap();
        let a = joint_cdf_param(&base, &sample, &w0).unwrap();
        let b = joint_cdf_param(&perturbed, &sample, &w0).unwrap();
        prop_assert_eq!(&a.masses, &b.masses);
    }
}

#[test]
fn default_schema_reads_rds() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/rds.csv");
    let ds = archgen::io::load_csv(path, &Schema::default()).unwrap();
    assert_eq!(ds.len(), 197);
    assert_eq!(ds.covariate_names, vec!["age"]);
}
