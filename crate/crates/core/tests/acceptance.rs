//! Acceptance checks. Prints one PASS/FAIL line per criterion, with the
//! sub-checks that decide it indented below.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use archgen::families::{Family, FamilyFit};
use archgen::io::{load_csv, Dataset, Schema};
use archgen::kendall::{generator_from_kendall, kendall_tau};
use archgen::margins::{CensoredLikelihood, LinearPredictorSpec};
use archgen::numeric::{kendall_tau_pairs, ks_pvalue, ks_statistic};
use archgen::pipeline::{run_pipeline, Condition, Mode, PipelineOptions};
use archgen::rng::stream;
use archgen::sampler::{rlaptrans, sample_family, sample_from_generator};
use archgen::selector::{select_copula, SelectionConfig};
use archgen::synth::{
    synth_generate, CensoringLaw, CopulaByLevel, CopulaSpec, CovariateLaw, CovariateSpec, SynthConfig,
};
use num_complex::Complex64;

struct Criterion {
    subs: Vec<(bool, String)>,
    infos: Vec<String>,
}

impl Criterion {
    fn new() -> Self {
        Self { subs: Vec::new(), infos: Vec::new() }
    }

    fn check(&mut self, pass: bool, detail: impl Into<String>) -> bool {
        self.subs.push((pass, detail.into()));
        pass
    }

    fn info(&mut self, detail: impl Into<String>) {
        self.infos.push(detail.into());
    }

    fn finish(self, id: usize, title: &str, elapsed: Duration, budget: Duration) -> bool {
        let in_time = elapsed <= budget;
        let pass = in_time && self.subs.iter().all(|(p, _)| *p);
        println!(
            "criterion {id}: {} {title} ({:.1}s, budget {}s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        for (p, d) in &self.subs {
            println!("    [{}] {d}", if *p { "pass" } else { "FAIL" });
        }
        for d in &self.infos {
            println!("    [info] {d}");
        }
        if !in_time {
            println!("    [FAIL] runtime over budget");
        }
        pass
    }
}

fn rds() -> Dataset {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "data", "rds.csv"].iter().collect();
    load_csv(path, &Schema::default()).expect("RDS fixture")
}

fn cond(s: &str) -> Vec<Condition> {
    vec![s.parse().unwrap()]
}

fn rds_reproduction(c: &mut Criterion) {
    let ds = rds();
    c.check(ds.len() == 197, format!("fixture has {} records", ds.len()));
    let plain = PipelineOptions { use_covariates: false, ..PipelineOptions::default() };
    let with_cov = PipelineOptions::default();
    let cases: [(&str, Mode, &PipelineOptions, Vec<Condition>, f64, f64); 5] = [
        ("nonparam, no covariate", Mode::Nonparam, &plain, vec![], 0.186, 0.02),
        ("param, no covariate", Mode::Param, &plain, vec![], 0.186, 0.02),
        ("param, covariate in model", Mode::Param, &with_cov, vec![], 0.3001, 0.03),
        ("param, covariate, age<=20", Mode::Param, &with_cov, cond("age<=20"), 0.2630, 0.04),
        ("param, covariate, age>20", Mode::Param, &with_cov, cond("age>20"), 0.5592, 0.04),
    ];
    for (label, mode, opts, conds, target, tol) in cases {
        match run_pipeline(&ds, mode, &conds, opts) {
            Ok(r) => {
                c.check((r.tau - target).abs() <= tol, format!("{label}: tau {:.4}, target {target} ± {tol}", r.tau));
            }
            Err(e) => {
                c.check(false, format!("{label}: error {e}"));
            }
        }
    }
}

fn rds_selection(c: &mut Criterion) {
    let ds = rds();
    let opts = PipelineOptions::default();
    let all = run_pipeline(&ds, Mode::Param, &[], &opts).unwrap();
    let young = run_pipeline(&ds, Mode::Param, &cond("age<=20"), &opts).unwrap();
    let mut frank_best = 0;
    let mut clayton_best = 0;
    let mut joe_young = Vec::new();
    let mut table_all = Vec::new();
    for seed in 1..=10u64 {
        let config = SelectionConfig { j: 1000, n: 197, seed, ..SelectionConfig::default() };
        let a = select_copula(&all.generator, &all.kendall, &config).unwrap();
        let y = select_copula(&young.generator, &young.kendall, &config).unwrap();
        let best3 = |r: &archgen::SelectionReport| {
            [Family::Clayton, Family::Frank, Family::Gumbel]
                .into_iter()
                .max_by(|p, q| r.p_of(*p).unwrap().total_cmp(&r.p_of(*q).unwrap()))
                .unwrap()
        };
        frank_best += (best3(&a) == Family::Frank) as usize;
        clayton_best += (best3(&y) == Family::Clayton) as usize;
        joe_young.push(y.p_of(Family::Joe).unwrap());
        if seed == 1 {
            table_all = Family::ALL.iter().map(|f| format!("{f} {:.3}", 1.0 - a.p_of(*f).unwrap())).collect();
        }
    }
    c.info(format!("all data tau {:.4}, 1-p at seed 1: {}", all.tau, table_all.join(", ")));
    c.check(frank_best >= 7, format!("Frank has the largest p (of Clayton/Frank/Gumbel) on all data in {frank_best}/10 seeds, need 7"));
    c.check(
        clayton_best >= 7,
        format!("Clayton has the largest p on age<=20 (tau {:.4}) in {clayton_best}/10 seeds, need 7", young.tau),
    );
    let worst = joe_young.iter().cloned().fold(0.0, f64::max);
    c.check(worst <= 0.01, format!("Joe p on age<=20: max {worst:.3} over seeds, need 0 ± 0.01"));
}

fn generator_round_trip(c: &mut Criterion) {
    for family in Family::ALL {
        for tau in [0.2, 0.5, 0.8] {
            let fit = FamilyFit::from_tau(family, tau).unwrap();
            let k = fit.kendall_curve(1001).unwrap();
            let gen = generator_from_kendall(&k, 0.5, 1e-10).unwrap();
            let back = gen.kendall_values();
            let err = gen
                .nu_grid
                .iter()
                .zip(&back)
                .filter(|(v, _)| (0.05..=0.95).contains(*v))
                .map(|(v, kb)| (kb - fit.kendall_k(*v)).abs())
                .fold(0.0, f64::max);
            c.check(err < 0.01, format!("{family} tau {tau}: sup error {err:.2e}"));
        }
    }
}

fn tau_consistency(c: &mut Criterion) {
    let g = 1001;
    for family in Family::ALL {
        let alphas: Vec<f64> = match family {
            Family::Clayton => vec![0.1, 0.3, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0, 12.0],
            Family::Frank => vec![-8.0, -3.0, -0.5, 0.5, 1.0, 2.0, 4.0, 7.0, 10.0, 15.0],
            Family::Gumbel | Family::Joe => vec![1.1, 1.3, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 7.0, 10.0],
        };
        let worst = alphas
            .iter()
            .map(|&a| {
                let fit = FamilyFit::from_alpha(family, a).unwrap();
                (kendall_tau(&fit.kendall_curve(g).unwrap()) - fit.tau).abs()
            })
            .fold(0.0, f64::max);
        c.check(worst <= 2.0 / g as f64, format!("{family}: max |tau(K) - tau(alpha)| {worst:.2e} over 10 alphas, bound {:.2e}", 2.0 / g as f64));
    }
}

/// Tau-a and its standard error from the U-statistic projection.
fn tau_with_se(pairs: &[(f64, f64)]) -> (f64, f64) {
    let n = pairs.len();
    let h: Vec<f64> = pairs
        .par_iter()
        .map(|&(x, y)| {
            let s: f64 = pairs.iter().map(|&(a, b)| ((x - a) * (y - b)).signum()).sum();
            s / (n - 1) as f64
        })
        .collect();
    let tau = h.iter().sum::<f64>() / n as f64;
    let var = h.iter().map(|v| (v - tau).powi(2)).sum::<f64>() / (n - 1) as f64;
    (tau, 2.0 * (var / n as f64).sqrt())
}

fn ecdf_sup_gap(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let grid: Vec<f64> = (1..=20).map(|i| i as f64 / 21.0).collect();
    let f = |s: &[(f64, f64)], x: f64, y: f64| s.iter().filter(|p| p.0 <= x && p.1 <= y).count() as f64 / s.len() as f64;
    let mut gap: f64 = 0.0;
    for &x in &grid {
        for &y in &grid {
            gap = gap.max((f(a, x, y) - f(b, x, y)).abs());
        }
    }
    gap
}

fn sampler_correctness(c: &mut Criterion) {
    for (fi, family) in Family::ALL.into_iter().enumerate() {
        for (ti, tau) in [0.2, 0.5, 0.8].into_iter().enumerate() {
            let fit = FamilyFit::from_tau(family, tau).unwrap();
            let pairs = sample_family(&fit, 10_000, &mut stream(500, (fi * 3 + ti) as u64)).unwrap();
            let (est, se) = tau_with_se(&pairs);
            c.check(
                (est - tau).abs() <= 3.0 * se,
                format!("marshall_olkin {family} tau {tau}: empirical {est:.4}, 3 SE = {:.4}", 3.0 * se),
            );
        }
    }
    for (fi, family) in Family::ALL.into_iter().enumerate() {
        let fit = FamilyFit::from_tau(family, 0.5).unwrap();
        let k = fit.kendall_curve(2001).unwrap();
        let gen = fit.exact_generator_curve(2001, 0.5).unwrap();
        let a = sample_family(&fit, 100_000, &mut stream(501, fi as u64)).unwrap();
        let b = sample_from_generator(&gen, &k, 100_000, &mut stream(502, fi as u64)).unwrap();
        let (ta, tb) = (kendall_tau_pairs(&a), kendall_tau_pairs(&b));
        c.check((ta - tb).abs() <= 0.02, format!("{family} tau 0.5: marshall_olkin {ta:.4} vs sample_from_generator {tb:.4}"));
        let gap = ecdf_sup_gap(&a, &b);
        c.check(gap <= 0.01, format!("{family}: 20x20 bivariate ECDF sup gap {gap:.4}"));
    }

    let n = 10_000;
    let mut rng = stream(503, 0);
    let exp = rlaptrans(|s: Complex64| 1.0 / (1.0 + s), n, &mut rng, 1e-8).unwrap();
    let d = ks_statistic(&exp, |x| 1.0 - (-x).exp());
    c.check(ks_pvalue(d, n) > 0.01, format!("rlaptrans 1/(1+s) vs Exp(1): KS p {:.3}", ks_pvalue(d, n)));
    let gam = rlaptrans(|s: Complex64| (1.0 + s).powi(-2), n, &mut rng, 1e-8).unwrap();
    let d = ks_statistic(&gam, |x| 1.0 - (-x).exp() * (1.0 + x));
    c.check(ks_pvalue(d, n) > 0.01, format!("rlaptrans (1+s)^-2 vs Gamma(2,1): KS p {:.3}", ks_pvalue(d, n)));
    match rlaptrans(|s: Complex64| (-s).exp(), n, &mut rng, 1e-8) {
        Ok(pm) => {
            let d = ks_statistic(&pm, |x| if x >= 1.0 { 1.0 } else { 0.0 });
            let spread = pm.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
            c.check(
                ks_pvalue(d, n) > 0.01,
                format!("rlaptrans e^-s vs point mass at 1: KS p {:.3}, max |x - 1| {spread:.2e}", ks_pvalue(d, n)),
            );
        }
        Err(e) => {
            c.check(false, format!("rlaptrans e^-s: error {e}"));
        }
    }
}

fn recovery_config(seed: u64) -> SynthConfig {
    SynthConfig::simple(2000, Family::Clayton, 0.5, CensoringLaw::TargetFraction { fraction: 0.3 }, seed)
}

fn censored_recovery(c: &mut Criterion) {
    let opts = PipelineOptions { use_covariates: false, ..PipelineOptions::default() };
    let results: Vec<(f64, f64, Family)> = (1..=20u64)
        .map(|seed| {
            let ds = synth_generate(&recovery_config(seed)).unwrap();
            let np = run_pipeline(&ds, Mode::Nonparam, &[], &opts).unwrap();
            let p = run_pipeline(&ds, Mode::Param, &[], &opts).unwrap();
            let config = SelectionConfig { j: 200, n: 500, seed, ..SelectionConfig::default() };
            let best = select_copula(&np.generator, &np.kendall, &config).unwrap().best();
            (np.tau, p.tau, best)
        })
        .collect();
    let fmt = |v: Vec<String>| v.join(" ");
    let close = results.iter().filter(|r| (r.0 - 0.5).abs() <= 0.07).count();
    c.check(
        close >= 18,
        format!("nonparam tau within 0.07 of 0.5 in {close}/20 seeds, need 18 [{}]", fmt(results.iter().map(|r| format!("{:.3}", r.0)).collect())),
    );
    let clayton = results.iter().filter(|r| r.2 == Family::Clayton).count();
    c.check(
        clayton >= 16,
        format!("Clayton selected in {clayton}/20 seeds, need 16 [{}]", fmt(results.iter().map(|r| r.2.to_string()).collect())),
    );
    let param_close = results.iter().filter(|r| (r.1 - 0.5).abs() <= 0.07).count();
    c.info(format!(
        "param tau within 0.07 in {param_close}/20 seeds [{}]",
        fmt(results.iter().map(|r| format!("{:.3}", r.1)).collect())
    ));
}

fn covariate_config(seed: u64) -> SynthConfig {
    let mut cfg = SynthConfig::simple(1000, Family::Clayton, 0.5, CensoringLaw::TargetFraction { fraction: 0.2 }, seed);
    cfg.covariates.push(CovariateSpec {
        name: "group".into(),
        law: CovariateLaw::Categorical { levels: vec!["a".into(), "b".into()], probs: vec![0.5, 0.5] },
    });
    for m in &mut cfg.margins {
        m.scale_coeffs.push(0.2);
        m.shape_coeffs.push(0.0);
    }
    let clayton = |alpha| CopulaSpec { family: Family::Clayton, alpha: Some(alpha), tau: None };
    cfg.copula_by_level = Some(CopulaByLevel { covariate: "group".into(), copulas: vec![clayton(0.5), clayton(4.0)] });
    cfg
}

fn covariate_detection(c: &mut Criterion) {
    let opts = PipelineOptions::default();
    let taus = |ds: &Dataset, mode: Mode| -> (f64, f64, f64) {
        let t = |conds: &[Condition]| run_pipeline(ds, mode, conds, &opts).unwrap().tau;
        (t(&[]), t(&cond("group=a")), t(&cond("group=b")))
    };
    let detects = |(all, a, b): (f64, f64, f64)| (a - b).abs() >= 0.25 && a.min(b) <= all && all <= a.max(b);
    let mut hits = [0usize; 2];
    let mut shown = Vec::new();
    for seed in 1..=20u64 {
        let ds = synth_generate(&covariate_config(seed)).unwrap();
        let np = taus(&ds, Mode::Nonparam);
        let p = taus(&ds, Mode::Param);
        hits[0] += detects(np) as usize;
        hits[1] += detects(p) as usize;
        if seed <= 3 {
            shown.push(format!(
                "seed {seed}: nonparam a {:.3} b {:.3} all {:.3}; param a {:.3} b {:.3} all {:.3}",
                np.1, np.2, np.0, p.1, p.2, p.0
            ));
        }
    }
    c.check(hits[0] > 10, format!("nonparam strata differ by >= 0.25 and bracket the pooled tau in {}/20 seeds, need 11", hits[0]));
    c.info(format!("param conditioning detects the effect in {}/20 seeds", hits[1]));
    for s in shown {
        c.info(s);
    }
}

fn gradient_check(c: &mut Criterion) {
    let mut worst: f64 = 0.0;
    for d in 0..5u64 {
        let mut rng = stream(800, d);
        let n = 300;
        let z: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>(), (rng.random::<f64>() < 0.5) as u8 as f64]).collect();
        let partner: Vec<f64> = (0..n).map(|_| 0.5 + 2.0 * rng.random::<f64>()).collect();
        let (y, delta): (Vec<f64>, Vec<bool>) = (0..n)
            .map(|i| {
                let scale = (0.5 + 0.4 * z[i][0] - 0.3 * z[i][1]).exp();
                let shape = (0.2 + 0.1 * z[i][1]).exp();
                let t = scale * (-(rng.random::<f64>()).ln()).powf(1.0 / shape);
                let cens = -(rng.random::<f64>()).ln() * 3.0;
                (t.min(cens), t <= cens)
            })
            .unzip();
        let spec = LinearPredictorSpec::with_covariates(vec![0, 1], d % 2 == 1);
        let lik = CensoredLikelihood::new(&y, &delta, &z, Some(&partner), &spec, &spec).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..lik.dim()).map(|_| rng.random::<f64>() - 0.5).collect();
            let (_, g) = lik.value_and_gradient(&x);
            let fd: Vec<f64> = (0..x.len())
                .map(|k| {
                    let h = 1e-6 * x[k].abs().max(1.0);
                    let (mut up, mut dn) = (x.clone(), x.clone());
                    up[k] += h;
                    dn[k] -= h;
                    (lik.value(&up) - lik.value(&dn)) / (2.0 * h)
                })
                .collect();
            let diff = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
            worst = worst.max(diff / norm);
        }
    }
    c.check(worst < 1e-4, format!("max relative gradient error {worst:.2e} over 5 datasets x 20 points"));
}

fn main() {
    let criteria: [(usize, &str, fn(&mut Criterion), u64); 8] = [
        (1, "RDS reproduction", rds_reproduction, 120),
        (2, "RDS selection", rds_selection, 600),
        (3, "generator round trip", generator_round_trip, 10),
        (4, "tau consistency", tau_consistency, 5),
        (5, "sampler correctness", sampler_correctness, 120),
        (6, "censored recovery", censored_recovery, 300),
        (7, "covariate effect detection", covariate_detection, 300),
        (8, "likelihood gradient", gradient_check, 10),
    ];
    let mut passed = 0;
    for (id, title, run, budget) in criteria {
        let mut c = Criterion::new();
        let start = Instant::now();
        run(&mut c);
        passed += c.finish(id, title, start.elapsed(), Duration::from_secs(budget)) as usize;
    }
    println!("acceptance: {passed}/8 criteria passed");
}
