//! Censored Weibull regressions with the onset age as covariate.

use archgen::io::{load_csv, Schema};
use archgen::margins::{fit_censored_weibull, LinearPredictorSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = load_csv(concat!(env!("CARGO_MANIFEST_DIR"), "/data/rds.csv"), &Schema::default())?;
    let z: Vec<Vec<f64>> = ds.records.iter().map(|r| r.z.clone()).collect();
    let spec = LinearPredictorSpec::with_covariates(vec![0], false);
    for (name, y, d) in [
        ("treated", ds.records.iter().map(|r| r.y1).collect::<Vec<_>>(), ds.records.iter().map(|r| r.delta1).collect::<Vec<_>>()),
        ("untreated", ds.records.iter().map(|r| r.y2).collect(), ds.records.iter().map(|r| r.delta2).collect()),
    ] {
        let fit = fit_censored_weibull(&y, &d, &z, None, &spec, &spec)?;
        println!("{name:>9}: scale {:?}, shape {:?}, -loglik {:.2}", fit.scale_coeffs, fit.shape_coeffs, fit.neg_loglik);
        for age in [10.0, 30.0] {
            let (s, k) = fit.predict_params(&[age], None)?;
            println!("           age {age}: scale {s:.2}, shape {k:.3}, F(20) = {:.3}", fit.conditional_cdf(20.0, &[age], None)?);
        }
    }
    Ok(())
}
