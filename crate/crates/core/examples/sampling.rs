//! Three ways to draw copula samples: frailty mixtures, Laplace-transform
//! inversion and the tabulated-generator sampler.

use archgen::families::{Family, FamilyFit};
use archgen::numeric::{kendall_tau_pairs, mean};
use archgen::rng::stream;
use archgen::sampler::{rlaptrans, sample_family, sample_from_generator};
use num_complex::Complex64;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fit = FamilyFit::from_tau(Family::Gumbel, 0.5)?;
    let mo = sample_family(&fit, 20_000, &mut stream(7, 0))?;
    println!("Marshall-Olkin Gumbel: tau {:.4}", kendall_tau_pairs(&mo));

    let gen = fit.exact_generator_curve(2001, 0.5)?;
    let k = fit.kendall_curve(2001)?;
    let tab = sample_from_generator(&gen, &k, 20_000, &mut stream(7, 1))?;
    println!("tabulated generator:   tau {:.4}", kendall_tau_pairs(&tab));

    let theta = rlaptrans(|s: Complex64| (1.0 + s).powi(-2), 5_000, &mut stream(7, 2), 1e-8)?;
    println!("rlaptrans Gamma(2, 1): mean {:.3}", mean(&theta));
    Ok(())
}
