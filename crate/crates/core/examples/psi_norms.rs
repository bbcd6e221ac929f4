//! Psi_L evaluation, its inverse, and Orlicz norms of a law and of a sample.
//!
//! cargo run --example psi_norms

use bernstein_orlicz::distribution::DistributionSpec;
use bernstein_orlicz::orlicz::{orlicz_norm_empirical, orlicz_norm_quadrature, psi_eval, psi_inverse};
use bernstein_orlicz::sim::simulate_draws;

fn main() -> bernstein_orlicz::error::Result<()> {
    for l in [0.0, 0.5, 1.0, 4.0] {
        let v = psi_eval(l, 2.0)?.value;
        println!("Psi_{l}(2) = {v:.6}, inverse gives back {:.12}", psi_inverse(l, v)?);
    }

    let normal = DistributionSpec::StandardNormal;
    println!("\nstandard normal, quadrature norm by L:");
    for l in [0.0, 0.1, 1.0, 10.0] {
        println!("  L = {l:>4}: {:.9}", orlicz_norm_quadrature(&normal, l)?);
    }
    println!("  sqrt(8/3) = {:.9}", (8.0f64 / 3.0).sqrt());

    let sample = simulate_draws(42, 100_000, &normal)?;
    println!("\nempirical norm of 10^5 draws at L = 0: {:.5}", orlicz_norm_empirical(&sample, 0.0)?);

    let expo = DistributionSpec::CenteredExponential { rate: 1.0 };
    // no sub-Gaussian norm exists; Psi_L with L > 0 tolerates exponential tails
    match orlicz_norm_quadrature(&expo, 0.0) {
        Ok(n) => println!("centered exponential at L = 0: {n:.6}"),
        Err(e) => println!("centered exponential at L = 0: {e}"),
    }
    println!("centered exponential at L = 1: {:.6}", orlicz_norm_quadrature(&expo, 1.0)?);
    Ok(())
}
