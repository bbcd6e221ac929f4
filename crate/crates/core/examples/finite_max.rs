//! Expectation and deviation bounds for the maximum of p variables with a
//! common Psi_L norm.
//!
//! cargo run --example finite_max

use bernstein_orlicz::bernstein::BernsteinProfile;
use bernstein_orlicz::distribution::DistributionSpec;
use bernstein_orlicz::finite_max::{
    max_bernstein_expectation_bound, max_deviation_threshold, max_expectation_bound, MaxBoundInput,
};
use bernstein_orlicz::orlicz::{orlicz_norm_quadrature, OrliczParams};
use bernstein_orlicz::sim::{mean_stderr, simulate_finite_max};

fn main() -> bernstein_orlicz::error::Result<()> {
    let normal = DistributionSpec::StandardNormal;
    let tau = orlicz_norm_quadrature(&normal, 0.0)?;
    for p in [10, 100, 1000] {
        let input = MaxBoundInput::new(OrliczParams::new(0.0, tau)?, p)?;
        let (mean, se) = mean_stderr(&simulate_finite_max(1, 20_000, &normal, p)?);
        println!(
            "p = {p:>4}: E max |Z_j| ~ {mean:.4} (se {se:.4}) <= {:.4}; deviation threshold at t = 2: {:.4}",
            max_expectation_bound(&input)?,
            max_deviation_threshold(&input, 2.0)?.threshold
        );
    }

    let profile = BernsteinProfile::new(1.0, 1.0, 50)?;
    println!("\nBernstein sums (sigma = 1, K = 1, n = 50):");
    for p in [10, 1000, 100_000] {
        println!("  p = {p:>6}: {:.4}", max_bernstein_expectation_bound(&profile, p)?);
    }
    Ok(())
}
