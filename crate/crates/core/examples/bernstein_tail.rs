//! Bernstein moment condition, the tail bound for normalized sums, and its
//! Orlicz-norm form.
//!
//! cargo run --example bernstein_tail

use bernstein_orlicz::bernstein::{bernstein_orlicz_norm, bernstein_tail, check_bernstein, BernsteinProfile};
use bernstein_orlicz::distribution::DistributionSpec;
use bernstein_orlicz::orlicz::tail_from_norm;

fn main() -> bernstein_orlicz::error::Result<()> {
    let dist = DistributionSpec::CenteredExponential { rate: 1.0 };
    let check = check_bernstein(std::slice::from_ref(&dist), 1.0, 1.0, 20)?;
    println!(
        "centered Exp(1) with sigma = 1, K = 1: holds = {}, worst m = {} (ratio {:.4})",
        check.holds, check.worst_m, check.worst_ratio
    );

    for n in [20, 200, 2000] {
        let profile = BernsteinProfile::new(1.0, 1.0, n)?;
        let norm = bernstein_orlicz_norm(&profile)?;
        println!("\nn = {n}: tau = {:.6}, L = {:.6}", norm.tau, norm.l);
        println!("  t    direct    via norm   cap");
        for t in [0.5, 1.0, 2.0, 4.0] {
            let d = bernstein_tail(&profile, t)?;
            let o = tail_from_norm(norm, t)?;
            println!("  {t:<4} {:<9.4} {:<10.4} {:.4}", d.threshold, o.threshold, d.prob_bound);
        }
    }
    Ok(())
}
