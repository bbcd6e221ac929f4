//! Expectation and deviation bounds for the empirical process over a class
//! with a given entropy profile, next to Massart's inequality.
//!
//! cargo run --example ep_bounds

use bernstein_orlicz::bracketing::EntropyProfile;
use bernstein_orlicz::ep_bounds::{
    deviation_orlicz, deviation_threshold_with, expectation_bound, massart_threshold, DeviationForm,
    EpBoundInput,
};

fn main() -> bernstein_orlicz::error::Result<()> {
    for n in [400, 4096, 1 << 16] {
        let depth = (n as f64).log2().ceil() as usize;
        let profile = EntropyProfile::indicators(depth)?;
        let input = EpBoundInput::new(n, 1.0, profile, None)?;
        let scan = expectation_bound(&input)?;
        println!("n = {n}: min over S of E_S = {:.3} at S = {}", scan.best, scan.best_s);
        for form in [DeviationForm::Proof, DeviationForm::Statement] {
            let d = deviation_threshold_with(&input, 1.0, form)?;
            println!("  t = 1, {form:?} form: threshold {:.3}, cap {:.4}", d.threshold, d.prob_bound);
        }
        let o = deviation_orlicz(&input)?;
        println!("  excess norm <= {:.3} under Psi_{:.4}", o.orlicz_norm, o.orlicz_l);
        let m = massart_threshold(scan.best, 1.0, n, 1.0, 1.0)?;
        println!("  Massart at t = 1 with the same mean: {:.3}", m.threshold);
    }
    Ok(())
}
