//! Seeded Monte Carlo checks: tail frequencies with exact intervals and the
//! pathwise chain inequality, identical for any thread count.
//!
//! cargo run --release --example monte_carlo

use bernstein_orlicz::class::FunctionClass;
use bernstein_orlicz::distribution::DistributionSpec;
use bernstein_orlicz::experiments::{run_chain_check, run_verify, ChainCheckConfig, Experiment, VerifyConfig};
use bernstein_orlicz::sim::with_workers;

fn main() -> bernstein_orlicz::error::Result<()> {
    let verify = VerifyConfig {
        seed: 7,
        replicates: 100_000,
        t_grid: vec![0.5, 1.0, 2.0, 4.0],
        experiment: Experiment::Bernstein {
            dist: DistributionSpec::CenteredExponential { rate: 1.0 },
            sigma: 1.0,
            k: 1.0,
            n: 20,
        },
    };
    let report = run_verify(&verify)?;
    print!("{}", report.to_tsv());
    println!("refuted = {}, within screen = {}", report.refuted(), report.within_screen());

    let again = with_workers(1, || run_verify(&verify)).expect("pool")?;
    println!("single-thread rerun identical: {}", again == report);

    let chain = ChainCheckConfig {
        seed: 7,
        replicates: 200,
        n: 100,
        class: FunctionClass::uniform_indicators(256),
        depth: 3,
        k: 1.0,
        eps: 0.0,
        variant: Default::default(),
        delta_scale: 1.0,
    };
    let (_, r) = run_chain_check(&chain)?;
    println!(
        "\nchain check: {} violations in {} checks; delta = {:.4}, largest excess {:.4}",
        r.violations, r.checks, r.delta, r.max_excess
    );
    Ok(())
}
