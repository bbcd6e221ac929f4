//! Bracket ladders for half-line indicators, the entropy profile, and the
//! certified tree chain built from them.
//!
//! cargo run --example bracketing_entropy

use bernstein_orlicz::bracketing::{
    bracket_ladder, build_tree_chain, entropy_profile, entropy_sum_bound, GeneralizedMode,
};
use bernstein_orlicz::class::{EvalModel, FunctionClass};
use bernstein_orlicz::ep_bounds::{truncation_levels, EpBoundInput};

fn main() -> bernstein_orlicz::error::Result<()> {
    let (n, depth) = (100, 3);
    let class = FunctionClass::uniform_indicators(256);
    let model = EvalModel::new(&class, depth)?;
    let levels = bracket_ladder(&model, 1.0, 20, depth, GeneralizedMode::Partition)?;
    let profile = entropy_profile(&levels)?;
    println!("bracket counts {:?}", profile.ntilde);
    println!("H_s {:.3?}", profile.hprod);
    let sum = entropy_sum_bound(&profile, depth)?;
    println!("entropy sums: {:.4} <= {:.4}", sum.lhs, sum.rhs);

    let input = EpBoundInput::new(n, 1.0, profile.clone(), Some(depth))?;
    let k_levels = truncation_levels(&input, depth, 0.0)?;
    let build = build_tree_chain(&model, &levels, &profile, &k_levels, n)?;
    println!("K_s {k_levels:.4?}, delta = {:.4}", build.cert.delta);
    for s in 0..=depth {
        let worst = build
            .nodes
            .iter()
            .filter(|v| v.generation == s)
            .map(|v| v.certified_norm)
            .fold(0.0, f64::max);
        println!("s = {s}: largest label {worst:.4}, cap {:.4}", build.cert.tau * 0.5f64.powi(s as i32));
    }
    Ok(())
}
