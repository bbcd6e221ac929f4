//! Chaining along a finite tree: validation, the expectation bound, the
//! uniform-label deviation bound and branch-wise generic constants.
//!
//! cargo run --example tree_chaining

use bernstein_orlicz::tree::{
    gamma_bound, generic_constants, generic_deviation_threshold, uniform_tree_deviation, validate_tree,
    ChainCertificate, FiniteTree, LabeledTree, TreeDocument,
};

fn main() -> bernstein_orlicz::error::Result<()> {
    let tree = FiniteTree::layered(&[1, 2, 4, 8])?;
    println!("sizes {:?}, valid = {}", tree.sizes(), validate_tree(&tree).valid);

    let tau = 1.0;
    let labeled = LabeledTree::uniform(tree, tau, vec![0.5; 4])?;
    let cert = ChainCertificate::new(labeled.clone(), tau, 0.1)?;
    let g = gamma_bound(&cert)?;
    println!("gamma = {:.4}, E sup <= {:.4}", g.gamma, g.expectation_bound);

    let generic = generic_constants(&labeled)?;
    for t in [1.0, 4.0] {
        println!(
            "t = {t}: uniform {:.4}, generic {:.4}",
            uniform_tree_deviation(&cert, t)?.bound.threshold,
            generic_deviation_threshold(&generic, cert.delta, t)?.threshold
        );
    }

    // a parent two generations up is reported with the offending node
    let bad: TreeDocument = serde_json::from_str(
        r#"{"S": 2, "generations": [[1], [2, 3], [4]], "parent": {"2": 1, "3": 1, "4": 1}}"#,
    )
    .expect("document");
    for v in validate_tree(&bad.tree()).violations {
        println!("violation: {v}");
    }
    Ok(())
}
