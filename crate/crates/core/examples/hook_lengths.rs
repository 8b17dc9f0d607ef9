//! Unlabelled trees, hook lengths and the Plancherel measure.

use plancherel_trees::trees::{
    enumerate_trees, fundamental_identity, hook_counts, leaf_removal_law, plancherel_distribution,
    plancherel_weight, CanonicalTree,
};

fn main() -> plancherel_trees::Result<()> {
    let t = CanonicalTree::parse("(()()((()()())))")?;
    let h = hook_counts(&t)?;
    println!("{t}: n = {}, d = {}, |Aut| = {}, u = {}", t.n(), h.d, h.aut, h.u);
    println!("Plancherel weight {}", plancherel_weight(&t)?);

    for n in 1..=9 {
        let (norm, sum) = fundamental_identity(n)?;
        println!("n = {n}: {} trees, sum d*u = {sum}, product = {norm}", enumerate_trees(n)?.len());
    }

    println!("\nPlancherel law on 5 vertices:");
    for (t, p) in plancherel_distribution(5)? {
        println!("  {t:<12} {p:.6}");
    }

    println!("\nremoving a random leaf from {t}:");
    for (s, p) in leaf_removal_law(&t)? {
        println!("  {s:<16} {p}");
    }
    Ok(())
}
