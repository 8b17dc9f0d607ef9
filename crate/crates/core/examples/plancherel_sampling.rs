//! Ewens fragmentation trees, and at theta = 2 Plancherel random trees.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use plancherel_trees::fragmentation::{
    grow_recursive_tree, sample_fragmentation, sample_height, sample_labelled_fragmentation,
};
use plancherel_trees::heights::{macroscopic_count, s_mass_profile};
use plancherel_trees::trees::plancherel_distribution;

fn main() -> plancherel_trees::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let t = sample_fragmentation(3000, 2.0, &mut rng)?;
    println!("n = 3000: height {}, root children {:?}", t.height(), t.child_masses(t.root()));
    println!("macroscopic root children (delta = 0.3): {}", macroscopic_count(&t, 0.3)?);
    let v: Vec<String> = s_mass_profile(&t, 2)?.values.iter().map(|x| format!("{x:.3e}")).collect();
    println!("V^(2) by level: {}", v.join(" "));

    println!("\nfrequencies at n = 5 against the Plancherel law:");
    let reps = 100_000;
    let mut counts = BTreeMap::new();
    for _ in 0..reps {
        *counts.entry(sample_fragmentation(5, 2.0, &mut rng)?.canonical()).or_insert(0u64) += 1;
    }
    for (tree, p) in plancherel_distribution(5)? {
        let f = counts.get(&tree).copied().unwrap_or(0) as f64 / reps as f64;
        println!("  {tree:<12} {f:.4}  {p:.4}");
    }

    let lt = sample_labelled_fragmentation(8, 2.0, &mut rng)?;
    println!("\nlabelled tree, standard = {}", lt.is_standard());
    println!("{}", lt.to_json());

    let growth = grow_recursive_tree(6, 2.0, &mut rng)?;
    for g in &growth {
        println!("  size {}: {}", g.tree.len(), g.tree.canonical());
    }

    let hs: Vec<u32> = (0..5).map(|_| sample_height(1_000_000, 2.0, &mut rng)).collect::<Result<_, _>>()?;
    println!("\nheights at n = 10^6 without building the tree: {hs:?}");
    Ok(())
}
