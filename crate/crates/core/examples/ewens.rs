//! Ewens partitions: exact law, Chinese restaurant sampling and GEM weights.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use plancherel_trees::ewens::{
    ewens_pmf, ewens_pmf_exact, mixed_factorial_moment, partitions, sample_ewens_crp, sample_gem, total_variation,
    CountVector,
};

fn main() -> plancherel_trees::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (m, theta) = (6, 1.5);

    let parts = partitions(m);
    println!("{} partitions of {m}", parts.len());
    let cv = CountVector::from_block_sizes(&[3, 2, 1])?;
    println!("P({:?}) = {:.6}", cv.block_sizes().as_slice(), ewens_pmf(&cv, theta)?);
    println!("exact at theta = 3/2: {}", ewens_pmf_exact(&cv, 3, 2)?);

    let index: HashMap<Vec<u64>, usize> = parts.iter().enumerate().map(|(i, p)| (p.to_dense(), i)).collect();
    let mut counts = vec![0u64; parts.len()];
    for _ in 0..200_000 {
        counts[index[&sample_ewens_crp(m, theta, &mut rng)?.to_dense()]] += 1;
    }
    let probs: Vec<f64> = parts.iter().map(|p| ewens_pmf(p, theta)).collect::<Result<_, _>>()?;
    println!("TV(CRP sample, exact) = {:.4}", total_variation(&counts, &probs));

    // E[C_1 (C_2)_2] from the exact formula
    println!("E[C_1 (C_2)_2] = {:.6}", mixed_factorial_moment(m, theta, &[(1, 1), (2, 2)])?);

    let big = sample_ewens_crp(1_000_000, theta, &mut rng)?;
    let sizes = big.block_sizes();
    println!(
        "m = 10^6: {} blocks, largest fractions {:?}",
        sizes.len(),
        sizes.as_slice().iter().take(4).map(|&a| a as f64 / 1e6).collect::<Vec<_>>()
    );

    let gem = sample_gem(theta, 8, &mut rng)?;
    println!("GEM weights {:.4?}, residual {:.2e}", gem.weights, gem.residual());
    Ok(())
}
