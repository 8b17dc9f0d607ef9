//! Spine decomposition: tilted one-step law, spine paths and the many-to-one check.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use plancherel_trees::fragmentation::{many_to_one_check, many_to_one_check_with, sample_spine, spine_step_pmf};

fn main() -> plancherel_trees::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (theta, t) = (2.0, 2.0);

    let k = 10_000;
    let pmf = spine_step_pmf(k, t, theta)?;
    let mean: f64 = pmf.iter().enumerate().map(|(i, p)| p * (i + 1) as f64 / (k - 1) as f64).sum();
    println!("mean spine ratio at k = {k}: {mean:.5} (Beta(t, theta) mean {:.5})", t / (t + theta));

    let (path, off) = sample_spine(1_000_000, theta, t, 8, &mut rng)?;
    println!("spine masses {:?}", path.masses);
    println!("partial sums {:.3?}", path.partial_sums);
    println!("siblings at first step: {} blocks", off.siblings[0].len());

    let m = many_to_one_check(50, theta, t, 4, 20_000, &mut rng)?;
    println!("E[Z_4(2)] = {:.4} +- {:.4}", m.lhs, m.lhs_se);
    let m = many_to_one_check_with(50, theta, t, 3, 20_000, &mut rng, &|p| p[3] as f64)?;
    println!("mass at generation 3: tree side {:.3} +- {:.3}, spine side {:.3} +- {:.3}", m.lhs, m.lhs_se, m.rhs, m.rhs_se);
    Ok(())
}
