//! Exact height distribution q_n(h) = P(H_n <= h) and the threshold diagnostic.

use plancherel_trees::heights::{
    exact_height_cdf, exact_height_cdf_adaptive, exact_height_cdf_rational, key_identity_residual,
    threshold_diagnostic,
};

fn main() -> plancherel_trees::Result<()> {
    let theta = 2.0;
    let table = exact_height_cdf_adaptive(3000, theta)?;
    println!("table up to n = 3000, h = {}", table.h_max());
    for h in 9..=16 {
        println!("  P(H_3000 = {h:2}) = {:.5}", table.pmf(3000, h));
    }
    for n in [100, 500, 1000, 2000, 3000] {
        println!("  E[H_{n}] = {:.4}, E[H_n]/ln n = {:.4}", table.mean(n), table.mean(n) / (n as f64).ln());
    }

    let exact = exact_height_cdf_rational(6, 5, 2, 1)?;
    for n in 1..=6 {
        let row: Vec<String> = (0..=5).map(|h| exact.q(n, h).to_string()).collect();
        println!("  q_{n}(.) = {}", row.join(", "));
    }

    for h in [1, 5, 10] {
        println!("key identity residual h = {h}: {:.2e}", key_identity_residual(h, theta, 200)?);
    }

    let big = exact_height_cdf(1000, 14, theta)?;
    for h in 1..=14 {
        let d = threshold_diagnostic(50, h, &big, 1e-12)?;
        println!(
            "n = 50, h = {h:2}: Phi = {:.3e}, bridge {:.6}, {:.6} <= q_50 = {:.6} <= {:.6}",
            d.phi, d.bridge, d.lower, d.q_n, d.upper
        );
    }
    Ok(())
}
