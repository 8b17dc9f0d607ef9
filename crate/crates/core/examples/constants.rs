//! Height constants and branching-random-walk exponents.
//!
//! cargo run --example constants -- 2.0

use plancherel_trees::constants::{brw_exponents, finite_mass_exponent, height_constants};

fn main() -> plancherel_trees::Result<()> {
    let theta: f64 = std::env::args().nth(1).map(|s| s.parse().expect("theta")).unwrap_or(2.0);

    let c = height_constants(theta)?;
    println!("theta = {theta}");
    println!("  t_star = {:.12}", c.t_star);
    println!("  v_star = {:.12}", c.v_star);
    println!("  c_star = {:.12}", c.c_star);
    println!("  c_plus = {:.12} (attained at s = {})", c.c_plus, c.s_plus);

    println!("\n   t      beta_t     kappa     kappa'");
    for t in [1.0, 1.5, 2.0, c.t_star, 4.0] {
        let e = brw_exponents(t, theta)?;
        println!("{t:6.3} {:10.6} {:9.5} {:9.5}", e.beta, e.kappa, e.kappa_prime);
    }

    // finite-mass exponents converge to beta_t as the mass grows
    let beta = brw_exponents(2.0, theta)?.beta;
    for m in [10, 100, 1_000, 10_000] {
        println!("beta_(m={m}, t=2) = {:.6}  (limit {beta:.6})", finite_mass_exponent(m, 2.0, theta)?);
    }
    Ok(())
}
