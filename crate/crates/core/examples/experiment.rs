//! Reproducible Monte Carlo experiments.
//!
//! cargo run --release --example experiment

use plancherel_trees::montecarlo::{
    barrier_diagnostic, gamma_mixture_check, height_ratio_trend, run_experiment, ExperimentConfig,
};

fn main() -> plancherel_trees::Result<()> {
    for row in height_ratio_trend(2.0, &[1_000, 10_000, 100_000], 200, 1)? {
        println!(
            "n = {:>7}: median H {:>5}, median H/ln n {:.3}, IQR {:.3}, mean H/ln n {:.3} +- {:.3}",
            row.n, row.median_height, row.median_ratio, row.iqr, row.mean_ratio, row.mean_ratio_se
        );
    }

    let cfg = ExperimentConfig::from_json(
        r#"{"kind":"macroscopic","theta":2,"ns":[1000,10000,100000],"reps":200,"seed":5,"params":{"delta":0.3}}"#,
    )?;
    let out = run_experiment(&cfg)?;
    for s in &out.summary {
        println!("n = {:>6}: median N0 {}, mean {:.2} +- {:.2}", s.n, s.median, s.mean, s.se);
    }
    let mut csv = Vec::new();
    out.write_csv(&mut csv)?;
    println!("{} CSV bytes", csv.len());

    for n in [10, 1_000, 100_000] {
        let g = gamma_mixture_check(2.0, n, 100_000, 2)?;
        println!("n = {n}: var {:.4} +- {:.4}, exact {:.4}, limit {:.4}", g.var, g.var_se, g.exact_var, g.limit_var);
    }

    for r in barrier_diagnostic(2.0, 2.0, &[1, 2, 4, 8, 16], 1.0, 20_000, 3)? {
        println!(
            "h = {:>2} (n = {}): {:.4} +- {:.4}, widened {:.4}, exact {:?}",
            r.h, r.n, r.estimate, r.se, r.wide_estimate, r.exact
        );
    }
    Ok(())
}
