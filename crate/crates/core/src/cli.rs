//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 verification failure,
//! 3 resource budget exceeded.

use std::collections::HashMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bijection::{
    all_sequences, bitree_to_sequence, enumerate_bitrees, sequence_to_bitree, BilabelledTree, ChordSequence,
};
use crate::constants::height_constants;
use crate::error::Error;
use crate::ewens::{ewens_pmf, partitions, sample_ewens_crp, total_variation};
use crate::fragmentation::{sample_fragmentation, sample_labelled_fragmentation, MassTree};
use crate::heights::{
    exact_height_cdf_adaptive, exact_height_cdf_budgeted, key_identity_residual_from, tree_stats, HeightBudget,
};
use crate::montecarlo::{run_experiment, ExperimentConfig};
use crate::trees::{fundamental_identity, hook_counts, CanonicalTree};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "plancherel", version, about = "Ewens fragmentation trees and Plancherel random trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    Canon,
    Json,
    Stats,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample an Ewens fragmentation tree.
    Sample {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, value_parser = positive_real)]
        theta: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// Attach a standard labelling.
        #[arg(long)]
        labelled: bool,
        #[arg(long, value_enum, default_value_t = Emit::Canon)]
        emit: Emit,
        /// s values for `--emit stats`.
        #[arg(long, value_delimiter = ',', default_value = "2,3")]
        s: Vec<u32>,
        #[arg(long, default_value_t = 0.3, value_parser = unit_interval)]
        delta: f64,
    },
    /// Tabulate q_n(h) = P(H_n <= h) as CSV.
    ExactDist {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n_max: u64,
        /// Omit to stop once 1 - q_N(h) < 1e-12.
        #[arg(long)]
        h_max: Option<usize>,
        #[arg(long, value_parser = positive_real)]
        theta: f64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print t_star, v_star, c_star, c_plus and s_plus.
    Constants {
        #[arg(long, value_parser = positive_real)]
        theta: f64,
        #[arg(long)]
        json: bool,
    },
    /// Run the exact identity checks.
    Verify {
        /// Smaller sizes and sample counts.
        #[arg(long)]
        fast: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
    },
    /// Map a chord sequence to its bilabelled tree, or back with --invert.
    Bijection {
        /// Pairs `a,b` separated by `;`.
        #[arg(long, required_unless_present = "invert", conflicts_with = "invert")]
        seq: Option<String>,
        /// Bilabelled tree as a JSON node list, or `@path` to read one.
        #[arg(long)]
        invert: Option<String>,
    },
    /// Statistics of a tree stored as a JSON node list.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "2,3")]
        s: Vec<u32>,
        #[arg(long, default_value_t = 0.3, value_parser = unit_interval)]
        delta: f64,
    },
    /// Run a Monte Carlo experiment described by a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// CSV of replica metrics; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the per-(n, metric) summary as JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

fn positive_real(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("expected a positive finite real, got {s}"))
    }
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err(format!("expected a value in (0,1), got {s}"))
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Budget(_) | Error::SizeLimit { .. } => EXIT_BUDGET,
        _ => EXIT_USAGE,
    }
}

fn resolve_seed(seed: Option<u64>, err: &mut dyn Write) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        let _ = writeln!(err, "seed: {s}");
        s
    })
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn write_to(path: &Option<PathBuf>, out: &mut dyn Write, f: impl FnOnce(&mut dyn Write) -> crate::Result<()>) -> crate::Result<()> {
    match path {
        Some(p) => {
            let mut file = std::io::BufWriter::new(std::fs::File::create(p)?);
            f(&mut file)?;
            file.flush()?;
            Ok(())
        }
        None => f(out),
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> crate::Result<i32> {
    match cmd {
        Command::Sample { n, theta, seed, labelled, emit, s, delta } => {
            if s.iter().any(|&x| x < 1) {
                return Err(Error::Domain("s values must be at least 1".into()));
            }
            let seed = resolve_seed(seed, err);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (tree, labelled_json) = if labelled {
                let lt = sample_labelled_fragmentation(n, theta, &mut rng)?;
                let json = lt.to_json();
                (lt.tree, Some(json))
            } else {
                (sample_fragmentation(n, theta, &mut rng)?, None)
            };
            match emit {
                Emit::Canon => writeln!(out, "{}", tree.canonical())?,
                Emit::Json => writeln!(out, "{}", labelled_json.unwrap_or_else(|| tree.to_json()))?,
                Emit::Stats => writeln!(out, "{}", serde_json::to_string(&tree_stats(&tree, &s, delta)?)?)?,
            }
        }
        Command::ExactDist { n_max, h_max, theta, out: path } => {
            let table = exact_height_cdf_budgeted(n_max as usize, h_max, theta, HeightBudget::default())?;
            write_to(&path, out, |w| table.write_csv(w))?;
        }
        Command::Constants { theta, json } => {
            let c = height_constants(theta)?;
            if json {
                writeln!(out, "{}", serde_json::to_string(&c)?)?;
            } else {
                writeln!(out, "t_star={:.12}", c.t_star)?;
                writeln!(out, "v_star={:.12}", c.v_star)?;
                writeln!(out, "c_star={:.12}", c.c_star)?;
                writeln!(out, "c_plus={:.12}", c.c_plus)?;
                writeln!(out, "s_plus={}", c.s_plus)?;
            }
        }
        Command::Verify { fast, seed, json } => {
            let seed = resolve_seed(seed, err);
            let checks = verify_suite(fast, seed);
            if json {
                writeln!(out, "{}", serde_json::to_string_pretty(&checks)?)?;
            } else {
                for c in &checks {
                    writeln!(
                        out,
                        "{} {:<28} {} ({:.2}s)",
                        if c.passed { "PASS" } else { "FAIL" },
                        c.name,
                        c.detail,
                        c.seconds
                    )?;
                }
            }
            return Ok(if checks.iter().all(|c| c.passed) { EXIT_OK } else { EXIT_VERIFY });
        }
        Command::Bijection { seq, invert } => {
            if let Some(src) = invert {
                let text = match src.strip_prefix('@') {
                    Some(p) => std::fs::read_to_string(p)?,
                    None => src,
                };
                let tree = BilabelledTree::from_json(&text)?;
                writeln!(out, "{}", bitree_to_sequence(&tree)?)?;
            } else {
                let s = ChordSequence::parse(seq.as_deref().unwrap_or_default())?;
                let tree = sequence_to_bitree(&s)?;
                write!(out, "{tree}")?;
                writeln!(out, "{}", tree.to_json())?;
            }
        }
        Command::Stats { input, s, delta } => {
            if s.iter().any(|&x| x < 1) {
                return Err(Error::Domain("s values must be at least 1".into()));
            }
            let tree = MassTree::from_json(&std::fs::read_to_string(input)?)?;
            writeln!(out, "{}", serde_json::to_string(&tree_stats(&tree, &s, delta)?)?)?;
        }
        Command::Experiment { config, out: path, summary } => {
            let cfg = ExperimentConfig::from_json(&std::fs::read_to_string(config)?)?;
            let result = run_experiment(&cfg)?;
            write_to(&path, out, |w| result.write_csv(w))?;
            if let Some(p) = summary {
                std::fs::write(p, serde_json::to_string_pretty(&result.summary)?)?;
            }
        }
    }
    Ok(EXIT_OK)
}

/// Outcome of one verification check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

fn check(name: &str, f: impl FnOnce() -> crate::Result<(bool, String)>) -> Check {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    Check { name: name.into(), passed, detail, seconds: start.elapsed().as_secs_f64() }
}

/// Exact identity suite. `fast` shrinks sizes and sample counts.
pub fn verify_suite(fast: bool, seed: u64) -> Vec<Check> {
    let max_fund = if fast { 7 } else { 9 };
    let max_bij = if fast { 5 } else { 6 };
    let (ki_h, ki_deg) = if fast { (5, 100) } else { (10, 200) };
    let (tv_samples, tv_tol) = if fast { (100_000u64, 0.015) } else { (1_000_000, 0.005) };
    vec![
        check("fundamental identity", || {
            for n in 1..=max_fund {
                let (lhs, rhs) = fundamental_identity(n)?;
                if lhs != rhs {
                    return Ok((false, format!("n = {n}: {lhs} != {rhs}")));
                }
            }
            Ok((true, format!("n <= {max_fund}")))
        }),
        check("hook lengths", || {
            let h = hook_counts(&CanonicalTree::parse("(()()((()()())))")?)?;
            let ok = h.d == 252u32.into() && h.u == 21u32.into();
            Ok((ok, format!("d = {}, u = {}", h.d, h.u)))
        }),
        check("bijection roundtrip", || {
            for n in 1..=max_bij {
                let seqs = all_sequences(n);
                let mut keys = std::collections::HashSet::new();
                for s in &seqs {
                    let t = sequence_to_bitree(s)?;
                    if &bitree_to_sequence(&t)? != s {
                        return Ok((false, format!("G(F(s)) != s for {s}")));
                    }
                    keys.insert(t.key());
                }
                let image = enumerate_bitrees(n);
                if keys.len() != seqs.len() || image.len() != seqs.len() {
                    return Ok((false, format!("n = {n}: image size mismatch")));
                }
                for t in &image {
                    if sequence_to_bitree(&bitree_to_sequence(t)?)?.key() != t.key() {
                        return Ok((false, format!("F(G(t)) != t at n = {n}")));
                    }
                }
            }
            Ok((true, format!("n <= {max_bij}")))
        }),
        check("key identity", || {
            let mut worst: f64 = 0.0;
            for theta in [1.0, 2.0] {
                let table = exact_height_cdf_budgeted(ki_deg + 1, Some(ki_h), theta, HeightBudget::default())?;
                for h in 1..=ki_h {
                    worst = worst.max(key_identity_residual_from(&table, h, ki_deg)?);
                }
            }
            Ok((worst < 1e-9, format!("max residual {worst:.3e}")))
        }),
        check("ewens sampler", || {
            let parts = partitions(8);
            let index: HashMap<Vec<u64>, usize> = parts.iter().enumerate().map(|(i, p)| (p.to_dense(), i)).collect();
            let mut worst: f64 = 0.0;
            for (k, theta) in [0.5, 1.0, 2.0].into_iter().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
                let mut counts = vec![0u64; parts.len()];
                for _ in 0..tv_samples {
                    counts[index[&sample_ewens_crp(8, theta, &mut rng)?.to_dense()]] += 1;
                }
                let probs: Vec<f64> = parts.iter().map(|p| ewens_pmf(p, theta)).collect::<crate::Result<_>>()?;
                worst = worst.max(total_variation(&counts, &probs));
            }
            Ok((worst < tv_tol, format!("max TV {worst:.4} at {tv_samples} samples")))
        }),
        check("height table", || {
            let t = exact_height_cdf_adaptive(200, 2.0)?;
            let ok = (t.q(3, 1) - 2.0 / 3.0).abs() < 1e-14 && t.q(2, 0) == 0.0 && t.q(2, 1) == 1.0;
            Ok((ok, format!("q_3(1) = {:.15}", t.q(3, 1))))
        }),
    ]
}
