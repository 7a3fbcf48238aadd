//! A sample that only ever sees the negative half of the score range.
//!
//! The observable part keeps its shape; the rest is filled in from the
//! population mean alone, then from mean and standard deviation.
//!
//! ```text
//! cargo run --example censored_negative_half -- [seed]
//! ```

use maxent_fusion::simgen::{censored_demo, CensoredDemoConfig};

fn main() -> maxent_fusion::Result<()> {
    let seed = std::env::args().nth(1).map(|s| s.parse().expect("seed")).unwrap_or(0);
    let demo = censored_demo(&CensoredDemoConfig {
        rng_seed: seed,
        ..CensoredDemoConfig::default()
    })?;
    let (mean_only, mean_std) = demo.estimates()?;
    let errors = demo.errors()?;
    println!(
        "population mean {:.3}, std {:.3}; true observable weight {:.3}",
        demo.population_mean, demo.population_std, demo.true_weight
    );
    println!("{:<12}{:>10}{:>10}", "estimate", "TV error", "weight");
    println!("{:<12}{:>10.3}{:>10.3}", "sample", errors.pure_sample, 1.0);
    println!(
        "{:<12}{:>10.3}{:>10.3}",
        "mean", errors.mean_only, mean_only.sample_weight
    );
    println!(
        "{:<12}{:>10.3}{:>10.3}",
        "mean+std", errors.mean_std, mean_std.sample_weight
    );

    println!("\n{:>7} {:>8} {:>8} {:>8}", "x", "truth", "mean", "mean+std");
    let mids = demo.grid.midpoints();
    for i in (0..mids.len()).step_by(5) {
        println!(
            "{:>7.2} {:>8.4} {:>8.4} {:>8.4}",
            mids[i],
            demo.truth.mass()[i],
            mean_only.estimate.marginal.mass()[i],
            mean_std.estimate.marginal.mass()[i]
        );
    }
    Ok(())
}
