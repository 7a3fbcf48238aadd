//! Gaussian-mixture benchmark: Pure Prior vs Pure Sample vs Prior+Sample.
//!
//! ```text
//! cargo run --release --example simulate_benchmark -- [replicas] [seed]
//! ```

use std::time::Instant;

use maxent_fusion::report::Estimator;
use maxent_fusion::simgen::{run_benchmark, ReplicaConfig};

fn main() -> maxent_fusion::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_replicas = args.next().map(|s| s.parse().expect("replica count")).unwrap_or(300);
    let rng_seed = args.next().map(|s| s.parse().expect("seed")).unwrap_or(1);
    let cfg = ReplicaConfig {
        n_replicas,
        rng_seed,
        ..ReplicaConfig::default()
    };

    let start = Instant::now();
    let report = run_benchmark(&cfg)?;
    println!(
        "{} replicas, seed {}, {:.1}s, {} failed, {} redraws, max residual {:.2e}",
        n_replicas,
        rng_seed,
        start.elapsed().as_secs_f64(),
        report.failed,
        report.redraws,
        report.max_residual()
    );
    println!("{:<14}{:>8}{:>8}{:>8}{:>8}", "model", "mean", "q25", "median", "q75");
    for row in &report.summary {
        println!(
            "{:<14}{:>8.3}{:>8.3}{:>8.3}{:>8.3}",
            row.estimator.label(),
            row.mean,
            row.q25,
            row.median,
            row.q75
        );
    }
    for (model, baseline) in [
        (Estimator::PriorSample, Estimator::PureSample),
        (Estimator::PriorSample, Estimator::PurePrior),
    ] {
        if let Some(g) = report.gain(model, baseline) {
            println!(
                "gain of {} over {}: mean {:.1}%, best quartile {:.1}%, worst quartile {:.1}%",
                model.label(),
                baseline.label(),
                100.0 * g.mean,
                100.0 * g.best_quartile,
                100.0 * g.worst_quartile
            );
        }
    }
    Ok(())
}
