//! Correcting a biased sample with known inclusion probabilities and a known
//! population mean.
//!
//! Two groups share the same variable range: group 0 is centred low and
//! answers rarely, group 1 is centred high and answers often. The sample
//! overstates the high values; the estimate pulls them back.
//!
//! ```text
//! cargo run --example estimate_population
//! ```

use maxent_fusion::{
    estimate_population, forward_observe, marginalize, pure_sample_estimate, tv_error, BinnedJoint, Grid,
    MomentConstraint, SelectionFunction,
};

fn main() -> maxent_fusion::Result<()> {
    let grid = Grid::uniform(-3.0, 3.0, 24, 2)?;
    let mids = grid.midpoints();
    let weights: Vec<f64> = mids
        .iter()
        .flat_map(|x| [(-(x + 1.0).powi(2)).exp(), 0.6 * (-(x - 1.2).powi(2) / 0.5).exp()])
        .collect();
    let population = BinnedJoint::from_weights(grid.clone(), weights)?;
    let truth = marginalize(&population);

    let selection = SelectionFunction::per_category(grid.clone(), &[0.05, 0.6])?;
    let observed = forward_observe(&population, &selection)?;
    let mean = MomentConstraint::mean(&grid, truth.mean())?;

    let est = estimate_population(&observed, &selection, &[mean])?;
    println!("inclusion rate {:.3}", observed.inclusion_rate());
    println!(
        "population mean {:.3}, sample mean {:.3}, estimate mean {:.3}",
        truth.mean(),
        observed.shape().mean(),
        est.marginal.mean()
    );
    println!(
        "TV error: sample {:.4}, estimate {:.4}",
        tv_error(&pure_sample_estimate(&observed), &truth)?,
        tv_error(&est.marginal, &truth)?
    );
    println!(
        "{} Newton iterations, max residual {:.1e}",
        est.iterations,
        est.max_residual()
    );
    println!("{:>7} {:>8} {:>8} {:>8}", "x", "truth", "sample", "estimate");
    for (i, x) in mids.iter().enumerate().step_by(2) {
        println!(
            "{x:>7.2} {:>8.4} {:>8.4} {:>8.4}",
            truth.mass()[i],
            observed.shape().mass()[i],
            est.marginal.mass()[i]
        );
    }
    Ok(())
}
