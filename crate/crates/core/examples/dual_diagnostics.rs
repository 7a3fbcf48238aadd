//! The dual problem behind an estimate: gradient decay along the Newton
//! iterations, the multipliers, and what an unreachable target looks like.
//!
//! ```text
//! cargo run --example dual_diagnostics
//! ```

use maxent_fusion::solver::{solve_dual_with, SolverOptions};
use maxent_fusion::{
    dual_gradient, dual_objective, entropy, estimate_population, forward_observe, reconstruct_primal, BinnedJoint,
    ConstraintSet, DualState, Error, Grid, MomentConstraint, SelectionFunction,
};

fn main() -> maxent_fusion::Result<()> {
    let grid = Grid::uniform(0.0, 1.0, 5, 2)?;
    let truth = BinnedJoint::from_weights(grid.clone(), vec![1.0, 2.0, 3.0, 1.0, 2.0, 2.0, 1.0, 3.0, 0.5, 1.0])?;
    let selection = SelectionFunction::new(grid.clone(), vec![0.9, 0.2, 0.8, 0.3, 0.7, 0.4, 0.6, 0.5, 0.5, 0.6])?;
    let observed = forward_observe(&truth, &selection)?;
    let mean = MomentConstraint::mean(&grid, 0.0)?;
    let mean = MomentConstraint::mean(&grid, mean.evaluate(&truth))?;
    let cs = ConstraintSet::new(
        grid.clone(),
        vec![mean.clone()],
        Some((observed.clone(), selection.clone())),
    )?;

    let zero = DualState::zeros(&cs);
    let g = dual_gradient(&zero, &cs)?;
    println!(
        "at zero multipliers: objective {:.10}, gradient {:.3?}",
        dual_objective(&zero, &cs)?,
        g
    );
    println!("{:>4} {:>12}", "cap", "max |grad|");
    for cap in 1..=6 {
        let opts = SolverOptions {
            max_iterations: cap,
            ..SolverOptions::default()
        };
        match solve_dual_with(&cs, None, &opts) {
            Ok(sol) => println!(
                "{cap:>4} {:>12.2e}  converged after {} iterations",
                sol.max_gradient, sol.iterations
            ),
            Err(Error::NotConverged { max_gradient, .. }) => println!("{cap:>4} {max_gradient:>12.2e}"),
            Err(e) => return Err(e),
        }
    }

    let est = estimate_population(&observed, &selection, &[mean])?;
    let primal = reconstruct_primal(&est.dual, &cs)?;
    println!("\nmultipliers: moment {:?}", est.dual.lambda_f);
    println!("             per bin {:?}", est.dual.lambda_obs);
    println!(
        "dual objective {:.9} = entropy {:.9}",
        dual_objective(&est.dual, &cs)?,
        entropy(&primal)
    );

    let far = MomentConstraint::mean(&grid, 0.95)?;
    match estimate_population(&observed, &selection, &[far]) {
        Ok(_) => println!("mean 0.95 was reachable"),
        Err(e) => println!("\nmean 0.95: {e}"),
    }
    Ok(())
}
