//! Estimation when part of the domain is never sampled.
//!
//! Selection is deterministic in the observed variable: bins flagged
//! observable are sampled completely, the rest never. The population then
//! decomposes as `W · shape` on observable bins plus an unknown distribution of
//! mass `1 − W` on censored bins. Neither `W` nor the censored part is given;
//! both follow from maximizing entropy under the moment constraints.
//!
//! Since the observable part has a fixed shape `s`, it enters the entropy as a
//! single atom of mass `W` carrying the intrinsic entropy `H(s)`:
//! `H(p) = −W log W + W H(s) − Σ q log q`. That atom gets log base weight
//! `H(s)`, which leaves a log-linear problem in the moment multipliers only.

use super::loglinear::{LogLinear, SolverOptions};
use super::{DualState, Estimate, MomentConstraint};
use crate::dist::{entropy_of, marginalize, BinnedJoint, Grid, Marginal};
use crate::error::{Error, Result};

/// Joint grid category of observable cells; censored cells use category 0.
pub const OBSERVABLE: usize = 1;
pub const CENSORED: usize = 0;

#[derive(Debug, Clone)]
pub struct CensoredEstimate {
    pub estimate: Estimate,
    /// Recovered population fraction lying in the observable region.
    pub sample_weight: f64,
}

fn feature_value(m: &MomentConstraint, bin: usize, observable: bool) -> Result<f64> {
    let g = m.grid();
    match g.categories() {
        1 => Ok(m.feature()[bin]),
        2 => Ok(m.feature()[g.cell(bin, if observable { OBSERVABLE } else { CENSORED })]),
        n => Err(Error::GridMismatch(format!(
            "censored moments need 1 or 2 categories, found {n}"
        ))),
    }
}

/// Observable bins for a threshold rule: bins whose midpoint lies below
/// (`below = true`) or above the threshold.
pub fn threshold_mask(edges: &[f64], threshold: f64, below: bool) -> Vec<bool> {
    edges
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            if below {
                mid < threshold
            } else {
                mid > threshold
            }
        })
        .collect()
}

/// Maximum-entropy population given only the sample shape on the observable
/// bins (`observable[i]`) and the moment constraints.
pub fn censored_estimate(
    obs_shape: &Marginal,
    observable: &[bool],
    moments: &[MomentConstraint],
) -> Result<CensoredEstimate> {
    censored_estimate_with(obs_shape, observable, moments, &SolverOptions::default())
}

pub fn censored_estimate_with(
    obs_shape: &Marginal,
    observable: &[bool],
    moments: &[MomentConstraint],
    opts: &SolverOptions,
) -> Result<CensoredEstimate> {
    let bins = obs_shape.bins();
    if observable.len() != bins {
        return Err(Error::GridMismatch(format!(
            "censor mask has {} entries for {} bins",
            observable.len(),
            bins
        )));
    }
    if !observable.iter().any(|&o| o) {
        return Err(Error::Config("censor mask leaves no observable bin".into()));
    }
    if let Some(m) = moments.iter().find(|m| !obs_shape.same_bins(m.grid().edges())) {
        return Err(Error::GridMismatch(format!(
            "moment grid with {} bins differs from observed bins",
            m.grid().bins()
        )));
    }
    let shape = obs_shape.mass();
    if let Some(i) = (0..bins).find(|&i| !observable[i] && shape[i] > 0.0) {
        return Err(Error::InvalidDistribution(format!("observed mass in censored bin {i}")));
    }

    let k = moments.len();
    let grid = Grid::new(obs_shape.edges().to_vec(), 2)?;
    let targets: Vec<f64> = moments.iter().map(|m| m.target()).collect();
    let mut block_features = vec![0.0; k];
    for i in (0..bins).filter(|&i| observable[i]) {
        for (b, m) in block_features.iter_mut().zip(moments) {
            *b += shape[i] * feature_value(m, i, true)?;
        }
    }

    let censored_bins: Vec<usize> = (0..bins).filter(|&i| !observable[i]).collect();
    let mut model = LogLinear::new(k, 0, targets.clone());
    model.push(entropy_of(shape), &block_features, None);
    let mut row = vec![0.0; k];
    for &i in &censored_bins {
        for (r, m) in row.iter_mut().zip(moments) {
            *r = feature_value(m, i, false)?;
        }
        model.push(0.0, &row, None);
    }

    let (lambda, probs, iterations) = if censored_bins.is_empty() {
        // Nothing to infer; the moments can only be checked.
        let max_gradient = block_features
            .iter()
            .zip(&targets)
            .fold(0.0f64, |m, (f, t)| m.max((f - t).abs()));
        if max_gradient > opts.tolerance.max(1e-8) {
            return Err(Error::Infeasible {
                iterations: 0,
                lambda_norm: f64::INFINITY,
                max_gradient,
            });
        }
        (vec![0.0; k], vec![1.0], 0)
    } else {
        let sol = model.solve(vec![0.0; k], opts)?;
        (sol.lambda, sol.eval.probs, sol.iterations)
    };

    let w = probs[0];
    let mut mass = vec![0.0; grid.cells()];
    let mut mask = vec![true; grid.cells()];
    for i in 0..bins {
        if observable[i] {
            mass[grid.cell(i, OBSERVABLE)] = w * shape[i];
            mask[grid.cell(i, OBSERVABLE)] = shape[i] == 0.0;
        }
    }
    for (&i, &q) in censored_bins.iter().zip(&probs[1..]) {
        mass[grid.cell(i, CENSORED)] = q;
        mask[grid.cell(i, CENSORED)] = false;
    }
    let joint = BinnedJoint::from_weights(grid, mass)?;
    let marginal = marginalize(&joint);

    let mut moment_residuals = Vec::with_capacity(k);
    for m in moments {
        let mut e = 0.0;
        for (i, (&p, &obs)) in marginal.mass().iter().zip(observable).enumerate() {
            e += p * feature_value(m, i, obs)?;
        }
        moment_residuals.push((e - m.target()).abs());
    }
    let recovered_w: f64 = (0..bins).filter(|&i| observable[i]).map(|i| marginal.mass()[i]).sum();
    let observation_residuals = (0..bins)
        .filter(|&i| observable[i])
        .map(|i| (marginal.mass()[i] / recovered_w - shape[i]).abs())
        .collect();

    Ok(CensoredEstimate {
        estimate: Estimate {
            joint,
            marginal,
            dual: DualState {
                lambda_f: lambda,
                lambda_obs: Vec::new(),
                support_mask: mask,
            },
            moment_residuals,
            observation_residuals,
            iterations,
            converged: true,
        },
        sample_weight: recovered_w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges(n: usize) -> Vec<f64> {
        (0..=n).map(|i| -1.0 + 2.0 * i as f64 / n as f64).collect()
    }

    #[test]
    fn nothing_censored_returns_shape() {
        let shape = Marginal::from_weights(edges(4), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let g = Grid::new(edges(4), 1).unwrap();
        let m = MomentConstraint::mean(&g, shape.mean()).unwrap();
        let est = censored_estimate(&shape, &[true; 4], &[m]).unwrap();
        assert_eq!(est.sample_weight, 1.0);
        assert!(est.estimate.marginal.max_abs_diff(&shape) < 1e-15);
    }

    #[test]
    fn inconsistent_moment_without_censoring_is_infeasible() {
        let shape = Marginal::from_weights(edges(4), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let g = Grid::new(edges(4), 1).unwrap();
        let m = MomentConstraint::mean(&g, shape.mean() + 0.1).unwrap();
        assert!(matches!(
            censored_estimate(&shape, &[true; 4], &[m]),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn without_moments_censored_bins_match_sample_density() {
        // With no moments the observable block weighs exp(H(shape)) against one
        // per censored bin; a uniform shape over two bins makes all four equal.
        let shape = Marginal::from_weights(edges(4), vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let est = censored_estimate(&shape, &[true, true, false, false], &[]).unwrap();
        assert!((est.sample_weight - 0.5).abs() < 1e-12);
        assert!(est.estimate.marginal.mass().iter().all(|p| (p - 0.25).abs() < 1e-12));
    }

    #[test]
    fn shape_is_preserved_and_moments_met() {
        let shape = Marginal::from_weights(edges(6), vec![1.0, 3.0, 2.0, 0.0, 0.0, 0.0]).unwrap();
        let observable = [true, true, true, false, false, false];
        let g = Grid::new(edges(6), 2).unwrap();
        let ms = MomentConstraint::mean_std(&g, 0.0, Some(0.5)).unwrap();
        let est = censored_estimate(&shape, &observable, &ms).unwrap();
        assert!(est.estimate.max_residual() <= 1e-8);
        assert!(est.sample_weight > 0.0 && est.sample_weight < 1.0);
    }

    #[test]
    fn rejects_sample_mass_in_censored_bin() {
        let shape = Marginal::from_weights(edges(2), vec![1.0, 1.0]).unwrap();
        assert!(censored_estimate(&shape, &[true, false], &[]).is_err());
        assert!(censored_estimate(&shape, &[false, false], &[]).is_err());
    }
}
