//! Constrained maximum-entropy estimation of a population distribution.
//!
//! The estimate maximizes the entropy of the joint population distribution
//! over the (bin × category) grid subject to
//!
//! * moment constraints `E[f_k] = f̄_k`, and
//! * the observation constraint `Σ_s p(i, s) ρ_s(i, s) = ρ_o(i)` for every
//!   observed bin `i`, where `ρ_o` is the observed mass (inclusion rate times
//!   the sample histogram shape).
//!
//! The maximizer has the exponential-family form
//! `p(i, s) ∝ exp(Σ_k λ_k f_k(i, s) + λ_obs(i) ρ_s(i, s))`. The multipliers are
//! found by minimizing the convex dual with damped Newton iteration.
//!
//! Bins with no observed mass but a positive inclusion probability somewhere
//! in the row would push `λ_obs(i)` to −∞. Those cells are masked up front:
//! only cells with `ρ_s(i, s) = 0` keep support in such rows.

mod censored;
mod loglinear;

pub use censored::{censored_estimate, censored_estimate_with, threshold_mask, CensoredEstimate, CENSORED, OBSERVABLE};
pub use loglinear::SolverOptions;

use serde::Serialize;

use crate::dist::{entropy_of, marginalize, BinnedJoint, Grid, Marginal, ObservedHistogram, SelectionFunction};
use crate::error::{Error, Result};
use loglinear::{max_abs, LogLinear};

/// Known expectation of a feature tabulated on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentConstraint {
    grid: Grid,
    feature: Vec<f64>,
    target: f64,
}

impl MomentConstraint {
    pub fn new(grid: Grid, feature: Vec<f64>, target: f64) -> Result<Self> {
        if feature.len() != grid.cells() {
            return Err(Error::Config(format!(
                "feature has {} values for {} cells",
                feature.len(),
                grid.cells()
            )));
        }
        if !target.is_finite() || feature.iter().any(|f| !f.is_finite()) {
            return Err(Error::Config("moment feature and target must be finite".into()));
        }
        Ok(MomentConstraint { grid, feature, target })
    }

    /// Feature computed from (bin midpoint, category).
    pub fn from_fn(grid: &Grid, target: f64, f: impl Fn(f64, usize) -> f64) -> Result<Self> {
        let mids = grid.midpoints();
        let feature = mids
            .iter()
            .flat_map(|&x| (0..grid.categories()).map(move |c| (x, c)))
            .map(|(x, c)| f(x, c))
            .collect();
        MomentConstraint::new(grid.clone(), feature, target)
    }

    /// Mean of the observed variable, evaluated at bin midpoints.
    pub fn mean(grid: &Grid, target: f64) -> Result<Self> {
        MomentConstraint::from_fn(grid, target, |x, _| x)
    }

    /// Raw second moment of the observed variable at bin midpoints.
    pub fn second_moment(grid: &Grid, target: f64) -> Result<Self> {
        MomentConstraint::from_fn(grid, target, |x, _| x * x)
    }

    /// Mean constraint, plus a second-moment constraint `std² + mean²` when a
    /// standard deviation is known.
    pub fn mean_std(grid: &Grid, mean: f64, std: Option<f64>) -> Result<Vec<Self>> {
        let mut out = vec![MomentConstraint::mean(grid, mean)?];
        if let Some(sd) = std {
            if sd.is_nan() || sd < 0.0 {
                return Err(Error::Config(format!("standard deviation {sd} must be nonnegative")));
            }
            out.push(MomentConstraint::second_moment(grid, sd * sd + mean * mean)?);
        }
        Ok(out)
    }

    /// Adds `c` to the feature and the target alike.
    pub fn shifted(&self, c: f64) -> Self {
        MomentConstraint {
            grid: self.grid.clone(),
            feature: self.feature.iter().map(|f| f + c).collect(),
            target: self.target + c,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn feature(&self) -> &[f64] {
        &self.feature
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    /// Expectation of the feature under `joint`.
    pub fn evaluate(&self, joint: &BinnedJoint) -> f64 {
        joint.mass().iter().zip(&self.feature).map(|(p, f)| p * f).sum()
    }
}

/// Everything the estimate must reproduce.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    grid: Grid,
    moments: Vec<MomentConstraint>,
    observation: Option<(ObservedHistogram, SelectionFunction)>,
}

impl ConstraintSet {
    pub fn new(
        grid: Grid,
        moments: Vec<MomentConstraint>,
        observation: Option<(ObservedHistogram, SelectionFunction)>,
    ) -> Result<Self> {
        if moments.is_empty() && observation.is_none() {
            return Err(Error::Config("constraint set is empty".into()));
        }
        if let Some(m) = moments.iter().find(|m| m.grid != grid) {
            return Err(Error::GridMismatch(format!(
                "moment grid has {} bins x {} categories, expected {} x {}",
                m.grid.bins(),
                m.grid.categories(),
                grid.bins(),
                grid.categories()
            )));
        }
        if let Some((obs, sel)) = &observation {
            if sel.grid() != &grid {
                return Err(Error::GridMismatch(
                    "selection grid differs from constraint grid".into(),
                ));
            }
            if !obs.shape().same_bins(grid.edges()) {
                return Err(Error::GridMismatch("observed histogram bins differ from grid".into()));
            }
        }
        Ok(ConstraintSet {
            grid,
            moments,
            observation,
        })
    }

    pub fn moments_only(grid: Grid, moments: Vec<MomentConstraint>) -> Result<Self> {
        ConstraintSet::new(grid, moments, None)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn moments(&self) -> &[MomentConstraint] {
        &self.moments
    }

    pub fn observation(&self) -> Option<(&ObservedHistogram, &SelectionFunction)> {
        self.observation.as_ref().map(|(o, s)| (o, s))
    }

    fn observed_mass(&self) -> Option<Vec<f64>> {
        self.observation.as_ref().map(|(o, _)| o.observed_mass())
    }

    /// Cells that must carry zero mass: in rows with no observed mass, every
    /// cell with a positive inclusion probability.
    pub fn support_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.grid.cells()];
        if let Some((obs, sel)) = &self.observation {
            let n_s = self.grid.categories();
            for (i, &m) in obs.shape().mass().iter().enumerate() {
                if m == 0.0 {
                    for s in 0..n_s {
                        mask[i * n_s + s] = sel.at(i, s) > 0.0;
                    }
                }
            }
        }
        mask
    }

    /// Rejects bins whose observed mass can never have been sampled.
    pub fn check_selection(&self) -> Result<()> {
        if let Some((obs, sel)) = &self.observation {
            if sel.prob().iter().all(|&p| p == 0.0) {
                return Err(Error::DegenerateSelection(
                    "selection probability is zero everywhere".into(),
                ));
            }
            for (i, (row, &m)) in sel.rows().zip(obs.shape().mass()).enumerate() {
                if m > 0.0 && row.iter().all(|&p| p == 0.0) {
                    return Err(Error::DegenerateSelection(format!(
                        "bin {i} has observed mass but zero inclusion probability"
                    )));
                }
            }
        }
        Ok(())
    }

    fn n_obs(&self) -> usize {
        if self.observation.is_some() {
            self.grid.bins()
        } else {
            0
        }
    }

    fn model(&self, mask: &[bool]) -> Result<(LogLinear, Vec<usize>)> {
        if mask.len() != self.grid.cells() {
            return Err(Error::GridMismatch("support mask does not match grid".into()));
        }
        let k = self.moments.len();
        let mut target: Vec<f64> = self.moments.iter().map(|m| m.target).collect();
        let rho_o = self.observed_mass();
        if let Some(r) = &rho_o {
            target.extend_from_slice(r);
        }
        let mut model = LogLinear::new(k, self.n_obs(), target);
        let mut cells = Vec::with_capacity(self.grid.cells());
        let mut dense = vec![0.0; k];
        let n_s = self.grid.categories();
        for cell in (0..self.grid.cells()).filter(|&c| !mask[c]) {
            for (d, m) in dense.iter_mut().zip(&self.moments) {
                *d = m.feature[cell];
            }
            let sparse = self.observation.as_ref().map(|(_, sel)| (cell / n_s, sel.prob()[cell]));
            model.push(0.0, &dense, sparse);
            cells.push(cell);
        }
        if cells.is_empty() {
            return Err(Error::DegenerateSelection("every cell is masked".into()));
        }
        Ok((model, cells))
    }
}

/// Lagrange multipliers of the estimate plus the fixed support mask.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualState {
    pub lambda_f: Vec<f64>,
    /// One multiplier per observed bin; empty without an observation constraint.
    pub lambda_obs: Vec<f64>,
    /// `true` marks a cell forced to zero mass.
    pub support_mask: Vec<bool>,
}

impl DualState {
    /// Zero multipliers with the constraint set's support mask.
    pub fn zeros(cs: &ConstraintSet) -> Self {
        DualState {
            lambda_f: vec![0.0; cs.moments.len()],
            lambda_obs: vec![0.0; cs.n_obs()],
            support_mask: cs.support_mask(),
        }
    }

    fn flat(&self) -> Vec<f64> {
        self.lambda_f.iter().chain(&self.lambda_obs).copied().collect()
    }

    fn check(&self, cs: &ConstraintSet) -> Result<()> {
        if self.lambda_f.len() != cs.moments.len() || self.lambda_obs.len() != cs.n_obs() {
            return Err(Error::Config(
                "multiplier dimensions do not match constraint set".into(),
            ));
        }
        if self.lambda_f.iter().chain(&self.lambda_obs).any(|l| !l.is_finite()) {
            return Err(Error::Config("multipliers must be finite".into()));
        }
        Ok(())
    }
}

/// `log N(λ) − Σ λ_f f̄ − Σ λ_obs ρ_o` over the unmasked cells.
pub fn dual_objective(state: &DualState, cs: &ConstraintSet) -> Result<f64> {
    state.check(cs)?;
    let (model, _) = cs.model(&state.support_mask)?;
    Ok(model.evaluate(&state.flat()).value)
}

/// Gradient of [`dual_objective`], ordered as `lambda_f` then `lambda_obs`.
///
/// The components are the moment residuals `E[f_k] − f̄_k` followed by the
/// per-bin observation residuals `Σ_s p ρ_s − ρ_o`.
pub fn dual_gradient(state: &DualState, cs: &ConstraintSet) -> Result<Vec<f64>> {
    state.check(cs)?;
    let (model, _) = cs.model(&state.support_mask)?;
    Ok(model.evaluate(&state.flat()).gradient)
}

/// Solver output with iteration diagnostics.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub state: DualState,
    pub iterations: usize,
    pub max_gradient: f64,
}

pub fn solve_dual(cs: &ConstraintSet, init: Option<&DualState>) -> Result<DualState> {
    solve_dual_with(cs, init, &SolverOptions::default()).map(|s| s.state)
}

pub fn solve_dual_with(cs: &ConstraintSet, init: Option<&DualState>, opts: &SolverOptions) -> Result<DualSolution> {
    cs.check_selection()?;
    let start = match init {
        Some(s) => {
            s.check(cs)?;
            s.clone()
        }
        None => DualState::zeros(cs),
    };
    let (model, _) = cs.model(&start.support_mask)?;
    let sol = model.solve(start.flat(), opts)?;
    let k = cs.moments.len();
    Ok(DualSolution {
        state: DualState {
            lambda_f: sol.lambda[..k].to_vec(),
            lambda_obs: sol.lambda[k..].to_vec(),
            support_mask: start.support_mask,
        },
        iterations: sol.iterations,
        max_gradient: sol.eval.max_gradient(),
    })
}

/// The exponential-family joint for the given multipliers.
pub fn reconstruct_primal(state: &DualState, cs: &ConstraintSet) -> Result<BinnedJoint> {
    state.check(cs)?;
    let (model, cells) = cs.model(&state.support_mask)?;
    let eval = model.evaluate(&state.flat());
    let mut mass = vec![0.0; cs.grid.cells()];
    for (&cell, &p) in cells.iter().zip(&eval.probs) {
        mass[cell] = p;
    }
    BinnedJoint::from_weights(cs.grid.clone(), mass)
}

/// A solved estimate with its constraint residuals.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub joint: BinnedJoint,
    pub marginal: Marginal,
    pub dual: DualState,
    /// `|E[f_k] − f̄_k|` per moment constraint.
    pub moment_residuals: Vec<f64>,
    /// Per observed bin: `|Σ_s p ρ_s − ρ_o|` for the standard estimate, or the
    /// conditional-shape mismatch on observable bins for the censored one.
    pub observation_residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl Estimate {
    pub fn max_residual(&self) -> f64 {
        max_abs(&self.moment_residuals).max(max_abs(&self.observation_residuals))
    }
}

/// Per-constraint violations of `joint`.
pub fn residuals(joint: &BinnedJoint, cs: &ConstraintSet) -> (Vec<f64>, Vec<f64>) {
    let moments = cs
        .moments
        .iter()
        .map(|m| (m.evaluate(joint) - m.target).abs())
        .collect();
    let obs = match &cs.observation {
        Some((o, sel)) => joint
            .rows()
            .zip(sel.rows())
            .zip(o.observed_mass())
            .map(|((p, s), r)| (p.iter().zip(s).map(|(p, s)| p * s).sum::<f64>() - r).abs())
            .collect(),
        None => Vec::new(),
    };
    (moments, obs)
}

pub fn estimate_from_constraints(cs: &ConstraintSet, opts: &SolverOptions) -> Result<Estimate> {
    let sol = solve_dual_with(cs, None, opts)?;
    let joint = reconstruct_primal(&sol.state, cs)?;
    let (moment_residuals, observation_residuals) = residuals(&joint, cs);
    Ok(Estimate {
        marginal: marginalize(&joint),
        joint,
        dual: sol.state,
        moment_residuals,
        observation_residuals,
        iterations: sol.iterations,
        converged: true,
    })
}

/// Most probable population given the sample histogram, the selection
/// probabilities and the known moments.
pub fn estimate_population(
    obs: &ObservedHistogram,
    sel: &SelectionFunction,
    moments: &[MomentConstraint],
) -> Result<Estimate> {
    estimate_population_with(obs, sel, moments, &SolverOptions::default())
}

pub fn estimate_population_with(
    obs: &ObservedHistogram,
    sel: &SelectionFunction,
    moments: &[MomentConstraint],
    opts: &SolverOptions,
) -> Result<Estimate> {
    let cs = ConstraintSet::new(sel.grid().clone(), moments.to_vec(), Some((obs.clone(), sel.clone())))?;
    estimate_from_constraints(&cs, opts)
}

/// Benchmark: the population looks exactly like the sample.
pub fn pure_sample_estimate(obs: &ObservedHistogram) -> Marginal {
    obs.shape().clone()
}

/// Benchmark: maximum entropy under the moment constraints alone.
pub fn pure_prior_estimate(grid: &Grid, moments: &[MomentConstraint]) -> Result<Marginal> {
    if moments.is_empty() {
        return Ok(marginalize(&BinnedJoint::uniform(grid.clone())));
    }
    let cs = ConstraintSet::moments_only(grid.clone(), moments.to_vec())?;
    Ok(estimate_from_constraints(&cs, &SolverOptions::default())?.marginal)
}

/// Entropy of the joint plus the multiplier-weighted constraint residuals.
/// Equals the dual objective at any multipliers, up to rounding.
pub fn primal_lagrangian(state: &DualState, cs: &ConstraintSet) -> Result<f64> {
    let joint = reconstruct_primal(state, cs)?;
    let mut value = entropy_of(joint.mass());
    for (l, m) in state.lambda_f.iter().zip(&cs.moments) {
        value += l * (m.evaluate(&joint) - m.target);
    }
    if let Some((o, sel)) = &cs.observation {
        for ((l, (p, s)), r) in state
            .lambda_obs
            .iter()
            .zip(joint.rows().zip(sel.rows()))
            .zip(o.observed_mass())
        {
            value += l * (p.iter().zip(s).map(|(p, s)| p * s).sum::<f64>() - r);
        }
    }
    Ok(value)
}
