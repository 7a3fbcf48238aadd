//! Simulated population/sample pairs and the three-estimator benchmark.
//!
//! Each replica draws a Gaussian mixture population, thins it with a random
//! inclusion probability per mixture component, and estimates the population
//! histogram three ways: from the prior mean alone, from the sample alone, and
//! from both combined with the known inclusion probabilities. Errors are
//! measured against the binned realized population.

use rand::distributions::{Distribution, Uniform, WeightedIndex};
use rand::Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{
    bin_samples, tv_error, Grid, Marginal, ObservedHistogram, OutOfRange, SelectionFunction, DEFAULT_BINS,
};
use crate::error::{Error, Result};
use crate::report::{BenchmarkReport, Estimator, EstimatorOutcome, ReplicaRecord};
use crate::rng::sub_rng;
use crate::solver::{estimate_population, pure_prior_estimate, pure_sample_estimate, MomentConstraint};

/// Redraw cap for replicas whose sample comes out empty.
pub const MAX_ATTEMPTS: usize = 10;

const STREAM_POPULATION: u64 = 0;
const STREAM_SELECTION: u64 = 1;
const STREAM_SAMPLE: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixtureComponent {
    pub mean: f64,
    pub std: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureSpec {
    components: Vec<MixtureComponent>,
}

impl MixtureSpec {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("mixture needs at least one component".into()));
        }
        if components
            .iter()
            .any(|c| !(c.weight > 0.0 && c.std > 0.0 && c.mean.is_finite()))
        {
            return Err(Error::Config(
                "mixture weights and standard deviations must be positive".into(),
            ));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("mixture weights sum to {total}")));
        }
        Ok(MixtureSpec { components })
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    fn valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        Uniform::new_inclusive(self.lo, self.hi).sample(rng)
    }
}

impl std::str::FromStr for Range {
    type Err = Error;

    /// `lo,hi`
    fn from_str(s: &str) -> Result<Self> {
        let (lo, hi) = s
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("expected `lo,hi`, got `{s}`")))?;
        let p = |v: &str| v.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{v}: {e}")));
        Ok(Range::new(p(lo)?, p(hi)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaConfig {
    pub n_replicas: usize,
    pub population_size: usize,
    pub components: usize,
    pub mean_range: Range,
    pub std_range: Range,
    pub selection_range: Range,
    pub bins: usize,
    pub rng_seed: u64,
}

impl Default for ReplicaConfig {
    fn default() -> Self {
        ReplicaConfig {
            n_replicas: 2000,
            population_size: 10_000,
            components: 4,
            mean_range: Range::new(-5.0, 5.0),
            std_range: Range::new(0.0, 1.0),
            selection_range: Range::new(0.0, 1.0),
            bins: DEFAULT_BINS,
            rng_seed: 0,
        }
    }
}

impl ReplicaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_replicas == 0 || self.population_size == 0 || self.components == 0 || self.bins == 0 {
            return Err(Error::Config(
                "replicas, population size, components and bins must be positive".into(),
            ));
        }
        if !(self.mean_range.valid() && self.std_range.valid() && self.selection_range.valid()) {
            return Err(Error::Config("ranges must be finite with lo <= hi".into()));
        }
        if self.std_range.lo < 0.0 || self.std_range.hi <= 0.0 {
            return Err(Error::Config(
                "standard deviation range must allow positive values".into(),
            ));
        }
        if self.selection_range.lo < 0.0 || self.selection_range.hi > 1.0 {
            return Err(Error::Config("selection range must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Population {
    pub spec: MixtureSpec,
    pub individuals: Vec<f64>,
    /// Generating component of each individual (the selection category).
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub values: Vec<f64>,
    pub labels: Vec<usize>,
}

pub fn draw_population(cfg: &ReplicaConfig, replica: usize) -> Result<Population> {
    draw_population_attempt(cfg, replica, 0)
}

fn draw_population_attempt(cfg: &ReplicaConfig, replica: usize, attempt: usize) -> Result<Population> {
    cfg.validate()?;
    let mut rng = sub_rng(cfg.rng_seed, replica as u64, attempt as u64, STREAM_POPULATION);
    let weight = 1.0 / cfg.components as f64;
    let components = (0..cfg.components)
        .map(|_| {
            let mean = cfg.mean_range.sample(&mut rng);
            let mut std = cfg.std_range.sample(&mut rng);
            while std <= 0.0 {
                std = cfg.std_range.sample(&mut rng);
            }
            MixtureComponent { mean, std, weight }
        })
        .collect();
    let spec = MixtureSpec::new(components)?;
    let picker =
        WeightedIndex::new(spec.components.iter().map(|c| c.weight)).map_err(|e| Error::Config(e.to_string()))?;
    let normals: Vec<Normal<f64>> = spec
        .components
        .iter()
        .map(|c| Normal::new(c.mean, c.std).map_err(|e| Error::Config(e.to_string())))
        .collect::<Result<_>>()?;
    let mut individuals = Vec::with_capacity(cfg.population_size);
    let mut labels = Vec::with_capacity(cfg.population_size);
    for _ in 0..cfg.population_size {
        let k = picker.sample(&mut rng);
        labels.push(k);
        individuals.push(normals[k].sample(&mut rng));
    }
    Ok(Population {
        spec,
        individuals,
        labels,
    })
}

/// Per-category inclusion probabilities for a replica attempt.
pub fn draw_selection(cfg: &ReplicaConfig, replica: usize, attempt: usize) -> Vec<f64> {
    let mut rng = sub_rng(cfg.rng_seed, replica as u64, attempt as u64, STREAM_SELECTION);
    (0..cfg.components)
        .map(|_| cfg.selection_range.sample(&mut rng))
        .collect()
}

/// Independent Bernoulli thinning with the probability of each individual's category.
pub fn draw_sample<R: Rng>(individuals: &[f64], labels: &[usize], probs: &[f64], rng: &mut R) -> Result<Sample> {
    if individuals.len() != labels.len() {
        return Err(Error::Config("individuals and labels differ in length".into()));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Config("selection probabilities must lie in [0, 1]".into()));
    }
    let mut values = Vec::new();
    let mut kept = Vec::new();
    for (&x, &k) in individuals.iter().zip(labels) {
        let p = *probs
            .get(k)
            .ok_or_else(|| Error::Config(format!("no selection probability for category {k}")))?;
        if rng.gen::<f64>() < p {
            values.push(x);
            kept.push(k);
        }
    }
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(Sample { values, labels: kept })
}

/// Everything an estimator sees for one replica, plus the ground truth.
#[derive(Debug, Clone)]
pub struct Instance {
    pub population: Population,
    pub selection_probs: Vec<f64>,
    pub sample: Sample,
    pub grid: Grid,
    pub truth: Marginal,
    pub observed: ObservedHistogram,
    pub selection: SelectionFunction,
    /// Mean of the binned population, standing in for an independent survey.
    pub prior_mean: f64,
    pub redraws: usize,
}

impl Instance {
    pub fn moments(&self) -> Result<Vec<MomentConstraint>> {
        Ok(vec![MomentConstraint::mean(&self.grid, self.prior_mean)?])
    }
}

/// Builds replica `replica`, redrawing (up to [`MAX_ATTEMPTS`]) when the sample is empty.
pub fn build_instance(cfg: &ReplicaConfig, replica: usize) -> Result<Instance> {
    cfg.validate()?;
    for attempt in 0..MAX_ATTEMPTS {
        let population = draw_population_attempt(cfg, replica, attempt)?;
        let probs = draw_selection(cfg, replica, attempt);
        let mut rng = sub_rng(cfg.rng_seed, replica as u64, attempt as u64, STREAM_SAMPLE);
        let sample = match draw_sample(&population.individuals, &population.labels, &probs, &mut rng) {
            Ok(s) => s,
            Err(Error::EmptySample) => continue,
            Err(e) => return Err(e),
        };
        let grid = Grid::covering(&population.individuals, cfg.bins, cfg.components)?;
        let truth = bin_samples(&population.individuals, grid.edges(), OutOfRange::Discard)?.histogram;
        let shape = bin_samples(&sample.values, grid.edges(), OutOfRange::Discard)?.histogram;
        let rate = sample.values.len() as f64 / population.individuals.len() as f64;
        let observed = ObservedHistogram::new(shape, rate)?;
        let selection = SelectionFunction::per_category(grid.clone(), &probs)?;
        let prior_mean = truth.mean();
        return Ok(Instance {
            population,
            selection_probs: probs,
            sample,
            grid,
            truth,
            observed,
            selection,
            prior_mean,
            redraws: attempt,
        });
    }
    Err(Error::EmptySample)
}

fn failed(estimator: Estimator, e: &Error) -> EstimatorOutcome {
    EstimatorOutcome {
        estimator,
        error: None,
        converged: false,
        max_residual: None,
        failure: Some(e.to_string()),
    }
}

pub const SIM_ESTIMATORS: [Estimator; 3] = [Estimator::PurePrior, Estimator::PureSample, Estimator::PriorSample];

/// Runs the three estimators on one replica. Solver failures are recorded,
/// not propagated.
pub fn run_replica(cfg: &ReplicaConfig, replica: usize) -> ReplicaRecord {
    let inst = match build_instance(cfg, replica) {
        Ok(i) => i,
        Err(e) => {
            return ReplicaRecord {
                replica,
                redraws: MAX_ATTEMPTS,
                outcomes: SIM_ESTIMATORS.iter().map(|&est| failed(est, &e)).collect(),
            }
        }
    };
    let outcomes = evaluate_estimators(
        &inst.grid,
        &inst.truth,
        &inst.observed,
        &inst.selection,
        inst.prior_mean,
        &SIM_ESTIMATORS,
    );
    ReplicaRecord {
        replica,
        redraws: inst.redraws,
        outcomes,
    }
}

/// Errors of the requested estimators against `truth`, using a mean-only prior.
pub fn evaluate_estimators(
    grid: &Grid,
    truth: &Marginal,
    observed: &ObservedHistogram,
    selection: &SelectionFunction,
    prior_mean: f64,
    estimators: &[Estimator],
) -> Vec<EstimatorOutcome> {
    let moments = match MomentConstraint::mean(grid, prior_mean) {
        Ok(m) => vec![m],
        Err(e) => return estimators.iter().map(|&est| failed(est, &e)).collect(),
    };
    estimators
        .iter()
        .map(|&est| {
            let result = match est {
                Estimator::PureSample => tv_error(&pure_sample_estimate(observed), truth).map(|e| (e, None)),
                Estimator::PurePrior => {
                    let flat = grid
                        .with_categories(1)
                        .and_then(|g| Ok((MomentConstraint::mean(&g, prior_mean)?, g)));
                    flat.and_then(|(m, g)| pure_prior_estimate(&g, &[m]))
                        .and_then(|m| tv_error(&m, truth))
                        .map(|e| (e, None))
                }
                Estimator::PriorSample => estimate_population(observed, selection, &moments)
                    .and_then(|est| Ok((tv_error(&est.marginal, truth)?, Some(est.max_residual())))),
            };
            match result {
                Ok((error, max_residual)) => EstimatorOutcome {
                    estimator: est,
                    error: Some(error),
                    converged: true,
                    max_residual,
                    failure: None,
                },
                Err(e) => failed(est, &e),
            }
        })
        .collect()
}

/// All replicas, in parallel on the current rayon pool, aggregated by index.
pub fn run_benchmark(cfg: &ReplicaConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let records: Vec<ReplicaRecord> = (0..cfg.n_replicas)
        .into_par_iter()
        .map(|i| run_replica(cfg, i))
        .collect();
    BenchmarkReport::from_records(SIM_ESTIMATORS.to_vec(), records)
}

/// Censored-selection demo: a sentiment-like population on `[-1, 1]` of
/// which only the part below `threshold` is ever sampled.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensoredDemoConfig {
    pub population_size: usize,
    pub mean: f64,
    pub std: f64,
    pub threshold: f64,
    pub bins: usize,
    pub rng_seed: u64,
}

impl Default for CensoredDemoConfig {
    fn default() -> Self {
        CensoredDemoConfig {
            population_size: 10_000,
            mean: 0.05,
            std: 0.35,
            threshold: 0.0,
            bins: DEFAULT_BINS,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CensoredDemo {
    pub grid: Grid,
    pub truth: Marginal,
    pub observable: Vec<bool>,
    /// Sample histogram: the population restricted to observable bins.
    pub sample: Marginal,
    pub population_mean: f64,
    pub population_std: f64,
    /// True population mass in the observable bins.
    pub true_weight: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CensoredDemoErrors {
    pub pure_sample: f64,
    pub mean_only: f64,
    pub mean_std: f64,
    pub weight_mean_only: f64,
    pub weight_mean_std: f64,
    pub true_weight: f64,
}

/// Normal population clamped to `[-1, 1]`, binned on the score grid.
pub fn censored_demo(cfg: &CensoredDemoConfig) -> Result<CensoredDemo> {
    if cfg.population_size == 0 || cfg.bins == 0 || cfg.std.is_nan() || cfg.std <= 0.0 || !cfg.mean.is_finite() {
        return Err(Error::Config(
            "censored demo needs a positive size, bins and std".into(),
        ));
    }
    let normal = Normal::new(cfg.mean, cfg.std).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = sub_rng(cfg.rng_seed, 0, 0, STREAM_POPULATION);
    let values: Vec<f64> = (0..cfg.population_size)
        .map(|_| normal.sample(&mut rng).clamp(-1.0, 1.0))
        .collect();
    let n = values.len() as f64;
    let population_mean = values.iter().sum::<f64>() / n;
    let population_std = (values.iter().map(|v| (v - population_mean).powi(2)).sum::<f64>() / n).sqrt();
    let grid = Grid::padded(-1.0, 1.0, cfg.bins, 1)?;
    let truth = bin_samples(&values, grid.edges(), OutOfRange::Clamp)?.histogram;
    let observable = crate::solver::threshold_mask(grid.edges(), cfg.threshold, true);
    let kept: Vec<f64> = truth
        .mass()
        .iter()
        .zip(&observable)
        .map(|(&m, &o)| if o { m } else { 0.0 })
        .collect();
    let true_weight: f64 = kept.iter().sum();
    if true_weight == 0.0 {
        return Err(Error::EmptySample);
    }
    let sample = Marginal::from_weights(grid.edges().to_vec(), kept)?;
    Ok(CensoredDemo {
        grid,
        truth,
        observable,
        sample,
        population_mean,
        population_std,
        true_weight,
    })
}

impl CensoredDemo {
    /// Estimates with the mean, then the mean and std, of the population.
    pub fn estimates(&self) -> Result<(crate::solver::CensoredEstimate, crate::solver::CensoredEstimate)> {
        let mean_only = vec![MomentConstraint::mean(&self.grid, self.population_mean)?];
        let mean_std = MomentConstraint::mean_std(&self.grid, self.population_mean, Some(self.population_std))?;
        Ok((
            crate::solver::censored_estimate(&self.sample, &self.observable, &mean_only)?,
            crate::solver::censored_estimate(&self.sample, &self.observable, &mean_std)?,
        ))
    }

    pub fn errors(&self) -> Result<CensoredDemoErrors> {
        let (a, b) = self.estimates()?;
        Ok(CensoredDemoErrors {
            pure_sample: tv_error(&self.sample, &self.truth)?,
            mean_only: tv_error(&a.estimate.marginal, &self.truth)?,
            mean_std: tv_error(&b.estimate.marginal, &self.truth)?,
            weight_mean_only: a.sample_weight,
            weight_mean_std: b.sample_weight,
            true_weight: self.true_weight,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;

    fn small(seed: u64) -> ReplicaConfig {
        ReplicaConfig {
            n_replicas: 4,
            population_size: 2000,
            rng_seed: seed,
            ..ReplicaConfig::default()
        }
    }

    #[test]
    fn population_is_deterministic() {
        let a = draw_population(&small(3), 2).unwrap();
        let b = draw_population(&small(3), 2).unwrap();
        assert_eq!(a.individuals, b.individuals);
        assert_eq!(a.labels, b.labels);
        let c = draw_population(&small(3), 3).unwrap();
        assert_ne!(a.individuals, c.individuals);
    }

    #[test]
    fn degenerate_mixture_collapses_on_mean() {
        let cfg = ReplicaConfig {
            components: 1,
            std_range: Range::new(1e-9, 1e-9),
            ..small(1)
        };
        let p = draw_population(&cfg, 0).unwrap();
        let mu = p.spec.components()[0].mean;
        assert!(p.individuals.iter().all(|x| (x - mu).abs() < 1e-7));
    }

    #[test]
    fn component_means_follow_law_of_large_numbers() {
        let cfg = ReplicaConfig {
            population_size: 100_000,
            rng_seed: 21,
            ..ReplicaConfig::default()
        };
        let p = draw_population(&cfg, 0).unwrap();
        for (k, c) in p.spec.components().iter().enumerate() {
            let xs: Vec<f64> = p
                .individuals
                .iter()
                .zip(&p.labels)
                .filter(|(_, l)| **l == k)
                .map(|(x, _)| *x)
                .collect();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            assert!(
                (m - c.mean).abs() <= 4.0 * c.std / (xs.len() as f64).sqrt(),
                "component {k}"
            );
        }
    }

    #[test]
    fn thinning_edge_cases() {
        let xs = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let labels = [0, 1, 0, 1, 0, 1];
        let mut rng = replica_rng(0, 0, 0);
        let all = draw_sample(&xs, &labels, &[1.0, 1.0], &mut rng).unwrap();
        assert_eq!(all.values, xs.to_vec());
        assert!(matches!(
            draw_sample(&xs, &labels, &[0.0, 0.0], &mut rng),
            Err(Error::EmptySample)
        ));
        let only0 = draw_sample(&xs, &labels, &[1.0, 0.0], &mut rng).unwrap();
        assert!(only0.labels.iter().all(|&l| l == 0));
        assert_eq!(only0.values, vec![0.1, 0.3, 0.5]);
    }

    #[test]
    fn config_validation() {
        assert!(ReplicaConfig {
            n_replicas: 0,
            ..small(0)
        }
        .validate()
        .is_err());
        assert!(ReplicaConfig {
            selection_range: Range::new(0.0, 1.5),
            ..small(0)
        }
        .validate()
        .is_err());
        assert!(ReplicaConfig {
            std_range: Range::new(0.0, 0.0),
            ..small(0)
        }
        .validate()
        .is_err());
        assert_eq!("-5, 5".parse::<Range>().unwrap(), Range::new(-5.0, 5.0));
    }

    #[test]
    fn replica_records_converge_with_small_residuals() {
        let cfg = small(9);
        for i in 0..cfg.n_replicas {
            let r = run_replica(&cfg, i);
            for o in &r.outcomes {
                assert!(o.converged, "replica {i} {:?}: {:?}", o.estimator, o.failure);
                let e = o.error.unwrap();
                assert!((0.0..=1.0).contains(&e));
            }
        }
    }
}
