//! Discrete distributions over an (observed bin × selection category) grid.
//!
//! The observed variable is scalar and binned; the selection variable is a
//! single categorical axis. A [`BinnedJoint`] holds population mass over the
//! full grid, a [`Marginal`] holds mass over observed bins only, and a
//! [`SelectionFunction`] holds per-cell inclusion probabilities. Observing a
//! population through a selection function yields an [`ObservedHistogram`],
//! stored as a normalized shape plus the overall inclusion rate.
//!
//! Every stored distribution is normalized. Constructors accept sums that are
//! off by less than [`RENORMALIZE_TOLERANCE`] and rescale them; anything
//! further away is rejected.

use crate::error::{Error, Result};

/// Largest deviation of a total mass from 1 that constructors silently fix.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-9;

/// Absolute tolerance used when comparing two distributions.
pub const COMPARE_TOLERANCE: f64 = 1e-12;

/// Default number of observed bins.
pub const DEFAULT_BINS: usize = 100;

/// Fraction of the data range added on each side by [`Grid::padded`].
pub const DEFAULT_PADDING: f64 = 0.01;

/// Bin edges for the observed variable plus the number of selection categories.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    edges: Vec<f64>,
    categories: usize,
}

impl Grid {
    pub fn new(edges: Vec<f64>, categories: usize) -> Result<Self> {
        validate_edges(&edges)?;
        if categories == 0 {
            return Err(Error::InvalidGrid("need at least one selection category".into()));
        }
        Ok(Grid { edges, categories })
    }

    /// `bins` equal-width bins over `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, bins: usize, categories: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidGrid("need at least one bin".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidGrid(format!("bad range [{lo}, {hi}]")));
        }
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
        edges.push(hi);
        Grid::new(edges, categories)
    }

    /// Equal-width bins spanning `[min, max]` widened by [`DEFAULT_PADDING`] of
    /// the range on each side. A zero-width range is widened to unit width.
    pub fn padded(min: f64, max: f64, bins: usize, categories: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || min > max {
            return Err(Error::InvalidGrid(format!("bad data range [{min}, {max}]")));
        }
        let span = max - min;
        let pad = if span > 0.0 { span * DEFAULT_PADDING } else { 0.5 };
        Grid::uniform(min - pad, max + pad, bins, categories)
    }

    /// Padded grid over the range of `values` (non-finite values ignored).
    pub fn covering(values: &[f64], bins: usize, categories: usize) -> Result<Self> {
        let (min, max) = values
            .iter()
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if min > max {
            return Err(Error::EmptyInput);
        }
        Grid::padded(min, max, bins, categories)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn cells(&self) -> usize {
        self.bins() * self.categories
    }

    /// Row-major cell index.
    #[inline]
    pub fn cell(&self, bin: usize, category: usize) -> usize {
        bin * self.categories + category
    }

    pub fn midpoints(&self) -> Vec<f64> {
        midpoints(&self.edges)
    }

    /// Same observed bins with a different number of categories.
    pub fn with_categories(&self, categories: usize) -> Result<Self> {
        Grid::new(self.edges.clone(), categories)
    }

    pub fn bin_of(&self, x: f64) -> Option<usize> {
        bin_index(&self.edges, x)
    }
}

fn validate_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 {
        return Err(Error::InvalidGrid("need at least two edges".into()));
    }
    if edges.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidGrid("non-finite edge".into()));
    }
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid("edges must be strictly increasing".into()));
    }
    Ok(())
}

pub(crate) fn midpoints(edges: &[f64]) -> Vec<f64> {
    edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

/// Half-open bins `[lo, hi)`, except the last bin which includes its upper edge.
pub(crate) fn bin_index(edges: &[f64], x: f64) -> Option<usize> {
    let last = *edges.last()?;
    if !(x >= edges[0] && x <= last) {
        return None;
    }
    if x == last {
        return Some(edges.len() - 2);
    }
    Some(edges.partition_point(|&e| e <= x) - 1)
}

fn check_mass(mass: &mut [f64]) -> Result<()> {
    if let Some(bad) = mass.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
        return Err(Error::InvalidDistribution(format!(
            "mass entry {bad} is not a nonnegative finite number"
        )));
    }
    let total: f64 = mass.iter().sum();
    if (total - 1.0).abs() >= RENORMALIZE_TOLERANCE {
        return Err(Error::InvalidDistribution(format!("total mass {total} is not 1")));
    }
    // Rounding-level drift is left alone so CSV round trips stay exact.
    if (total - 1.0).abs() > 1e-14 {
        mass.iter_mut().for_each(|m| *m /= total);
    }
    Ok(())
}

fn normalize_weights(weights: &mut [f64]) -> Result<()> {
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidDistribution(
            "weights must be nonnegative and finite".into(),
        ));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidDistribution("weights sum to zero".into()));
    }
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(())
}

/// Anything that exposes a probability mass vector.
pub trait Pmf {
    fn pmf(&self) -> &[f64];
}

/// Distribution over observed bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    edges: Vec<f64>,
    mass: Vec<f64>,
}

impl Marginal {
    pub fn new(edges: Vec<f64>, mut mass: Vec<f64>) -> Result<Self> {
        validate_edges(&edges)?;
        if mass.len() + 1 != edges.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} mass entries for {} bins",
                mass.len(),
                edges.len() - 1
            )));
        }
        check_mass(&mut mass)?;
        Ok(Marginal { edges, mass })
    }

    /// Normalizes arbitrary nonnegative weights (e.g. counts).
    pub fn from_weights(edges: Vec<f64>, mut weights: Vec<f64>) -> Result<Self> {
        validate_edges(&edges)?;
        if weights.len() + 1 != edges.len() {
            return Err(Error::InvalidDistribution("weight count does not match bins".into()));
        }
        normalize_weights(&mut weights)?;
        Ok(Marginal { edges, mass: weights })
    }

    pub fn uniform(edges: Vec<f64>) -> Result<Self> {
        let n = edges.len().saturating_sub(1);
        Marginal::from_weights(edges, vec![1.0; n])
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn bins(&self) -> usize {
        self.mass.len()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        midpoints(&self.edges)
    }

    pub fn mean(&self) -> f64 {
        self.midpoints().iter().zip(&self.mass).map(|(x, m)| x * m).sum()
    }

    pub fn same_bins(&self, edges: &[f64]) -> bool {
        self.edges == edges
    }

    /// Max absolute per-bin difference.
    pub fn max_abs_diff(&self, other: &Marginal) -> f64 {
        self.mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Pmf for Marginal {
    fn pmf(&self) -> &[f64] {
        &self.mass
    }
}

/// Population mass over the full (bin × category) grid, row-major by bin.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedJoint {
    grid: Grid,
    mass: Vec<f64>,
}

impl BinnedJoint {
    pub fn new(grid: Grid, mut mass: Vec<f64>) -> Result<Self> {
        if mass.len() != grid.cells() {
            return Err(Error::InvalidDistribution(format!(
                "{} mass entries for {} cells",
                mass.len(),
                grid.cells()
            )));
        }
        check_mass(&mut mass)?;
        Ok(BinnedJoint { grid, mass })
    }

    pub fn from_weights(grid: Grid, mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.cells() {
            return Err(Error::InvalidDistribution("weight count does not match cells".into()));
        }
        normalize_weights(&mut weights)?;
        Ok(BinnedJoint { grid, mass: weights })
    }

    pub fn uniform(grid: Grid) -> Self {
        let n = grid.cells();
        BinnedJoint {
            grid,
            mass: vec![1.0 / n as f64; n],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    #[inline]
    pub fn at(&self, bin: usize, category: usize) -> f64 {
        self.mass[self.grid.cell(bin, category)]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.mass.chunks(self.grid.categories())
    }
}

impl Pmf for BinnedJoint {
    fn pmf(&self) -> &[f64] {
        &self.mass
    }
}

/// Per-cell inclusion probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionFunction {
    grid: Grid,
    prob: Vec<f64>,
}

impl SelectionFunction {
    pub fn new(grid: Grid, prob: Vec<f64>) -> Result<Self> {
        if prob.len() != grid.cells() {
            return Err(Error::InvalidDistribution(format!(
                "{} probabilities for {} cells",
                prob.len(),
                grid.cells()
            )));
        }
        if let Some(p) = prob.iter().find(|p| !(**p >= 0.0 && **p <= 1.0)) {
            return Err(Error::InvalidDistribution(format!(
                "inclusion probability {p} outside [0, 1]"
            )));
        }
        Ok(SelectionFunction { grid, prob })
    }

    pub fn constant(grid: Grid, p: f64) -> Result<Self> {
        let n = grid.cells();
        SelectionFunction::new(grid, vec![p; n])
    }

    /// Probability depends on the category only.
    pub fn per_category(grid: Grid, probs: &[f64]) -> Result<Self> {
        if probs.len() != grid.categories() {
            return Err(Error::InvalidDistribution(format!(
                "{} probabilities for {} categories",
                probs.len(),
                grid.categories()
            )));
        }
        let prob = (0..grid.bins()).flat_map(|_| probs.iter().copied()).collect();
        SelectionFunction::new(grid, prob)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn prob(&self) -> &[f64] {
        &self.prob
    }

    #[inline]
    pub fn at(&self, bin: usize, category: usize) -> f64 {
        self.prob[self.grid.cell(bin, category)]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.prob.chunks(self.grid.categories())
    }
}

/// Sample histogram shape plus the fraction of the population in the sample.
///
/// The observed mass in bin `i` is `inclusion_rate * shape[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedHistogram {
    shape: Marginal,
    inclusion_rate: f64,
}

impl ObservedHistogram {
    pub fn new(shape: Marginal, inclusion_rate: f64) -> Result<Self> {
        if !(inclusion_rate > 0.0 && inclusion_rate <= 1.0) {
            return Err(Error::InvalidDistribution(format!(
                "inclusion rate {inclusion_rate} outside (0, 1]"
            )));
        }
        Ok(ObservedHistogram { shape, inclusion_rate })
    }

    pub fn shape(&self) -> &Marginal {
        &self.shape
    }

    pub fn inclusion_rate(&self) -> f64 {
        self.inclusion_rate
    }

    /// Unnormalized observed mass per bin.
    pub fn observed_mass(&self) -> Vec<f64> {
        self.shape.mass().iter().map(|m| m * self.inclusion_rate).collect()
    }
}

pub fn marginalize(joint: &BinnedJoint) -> Marginal {
    let mass: Vec<f64> = joint.rows().map(|row| row.iter().sum()).collect();
    Marginal {
        edges: joint.grid().edges().to_vec(),
        mass,
    }
}

/// Pushes a population through the selection function.
pub fn forward_observe(joint: &BinnedJoint, sel: &SelectionFunction) -> Result<ObservedHistogram> {
    if joint.grid() != sel.grid() {
        return Err(Error::GridMismatch("joint and selection grids differ".into()));
    }
    let raw: Vec<f64> = joint
        .rows()
        .zip(sel.rows())
        .map(|(m, p)| m.iter().zip(p).map(|(m, p)| m * p).sum())
        .collect();
    let rate: f64 = raw.iter().sum();
    if rate <= 0.0 {
        return Err(Error::DegenerateSelection("no individual can be sampled".into()));
    }
    let shape = Marginal {
        edges: joint.grid().edges().to_vec(),
        mass: raw.iter().map(|r| r / rate).collect(),
    };
    Ok(ObservedHistogram {
        shape,
        inclusion_rate: rate.min(1.0),
    })
}

/// Shannon entropy in nats, with `0 log 0 = 0`.
pub fn entropy<D: Pmf + ?Sized>(dist: &D) -> f64 {
    entropy_of(dist.pmf())
}

pub(crate) fn entropy_of(mass: &[f64]) -> f64 {
    mass.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
}

/// Half the L1 distance: the fraction of mass placed in the wrong bin.
pub fn tv_error(estimate: &Marginal, truth: &Marginal) -> Result<f64> {
    if estimate.edges != truth.edges {
        return Err(Error::GridMismatch("estimate and truth use different bins".into()));
    }
    let l1: f64 = estimate.mass.iter().zip(&truth.mass).map(|(a, b)| (a - b).abs()).sum();
    Ok((0.5 * l1).min(1.0))
}

/// What to do with values outside the binning range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutOfRange {
    #[default]
    Discard,
    Clamp,
}

#[derive(Debug, Clone)]
pub struct BinnedSamples {
    pub histogram: Marginal,
    pub counts: Vec<u64>,
    /// Values that were clamped or discarded (NaN is always discarded).
    pub out_of_range: usize,
}

/// Empirical histogram of `values` over `edges`.
pub fn bin_samples(values: &[f64], edges: &[f64], policy: OutOfRange) -> Result<BinnedSamples> {
    validate_edges(edges)?;
    let bins = edges.len() - 1;
    let mut counts = vec![0u64; bins];
    let mut out_of_range = 0;
    for &v in values {
        match bin_index(edges, v) {
            Some(i) => counts[i] += 1,
            None => {
                out_of_range += 1;
                if policy == OutOfRange::Clamp && !v.is_nan() {
                    let i = if v < edges[0] { 0 } else { bins - 1 };
                    counts[i] += 1;
                }
            }
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    let mass = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok(BinnedSamples {
        histogram: Marginal {
            edges: edges.to_vec(),
            mass,
        },
        counts,
        out_of_range,
    })
}
