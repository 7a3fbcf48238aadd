//! Brute-force reference solvers and instance generators shared by the
//! integration and acceptance tests. Nothing here goes through the library's
//! dual solver.

#![allow(dead_code)]

use maxent_fusion::{BinnedJoint, Grid, MomentConstraint, ObservedHistogram, SelectionFunction};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tv(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn entropy(p: &DVector<f64>) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// Orthonormal basis of `{x : A x = 0}`, one column per direction.
pub fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    let mut padded = DMatrix::zeros(a.nrows().max(n), n);
    padded.rows_mut(0, a.nrows()).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max().max(1.0);
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= 1e-11 * smax)
        .map(|(j, _)| v_t.row(j).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Maximizes `−Σ p log p` over `{p > 0 : A p = A start}` by projected gradient
/// ascent with Barzilai–Borwein steps. `start` must be strictly positive.
pub fn max_entropy_from(a: &DMatrix<f64>, start: &DVector<f64>) -> DVector<f64> {
    let basis = null_space(a);
    let mut p = start.clone();
    if basis.ncols() == 0 {
        return p;
    }
    let grad = |p: &DVector<f64>| -> DVector<f64> { basis.transpose() * p.map(|v| -v.ln() - 1.0) };
    let mut g = grad(&p);
    let mut h = entropy(&p);
    let mut step: f64 = 1e-2;
    for _ in 0..200_000 {
        if g.norm() < 1e-13 {
            break;
        }
        let d = &basis * &g;
        let mut t = step;
        for i in 0..p.len() {
            if d[i] < 0.0 {
                t = t.min(0.5 * -p[i] / d[i]);
            }
        }
        let (mut p_new, mut h_new);
        loop {
            p_new = &p + t * &d;
            h_new = entropy(&p_new);
            if h_new >= h - 1e-15 || t < 1e-30 {
                break;
            }
            t *= 0.5;
        }
        let g_new = grad(&p_new);
        let s = t * &g;
        let y = &g_new - &g;
        let sy = -s.dot(&y);
        step = if sy > 0.0 { s.dot(&s) / sy } else { 2.0 * t };
        p = p_new;
        h = h_new;
        g = g_new;
    }
    p
}

/// Small instance: grid, a strictly positive true joint, a selection
/// function, and moments whose targets the true joint meets.
pub struct Instance {
    pub grid: Grid,
    pub truth: Vec<f64>,
    pub selection: SelectionFunction,
    pub observed: ObservedHistogram,
    pub moments: Vec<MomentConstraint>,
    /// Moment feature per cell, in the same order as `moments`.
    pub features: Vec<Vec<f64>>,
}

pub fn instance(bins: usize, cats: usize, n_moments: usize, seed: u64) -> Instance {
    let mut r = rng(seed);
    let grid = Grid::uniform(-1.0, 1.0, bins, cats).unwrap();
    let n = bins * cats;
    let w: Vec<f64> = (0..n).map(|_| r.gen_range(0.1..1.0)).collect();
    let total: f64 = w.iter().sum();
    let truth: Vec<f64> = w.iter().map(|v| v / total).collect();
    let prob: Vec<f64> = (0..n).map(|_| r.gen_range(0.1..1.0)).collect();
    let selection = SelectionFunction::new(grid.clone(), prob.clone()).unwrap();

    let obs_mass: Vec<f64> = (0..bins)
        .map(|i| (0..cats).map(|s| truth[i * cats + s] * prob[i * cats + s]).sum())
        .collect();
    let rate: f64 = obs_mass.iter().sum();
    let shape = maxent_fusion::Marginal::from_weights(grid.edges().to_vec(), obs_mass).unwrap();
    let observed = ObservedHistogram::new(shape, rate).unwrap();

    let mids: Vec<f64> = (0..bins).map(|i| -1.0 + (2.0 * i as f64 + 1.0) / bins as f64).collect();
    let mut features = Vec::new();
    for k in 0..n_moments {
        let f: Vec<f64> = if k == 0 {
            (0..n).map(|c| mids[c / cats]).collect()
        } else {
            (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
        };
        features.push(f);
    }
    let moments = features
        .iter()
        .map(|f| {
            let target = f.iter().zip(&truth).map(|(a, b)| a * b).sum();
            MomentConstraint::new(grid.clone(), f.clone(), target).unwrap()
        })
        .collect();
    Instance {
        grid,
        truth,
        selection,
        observed,
        moments,
        features,
    }
}

impl Instance {
    /// Constraint rows: total mass, each moment, each observed bin.
    fn constraint_matrix(&self) -> DMatrix<f64> {
        let (bins, cats) = (self.grid.bins(), self.grid.categories());
        let n = bins * cats;
        let rows = 1 + self.features.len() + bins;
        let mut a = DMatrix::zeros(rows, n);
        for c in 0..n {
            a[(0, c)] = 1.0;
        }
        for (k, f) in self.features.iter().enumerate() {
            for c in 0..n {
                a[(1 + k, c)] = f[c];
            }
        }
        for i in 0..bins {
            for s in 0..cats {
                a[(1 + self.features.len() + i, i * cats + s)] = self.selection.prob()[i * cats + s];
            }
        }
        a
    }

    /// Oracle joint, cells in bin-major order.
    pub fn oracle_joint(&self) -> Vec<f64> {
        let start = DVector::from_vec(self.truth.clone());
        max_entropy_from(&self.constraint_matrix(), &start)
            .iter()
            .copied()
            .collect()
    }

    pub fn oracle_marginal(&self) -> Vec<f64> {
        let cats = self.grid.categories();
        self.oracle_joint().chunks(cats).map(|r| r.iter().sum()).collect()
    }
}

pub fn joint_values(j: &BinnedJoint) -> Vec<f64> {
    j.mass().to_vec()
}

/// Censored instance on a one-category grid: the top `censored` bins are
/// never sampled. Moments are the mean and, if `n_moments == 2`, the second
/// moment of the true distribution.
pub struct CensoredInstance {
    pub grid: Grid,
    pub truth: Vec<f64>,
    pub shape: maxent_fusion::Marginal,
    pub observable: Vec<bool>,
    pub moments: Vec<MomentConstraint>,
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

pub fn censored_instance(bins: usize, censored: usize, n_moments: usize, seed: u64) -> CensoredInstance {
    assert!(censored >= 1 && censored < bins && (1..=2).contains(&n_moments));
    let mut r = rng(seed);
    let grid = Grid::uniform(-1.0, 1.0, bins, 1).unwrap();
    let w: Vec<f64> = (0..bins).map(|_| r.gen_range(0.1..1.0)).collect();
    let total: f64 = w.iter().sum();
    let truth: Vec<f64> = w.iter().map(|v| v / total).collect();
    let observable: Vec<bool> = (0..bins).map(|i| i < bins - censored).collect();
    let kept: Vec<f64> = truth
        .iter()
        .zip(&observable)
        .map(|(t, &o)| if o { *t } else { 0.0 })
        .collect();
    let shape = maxent_fusion::Marginal::from_weights(grid.edges().to_vec(), kept).unwrap();
    let mids: Vec<f64> = (0..bins).map(|i| -1.0 + (2.0 * i as f64 + 1.0) / bins as f64).collect();
    let features: Vec<Vec<f64>> = (1..=n_moments as i32)
        .map(|k| mids.iter().map(|x| x.powi(k)).collect())
        .collect();
    let targets: Vec<f64> = features
        .iter()
        .map(|f| f.iter().zip(&truth).map(|(a, b)| a * b).sum())
        .collect();
    let moments = features
        .iter()
        .zip(&targets)
        .map(|(f, &t)| MomentConstraint::new(grid.clone(), f.clone(), t).unwrap())
        .collect();
    CensoredInstance {
        grid,
        truth,
        shape,
        observable,
        moments,
        features,
        targets,
    }
}

/// Point of `{q ≥ 0 : A q = b}` with all entries positive, by alternating
/// projections; `None` when none is found.
fn interior_point(a: &DMatrix<f64>, b: &DVector<f64>, start: DVector<f64>) -> Option<DVector<f64>> {
    let pinv = a.clone().pseudo_inverse(1e-13).ok()?;
    let project = |q: &DVector<f64>| q - &pinv * (a * q - b);
    let floor = 1e-3 * start.max();
    let mut q = project(&start);
    for _ in 0..5000 {
        if q.min() > 0.0 {
            break;
        }
        q = project(&q.map(|v| v.max(floor)));
    }
    ((a * &q - b).amax() < 1e-12 && q.min() > 0.0).then_some(q)
}

impl CensoredInstance {
    /// Best entropy of the censored part given the observable weight `w`, and
    /// the full distribution achieving it.
    fn inner(&self, w: f64) -> Option<(f64, Vec<f64>)> {
        let idx: Vec<usize> = (0..self.truth.len()).filter(|&i| !self.observable[i]).collect();
        let m = idx.len();
        let mut a = DMatrix::zeros(1 + self.features.len(), m);
        let mut b = DVector::zeros(1 + self.features.len());
        for j in 0..m {
            a[(0, j)] = 1.0;
        }
        b[0] = 1.0 - w;
        for (k, f) in self.features.iter().enumerate() {
            let seen: f64 = (0..self.truth.len())
                .filter(|&i| self.observable[i])
                .map(|i| w * self.shape.mass()[i] * f[i])
                .sum();
            for (j, &i) in idx.iter().enumerate() {
                a[(1 + k, j)] = f[i];
            }
            b[1 + k] = self.targets[k] - seen;
        }
        let q0 = interior_point(&a, &b, DVector::from_element(m, (1.0 - w) / m as f64))?;
        let q = max_entropy_from(&a, &q0);
        let mut full = vec![0.0; self.truth.len()];
        for i in 0..self.truth.len() {
            if self.observable[i] {
                full[i] = w * self.shape.mass()[i];
            }
        }
        for (j, &i) in idx.iter().enumerate() {
            full[i] = q[j];
        }
        let h = -full.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>();
        Some((h, full))
    }

    /// Grid search over the observable weight, refined by golden section.
    pub fn oracle(&self) -> (Vec<f64>, f64) {
        const GRID: usize = 400;
        let f = |w: f64| self.inner(w).map(|x| x.0).unwrap_or(f64::NEG_INFINITY);
        let values: Vec<f64> = (1..GRID).map(|k| f(k as f64 / GRID as f64)).collect();
        let best = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k + 1)
            .unwrap();
        assert!(values[best - 1].is_finite(), "no feasible weight on the grid");
        let (mut lo, mut hi) = ((best - 1) as f64 / GRID as f64, (best + 1) as f64 / GRID as f64);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut x1, mut x2) = (hi - phi * (hi - lo), lo + phi * (hi - lo));
        let (mut f1, mut f2) = (f(x1), f(x2));
        while hi - lo > 1e-11 {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = f(x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = f(x1);
            }
        }
        let w = 0.5 * (lo + hi);
        (self.inner(w).expect("feasible at the optimum").1, w)
    }
}

/// Reachable interval of the grid mean given the observed masses, when every
/// row's total mass may lie anywhere in `[ρ_o / max ρ_s, ρ_o / min ρ_s]` and
/// all rows sum to one. Returns `None` when the row bounds cannot sum to one.
pub fn reachable_mean(mids: &[f64], obs_mass: &[f64], sel_lo: f64, sel_hi: f64) -> Option<(f64, f64)> {
    let lo: Vec<f64> = obs_mass.iter().map(|o| o / sel_hi).collect();
    let hi: Vec<f64> = obs_mass.iter().map(|o| o / sel_lo).collect();
    let base: f64 = lo.iter().sum();
    if base > 1.0 || hi.iter().sum::<f64>() < 1.0 {
        return None;
    }
    let fill = |order: Vec<usize>| {
        let mut m = lo.clone();
        let mut left = 1.0 - base;
        for i in order {
            let add = (hi[i] - lo[i]).min(left);
            m[i] += add;
            left -= add;
        }
        m.iter().zip(mids).map(|(m, x)| m * x).sum::<f64>()
    };
    let n = mids.len();
    Some((fill((0..n).collect()), fill((0..n).rev().collect())))
}
