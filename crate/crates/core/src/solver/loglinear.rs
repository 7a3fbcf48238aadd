//! Log-linear maximum-entropy engine.
//!
//! Atoms `a` carry a log base weight `b_a`, a dense feature row `f_a` of width
//! `K`, and at most one sparse feature `(j, v)` addressing variable `K + j`.
//! For multipliers `λ` the model is `p_a ∝ exp(b_a + λ·g_a)` and the dual
//!
//! ```text
//! D(λ) = log Σ_a exp(b_a + λ·g_a) − λ·t
//! ```
//!
//! is smooth and convex, with gradient `E_p[g] − t` and Hessian `Cov_p[g]`.
//! Minimizing `D` yields the entropy maximizer (relative to the base weights)
//! subject to `E_p[g] = t`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Newton iteration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Convergence threshold on the max-norm of the dual gradient.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Multiplier norm beyond which the problem is declared infeasible.
    pub divergence_norm: f64,
    /// Relative ridge added to every Hessian solve, scaled by `1 + ‖H‖`.
    pub ridge: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-9,
            max_iterations: 500,
            divergence_norm: 1e6,
            ridge: 1e-10,
        }
    }
}

const NO_SPARSE: usize = usize::MAX;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone)]
pub(crate) struct LogLinear {
    n_dense: usize,
    n_vars: usize,
    log_base: Vec<f64>,
    dense: Vec<f64>,
    sparse_var: Vec<usize>,
    sparse_val: Vec<f64>,
    target: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Evaluation {
    pub value: f64,
    pub probs: Vec<f64>,
    pub gradient: Vec<f64>,
}

impl Evaluation {
    pub fn max_gradient(&self) -> f64 {
        max_abs(&self.gradient)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub lambda: Vec<f64>,
    pub eval: Evaluation,
    pub iterations: usize,
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl LogLinear {
    /// `n_dense` dense features followed by `n_sparse` sparse-only variables.
    pub fn new(n_dense: usize, n_sparse: usize, target: Vec<f64>) -> Self {
        debug_assert_eq!(target.len(), n_dense + n_sparse);
        LogLinear {
            n_dense,
            n_vars: n_dense + n_sparse,
            log_base: Vec::new(),
            dense: Vec::new(),
            sparse_var: Vec::new(),
            sparse_val: Vec::new(),
            target,
        }
    }

    /// Adds an atom; `sparse` is `(index among sparse variables, value)`.
    pub fn push(&mut self, log_base: f64, dense: &[f64], sparse: Option<(usize, f64)>) {
        debug_assert_eq!(dense.len(), self.n_dense);
        self.log_base.push(log_base);
        self.dense.extend_from_slice(dense);
        match sparse {
            Some((j, v)) if v != 0.0 => {
                self.sparse_var.push(self.n_dense + j);
                self.sparse_val.push(v);
            }
            _ => {
                self.sparse_var.push(NO_SPARSE);
                self.sparse_val.push(0.0);
            }
        }
    }

    pub fn atoms(&self) -> usize {
        self.log_base.len()
    }

    fn dense_row(&self, a: usize) -> &[f64] {
        &self.dense[a * self.n_dense..(a + 1) * self.n_dense]
    }

    fn exponent(&self, a: usize, lambda: &[f64]) -> f64 {
        let mut e = self.log_base[a];
        for (f, l) in self.dense_row(a).iter().zip(lambda) {
            e += f * l;
        }
        let j = self.sparse_var[a];
        if j != NO_SPARSE {
            e += self.sparse_val[a] * lambda[j];
        }
        e
    }

    /// Dual value, atom probabilities and gradient at `lambda`.
    pub fn evaluate(&self, lambda: &[f64]) -> Evaluation {
        let exps: Vec<f64> = (0..self.atoms()).map(|a| self.exponent(a, lambda)).collect();
        let shift = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = exps.iter().map(|e| (e - shift).exp()).collect();
        let z: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= z);
        let log_z = shift + z.ln();

        let mut gradient = self.expectation(&probs);
        for (g, t) in gradient.iter_mut().zip(&self.target) {
            *g -= t;
        }
        let value = log_z - lambda.iter().zip(&self.target).map(|(l, t)| l * t).sum::<f64>();
        Evaluation { value, probs, gradient }
    }

    pub fn expectation(&self, probs: &[f64]) -> Vec<f64> {
        let mut mean = vec![0.0; self.n_vars];
        for (a, &p) in probs.iter().enumerate() {
            for (m, f) in mean.iter_mut().zip(self.dense_row(a)) {
                *m += p * f;
            }
            let j = self.sparse_var[a];
            if j != NO_SPARSE {
                mean[j] += p * self.sparse_val[a];
            }
        }
        mean
    }

    /// Feature covariance under `probs`. Dense features are centered before
    /// accumulation; sparse features lie in a bounded range and are not.
    pub fn hessian(&self, probs: &[f64]) -> DMatrix<f64> {
        let k = self.n_dense;
        let mean = self.expectation(probs);
        let mut h = DMatrix::<f64>::zeros(self.n_vars, self.n_vars);
        let mut centered = vec![0.0; k];
        for (a, &p) in probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for ((c, f), m) in centered.iter_mut().zip(self.dense_row(a)).zip(&mean) {
                *c = f - m;
            }
            for r in 0..k {
                let pr = p * centered[r];
                for c in 0..=r {
                    h[(r, c)] += pr * centered[c];
                }
            }
            let j = self.sparse_var[a];
            if j != NO_SPARSE {
                let v = self.sparse_val[a];
                for r in 0..k {
                    h[(j, r)] += p * centered[r] * v;
                }
                h[(j, j)] += p * v * v;
            }
        }
        for j in k..self.n_vars {
            for i in k..=j {
                h[(j, i)] -= mean[j] * mean[i];
            }
        }
        h.fill_upper_triangle_with_lower_triangle();
        h
    }

    fn newton_direction(&self, probs: &[f64], gradient: &[f64], ridge: f64) -> Vec<f64> {
        let h = self.hessian(probs);
        let scale = 1.0 + h.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let rhs = -DVector::from_column_slice(gradient);
        let mut mu = ridge * scale;
        loop {
            let mut hr = h.clone();
            for i in 0..self.n_vars {
                hr[(i, i)] += mu;
            }
            if let Some(chol) = hr.cholesky() {
                let d = chol.solve(&rhs);
                if d.iter().all(|x| x.is_finite()) {
                    return d.as_slice().to_vec();
                }
            }
            mu *= 100.0;
            if mu > scale * 1e6 {
                // Hessian unusable; fall back to steepest descent.
                return rhs.as_slice().to_vec();
            }
        }
    }

    /// Damped Newton with backtracking line search on the dual.
    pub fn solve(&self, init: Vec<f64>, opts: &SolverOptions) -> Result<Solution> {
        debug_assert_eq!(init.len(), self.n_vars);
        let mut lambda = init;
        let mut eval = self.evaluate(&lambda);
        let mut iterations = 0;
        loop {
            let max_grad = eval.max_gradient();
            if max_grad <= opts.tolerance {
                return Ok(Solution {
                    lambda,
                    eval,
                    iterations,
                });
            }
            let lambda_norm = norm(&lambda);
            if lambda_norm > opts.divergence_norm || !eval.value.is_finite() {
                return Err(Error::Infeasible {
                    iterations,
                    lambda_norm,
                    max_gradient: max_grad,
                });
            }
            if iterations >= opts.max_iterations {
                return Err(Error::NotConverged {
                    iterations,
                    max_gradient: max_grad,
                });
            }
            iterations += 1;

            let direction = self.newton_direction(&eval.probs, &eval.gradient, opts.ridge);
            let slope: f64 = direction.iter().zip(&eval.gradient).map(|(d, g)| d * g).sum();
            let slack = 4.0 * f64::EPSILON * (1.0 + eval.value.abs());

            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let trial: Vec<f64> = lambda.iter().zip(&direction).map(|(l, d)| l + step * d).collect();
                let trial_eval = self.evaluate(&trial);
                if trial_eval.value.is_finite() && trial_eval.value <= eval.value + ARMIJO * step * slope + slack {
                    accepted = Some((trial, trial_eval));
                    break;
                }
                step *= 0.5;
            }
            let (next, next_eval) = match accepted {
                Some(x) => x,
                None => {
                    // At the rounding floor of D the gradient may still be above
                    // tolerance; a full step that shrinks it is taken instead.
                    let trial: Vec<f64> = lambda.iter().zip(&direction).map(|(l, d)| l + d).collect();
                    let trial_eval = self.evaluate(&trial);
                    if trial_eval.value.is_finite() && trial_eval.max_gradient() < max_grad {
                        (trial, trial_eval)
                    } else {
                        return Err(Error::NotConverged {
                            iterations,
                            max_gradient: max_grad,
                        });
                    }
                }
            };
            lambda = next;
            eval = next_eval;
        }
    }
}
