//! Penalty Decomposition and Greedy Sparse-Simplex baselines, plus the
//! restricted smooth minimizer they (and the brute-force oracle) share.

mod gss;
mod lbfgs;
mod pd;
mod scalar;

pub use gss::{gss_solve, GssConfig, GssMoveRule, GssStep, GssTrace};
pub use pd::{hard_threshold, pd_solve, PdAlternation, PdConfig, PdTrace};
pub use scalar::{minimize_coordinate, ScalarConfig};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linesearch::{pgls_from, PglsConfig};
use crate::problem::{FeasibleSet, Pattern, SparseProblem};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerSolverConfig {
    /// Quasi-Newton history length.
    pub memory: usize,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
}

impl Default for InnerSolverConfig {
    fn default() -> Self {
        Self { memory: 10, grad_tol: 1e-8, max_iters: 1000, wolfe_c1: 1e-4, wolfe_c2: 0.9 }
    }
}

impl InnerSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 || self.max_iters == 0 {
            return Err(Error::InvalidConfig("inner solver memory and max_iters must be positive".into()));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::InvalidConfig(format!("grad_tol = {} must be nonnegative", self.grad_tol)));
        }
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "Wolfe constants need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.wolfe_c1, self.wolfe_c2
            )));
        }
        Ok(())
    }
}

/// Output of [`minimize_restricted`].
#[derive(Clone, Debug)]
pub struct RestrictedSolution {
    pub x: DVector<f64>,
    pub f: f64,
    /// Gradient norm on the free coordinates (projected residual for
    /// constrained sets).
    pub grad_norm: f64,
    pub iters: usize,
    pub converged: bool,
}

/// Minimizes `f` over `{x ∈ X : x_i = 0 for i ∉ free}` from `warm`.
///
/// Unconstrained sets use L-BFGS on the free coordinates. Box and ball sets
/// fall back to projected gradient with Armijo backtracking, and
/// `grad_norm` is then the projected-gradient residual.
pub fn minimize_restricted(
    p: &SparseProblem,
    free: &[usize],
    warm: &DVector<f64>,
    cfg: &InnerSolverConfig,
) -> Result<RestrictedSolution> {
    cfg.validate()?;
    p.check_dim(warm.len())?;
    let n = p.n();
    let mut is_free = vec![false; n];
    for &i in free {
        if i >= n {
            return Err(Error::DimensionMismatch { expected: n, found: i + 1 });
        }
        is_free[i] = true;
    }
    if let Some(i) = (0..n).find(|&i| !is_free[i] && warm[i] != 0.0) {
        return Err(Error::Infeasible(format!("warm start has x[{i}] = {} outside the free set", warm[i])));
    }

    let mut free: Vec<usize> = free.to_vec();
    free.sort_unstable();
    free.dedup();

    if free.is_empty() {
        let x = DVector::zeros(n);
        let f = p.value(&x);
        return Ok(RestrictedSolution { x, f, grad_norm: 0.0, iters: 0, converged: true });
    }

    match p.feasible_set() {
        FeasibleSet::Full => {
            let lift = |z: &DVector<f64>| {
                let mut x = DVector::zeros(n);
                for (k, &i) in free.iter().enumerate() {
                    x[i] = z[k];
                }
                x
            };
            let z0 = DVector::from_iterator(free.len(), free.iter().map(|&i| warm[i]));
            let out = lbfgs::minimize(
                z0,
                |z| {
                    let (f, g) = p.eval(&lift(z));
                    (f, DVector::from_iterator(free.len(), free.iter().map(|&i| g[i])))
                },
                cfg,
            );
            Ok(RestrictedSolution {
                x: lift(&out.x),
                f: out.f,
                grad_norm: out.g.norm(),
                iters: out.iters,
                converged: out.converged,
            })
        }
        FeasibleSet::Box { .. } | FeasibleSet::Ball { .. } => {
            let y = Pattern::with_free(n, &free);
            let ls = PglsConfig::default();
            let mut x = p.feasible_set().project_onto(warm, &y);
            let (mut f, mut g) = p.eval(&x);
            for iter in 0..cfg.max_iters {
                let step = pgls_from(&x, f, &g, &y, p, &ls);
                if step.residual <= cfg.grad_tol {
                    return Ok(RestrictedSolution { x, f, grad_norm: step.residual, iters: iter, converged: true });
                }
                if step.numerically_stationary {
                    return Ok(RestrictedSolution { x, f, grad_norm: step.residual, iters: iter, converged: false });
                }
                x = step.x;
                f = step.f;
                g = step.grad;
            }
            let grad_norm = crate::problem::residual_with_gradient(&x, &g, &y, p);
            Ok(RestrictedSolution { x, f, grad_norm, iters: cfg.max_iters, converged: grad_norm <= cfg.grad_tol })
        }
    }
}
