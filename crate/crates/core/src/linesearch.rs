//! Projected-gradient line search over a fixed pattern.
//!
//! From a feasible `(x, y)` the trial point is `x̂ = Π_{X(y)}(x - ∇f(x))`,
//! the direction is `d = x̂ - x`, and the step is the largest
//! `alpha ∈ {1, δ, δ², ...}` satisfying the Armijo test
//! `f(x + alpha d) <= f(x) + γ alpha ∇f(x)'d`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Pattern, SparseProblem};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PglsConfig {
    /// Armijo constant, in (0, 1/2).
    pub gamma: f64,
    /// Backtracking factor, in (0, 1).
    pub delta_ls: f64,
    pub alpha_init: f64,
    /// Steps below this are treated as numerically zero.
    pub alpha_min: f64,
    /// Backtracking also stops once the Armijo decrease `γ alpha |∇f'd|`
    /// falls below `flat_rel * |f|`, where rounding in `f` decides the test.
    pub flat_rel: f64,
    pub max_backtracks: usize,
}

impl Default for PglsConfig {
    fn default() -> Self {
        Self { gamma: 0.1, delta_ls: 0.5, alpha_init: 1.0, alpha_min: 1e-12, flat_rel: 1e-15, max_backtracks: 60 }
    }
}

impl PglsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 0.5) {
            return Err(Error::InvalidConfig(format!("gamma = {} must lie in (0, 0.5)", self.gamma)));
        }
        if !(self.delta_ls > 0.0 && self.delta_ls < 1.0) {
            return Err(Error::InvalidConfig(format!("delta_ls = {} must lie in (0, 1)", self.delta_ls)));
        }
        if !(self.alpha_init > 0.0) || !(self.alpha_min > 0.0) || !(self.flat_rel >= 0.0) || self.max_backtracks == 0 {
            return Err(Error::InvalidConfig("alpha_init, alpha_min and max_backtracks must be positive, flat_rel nonnegative".into()));
        }
        Ok(())
    }
}

/// Result of one line search.
#[derive(Clone, Debug)]
pub struct PglsStep {
    pub x: DVector<f64>,
    pub f: f64,
    /// Gradient at the returned point.
    pub grad: DVector<f64>,
    pub alpha: f64,
    /// `||d||`, the stationarity residual at the input point.
    pub residual: f64,
    /// `∇f(x)'d` at the input point.
    pub slope: f64,
    pub f_evals: usize,
    /// Backtracking ran out before finding an acceptable step; the input
    /// point is returned unchanged.
    pub numerically_stationary: bool,
}

/// One projected-gradient Armijo step from `(x, y)`.
pub fn pgls(x: &DVector<f64>, y: &Pattern, p: &SparseProblem, cfg: &PglsConfig) -> Result<PglsStep> {
    p.check_dim(x.len())?;
    p.check_dim(y.len())?;
    let (f, g) = p.eval(x);
    Ok(pgls_from(x, f, &g, y, p, cfg))
}

/// Same as [`pgls`] with `f(x)` and `∇f(x)` already known.
pub fn pgls_from(
    x: &DVector<f64>,
    f: f64,
    g: &DVector<f64>,
    y: &Pattern,
    p: &SparseProblem,
    cfg: &PglsConfig,
) -> PglsStep {
    let trial = p.feasible_set().project_onto(&(x - g), y);
    let d = trial - x;
    let residual = d.norm();
    let slope = g.dot(&d);
    let unchanged = |numerically_stationary, f_evals| PglsStep {
        x: x.clone(),
        f,
        grad: g.clone(),
        alpha: cfg.alpha_init,
        residual,
        slope,
        f_evals,
        numerically_stationary,
    };
    if residual == 0.0 {
        return unchanged(false, 0);
    }

    let mut alpha = cfg.alpha_init;
    let mut f_evals = 0;
    for _ in 0..cfg.max_backtracks {
        if alpha < cfg.alpha_min || cfg.gamma * alpha * -slope <= cfg.flat_rel * f.abs() {
            break;
        }
        let candidate = x + alpha * &d;
        let (fc, gc) = p.eval(&candidate);
        f_evals += 1;
        if fc <= f + cfg.gamma * alpha * slope {
            return PglsStep { x: candidate, f: fc, grad: gc, alpha, residual, slope, f_evals, numerically_stationary: false };
        }
        alpha *= cfg.delta_ls;
    }
    unchanged(true, f_evals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{FnObjective, Objective};
    use nalgebra::dvector;
    use std::sync::Arc;

    fn problem(obj: impl Objective + 'static, s: usize) -> SparseProblem {
        SparseProblem::new(Arc::new(obj), s).unwrap()
    }

    #[test]
    fn unit_step_on_norm_squared() {
        let p = problem(FnObjective::new(2, |x: &DVector<f64>| (0.5 * x.norm_squared(), x.clone())), 1);
        let cfg = PglsConfig { gamma: 0.1, ..Default::default() };
        let step = pgls(&dvector![1.0, 0.0], &Pattern::from_bits(&[0, 1]), &p, &cfg).unwrap();
        assert_eq!(step.alpha, 1.0);
        assert_eq!(step.x, dvector![0.0, 0.0]);
        assert_eq!(step.residual, 1.0);
        assert_eq!(step.slope, -1.0);
    }

    #[test]
    fn stationary_input_is_a_fixed_point() {
        let p = problem(FnObjective::new(2, |x: &DVector<f64>| (0.5 * x.norm_squared(), x.clone())), 1);
        let x = dvector![0.0, 0.0];
        let step = pgls(&x, &Pattern::from_bits(&[0, 1]), &p, &PglsConfig::default()).unwrap();
        assert_eq!(step.x, x);
        assert_eq!(step.alpha, 1.0);
        assert_eq!(step.f_evals, 0);
        assert!(!step.numerically_stationary);
    }

    #[test]
    fn backtracking_trace_on_steep_parabola() {
        // f = 50 x^2 from x = 1: Armijo holds iff alpha <= 0.015, so the
        // accepted step is 2^-7.
        let p = problem(FnObjective::new(1, |x: &DVector<f64>| (50.0 * x[0] * x[0], dvector![100.0 * x[0]])), 1);
        let cfg = PglsConfig { gamma: 0.25, delta_ls: 0.5, ..Default::default() };
        let step = pgls(&dvector![1.0], &Pattern::all_free(1), &p, &cfg).unwrap();
        assert_eq!(step.alpha, 0.0078125);
        assert_eq!(step.x[0], 0.21875);
        assert_eq!(step.f_evals, 8);
    }

    #[test]
    fn exhausted_budget_rejects_step() {
        // Objective that never accepts any step: value rises in every direction.
        let p = problem(
            FnObjective::new(1, |x: &DVector<f64>| (if x[0] == 1.0 { 0.0 } else { 1.0 }, dvector![1.0])),
            1,
        );
        let cfg = PglsConfig { max_backtracks: 5, ..Default::default() };
        let step = pgls(&dvector![1.0], &Pattern::all_free(1), &p, &cfg).unwrap();
        assert!(step.numerically_stationary);
        assert_eq!(step.x, dvector![1.0]);
        assert_eq!(step.f_evals, 5);
    }

    #[test]
    fn decrease_below_rounding_is_not_searched_for() {
        // f = 1e6 + x^2/2 at x = 1e-6: the Armijo decrease γ·alpha·1e-12 is
        // under the resolution of f at every alpha <= 1.
        let p = problem(FnObjective::new(1, |x: &DVector<f64>| (1e6 + 0.5 * x[0] * x[0], dvector![x[0]])), 1);
        let step = pgls(&dvector![1e-6], &Pattern::all_free(1), &p, &PglsConfig::default()).unwrap();
        assert!(step.numerically_stationary);
        assert_eq!(step.f_evals, 0);
        let cfg = PglsConfig { flat_rel: 0.0, ..Default::default() };
        assert!(!pgls(&dvector![1e-6], &Pattern::all_free(1), &p, &cfg).unwrap().numerically_stationary);
    }

    #[test]
    fn fixed_coordinates_stay_zero() {
        let c = dvector![1.0, -3.0, 2.0];
        let p = problem(
            FnObjective::new(3, move |x: &DVector<f64>| {
                let r = x - &c;
                (0.5 * r.norm_squared(), r)
            }),
            2,
        );
        let y = Pattern::from_bits(&[0, 1, 0]);
        let step = pgls(&dvector![0.5, 0.0, 0.0], &y, &p, &PglsConfig::default()).unwrap();
        assert_eq!(step.x[1], 0.0);
        assert!(step.f < p.value(&dvector![0.5, 0.0, 0.0]));
    }

    #[test]
    fn config_validation() {
        assert!(PglsConfig { gamma: 0.5, ..Default::default() }.validate().is_err());
        assert!(PglsConfig { delta_ls: 1.0, ..Default::default() }.validate().is_err());
        assert!(PglsConfig::default().validate().is_ok());
    }
}
