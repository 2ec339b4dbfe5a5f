//! Exact minimization along a single coordinate.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::problem::SparseProblem;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalarConfig {
    /// Stop once `|∂_i f| <= tol`.
    pub tol: f64,
    pub max_iters: usize,
    /// Bracket doublings before the direction is declared unbounded.
    pub max_expansions: usize,
}

impl Default for ScalarConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 200, max_expansions: 60 }
    }
}

/// Minimizes `t ↦ f(x with x_i = t)` for a function that is convex in
/// coordinate `i`. Returns the new point and its value, or `None` if no
/// bracket is found (unbounded direction) or the solver does not converge.
///
/// The bracket is grown geometrically from the current value; inside it,
/// secant (finite-difference Newton) steps are safeguarded by bisection.
pub fn minimize_coordinate(
    p: &SparseProblem,
    x: &DVector<f64>,
    i: usize,
    cfg: &ScalarConfig,
) -> Option<(DVector<f64>, f64)> {
    let mut z = x.clone();
    let mut probe = |t: f64| {
        z[i] = t;
        let (f, g) = p.eval(&z);
        (f, g[i])
    };
    let t0 = x[i];
    let (f0, d0) = probe(t0);
    if !f0.is_finite() || !d0.is_finite() {
        return None;
    }
    if d0.abs() <= cfg.tol {
        return Some((x.clone(), f0));
    }

    // Orient so that the derivative is negative at t0 along +dir.
    let dir = -d0.signum();
    let (mut lo, mut dlo) = (t0, d0 * dir);
    let mut h = t0.abs().max(1.0);
    let mut bracket = None;
    for _ in 0..cfg.max_expansions {
        let t = t0 + dir * h;
        let (_, d) = probe(t);
        if !d.is_finite() {
            return None;
        }
        let d = d * dir;
        if d >= 0.0 {
            bracket = Some((t, d));
            break;
        }
        lo = t;
        dlo = d;
        h *= 2.0;
    }
    let (mut hi, mut dhi) = bracket?;

    // Invariant: dlo < 0 <= dhi (in the oriented derivative).
    let mut best = None;
    for _ in 0..cfg.max_iters {
        if dhi == 0.0 {
            best = Some(hi);
            break;
        }
        let width = hi - lo;
        let mut t = hi - dhi * width / (dhi - dlo);
        let margin = 0.01 * width.abs();
        let (a, b) = (lo.min(hi), lo.max(hi));
        if !(t > a + margin && t < b - margin) {
            t = 0.5 * (lo + hi);
        }
        let (_, d) = probe(t);
        if !d.is_finite() {
            return None;
        }
        if d.abs() <= cfg.tol {
            best = Some(t);
            break;
        }
        let d = d * dir;
        if d < 0.0 {
            lo = t;
            dlo = d;
        } else {
            hi = t;
            dhi = d;
        }
        if (hi - lo).abs() <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
            best = Some(t);
            break;
        }
    }
    let t = best?;
    let mut out = x.clone();
    out[i] = t;
    let f = p.value(&out);
    (f <= f0).then_some((out, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::FnObjective;
    use nalgebra::dvector;
    use std::sync::Arc;

    #[test]
    fn quadratic_coordinate() {
        let obj = FnObjective::new(2, |x: &DVector<f64>| {
            let f = (x[0] - 3.0).powi(2) + x[0] * x[1] + x[1] * x[1];
            (f, dvector![2.0 * (x[0] - 3.0) + x[1], x[0] + 2.0 * x[1]])
        });
        let p = SparseProblem::new(Arc::new(obj), 2).unwrap();
        let (x, _) = minimize_coordinate(&p, &dvector![0.0, 2.0], 0, &ScalarConfig::default()).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-10);
        assert_eq!(x[1], 2.0);
    }

    #[test]
    fn far_minimizer_needs_bracket_growth() {
        // log cosh(t + 1e5), evaluated without overflow
        let obj = FnObjective::new(1, |x: &DVector<f64>| {
            let u: f64 = x[0] + 1e5;
            (u.abs() + (-2.0 * u.abs()).exp().ln_1p() - std::f64::consts::LN_2, dvector![u.tanh()])
        });
        let p = SparseProblem::new(Arc::new(obj), 1).unwrap();
        let (x, _) = minimize_coordinate(&p, &dvector![0.0], 0, &ScalarConfig::default()).unwrap();
        assert!((x[0] + 1e5).abs() < 1e-6);
    }

    #[test]
    fn unbounded_direction_is_rejected() {
        let obj = FnObjective::new(1, |x: &DVector<f64>| ((-x[0]).exp(), dvector![-(-x[0]).exp()]));
        let p = SparseProblem::new(Arc::new(obj), 1).unwrap();
        let cfg = ScalarConfig { max_expansions: 5, ..Default::default() };
        assert!(minimize_coordinate(&p, &dvector![0.0], 0, &cfg).is_none());
    }
}
