//! Penalty Decomposition: block coordinate descent on
//! `q_τ(x, y) = f(x) + τ/2 ||x - y||²` with `||y||_0 <= s`, and `τ` grown
//! geometrically between alternations.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{lbfgs, minimize_restricted, InnerSolverConfig};
use crate::error::{Error, Result};
use crate::problem::{is_feasible_point, support, FeasibleSet, Iterate, Pattern, SparseProblem};
use crate::report::{Recorder, RunReport, Termination};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PdConfig {
    pub tau0: f64,
    pub tau_growth: f64,
    pub stop_xy_tol: f64,
    pub inner: InnerSolverConfig,
    pub max_outer: usize,
    pub time_limit_secs: f64,
}

impl Default for PdConfig {
    fn default() -> Self {
        Self {
            tau0: 1.0,
            tau_growth: 1.05,
            stop_xy_tol: 1e-4,
            inner: InnerSolverConfig::default(),
            max_outer: 10_000,
            time_limit_secs: 1e4,
        }
    }
}

impl PdConfig {
    pub fn validate(&self) -> Result<()> {
        self.inner.validate()?;
        if !(self.tau0 > 0.0) || !(self.tau_growth > 1.0) {
            return Err(Error::InvalidConfig("PD needs tau0 > 0 and tau_growth > 1".into()));
        }
        if !(self.stop_xy_tol > 0.0) || self.max_outer == 0 || !(self.time_limit_secs > 0.0) {
            return Err(Error::InvalidConfig("PD tolerances and budgets must be positive".into()));
        }
        Ok(())
    }
}

/// Values of `q_τ` around one alternation: before the x-block, after it, and
/// after the y-block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdAlternation {
    pub tau: f64,
    pub q_start: f64,
    pub q_after_x: f64,
    pub q_after_y: f64,
    pub xy_gap: f64,
    pub inner_converged: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PdTrace {
    pub alternations: Vec<PdAlternation>,
    pub refined_converged: bool,
}

/// Keeps the `s` largest-magnitude entries of `x`; ties go to the lowest
/// index.
pub fn hard_threshold(x: &DVector<f64>, s: usize) -> DVector<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    let mut out = DVector::zeros(x.len());
    for &i in order.iter().take(s) {
        out[i] = x[i];
    }
    out
}

pub fn pd_solve(p: &SparseProblem, start: &Iterate, cfg: &PdConfig) -> Result<RunReport> {
    cfg.validate()?;
    if !matches!(p.feasible_set(), FeasibleSet::Full) {
        return Err(Error::UnsupportedSet(p.feasible_set().name()));
    }
    if !is_feasible_point(&start.x, p, 0.0)? {
        return Err(Error::Infeasible("PD start point is not feasible".into()));
    }

    let q = |x: &DVector<f64>, y: &DVector<f64>, tau: f64| p.value(x) + 0.5 * tau * (x - y).norm_squared();

    let mut x = start.x.clone();
    let mut y = start.x.clone();
    let f0 = p.value(&y);
    let mut rec = Recorder::new("pd", serde_json::to_value(cfg)?, p.n(), p.s(), &y, f0);
    let mut trace = PdTrace::default();
    let mut tau = cfg.tau0;
    let mut termination = Termination::MaxIterations;

    for k in 1..=cfg.max_outer {
        if rec.elapsed() > cfg.time_limit_secs {
            termination = Termination::TimeLimit;
            break;
        }
        let q_start = q(&x, &y, tau);
        let anchor = y.clone();
        let inner = lbfgs::minimize(
            x.clone(),
            |z| {
                let (f, g) = p.eval(z);
                let r = z - &anchor;
                (f + 0.5 * tau * r.norm_squared(), g + tau * r)
            },
            &cfg.inner,
        );
        if !inner.f.is_finite() {
            termination = Termination::Failed(format!("non-finite penalty value at alternation {k}"));
            break;
        }
        x = inner.x;
        let q_after_x = q(&x, &y, tau);
        y = hard_threshold(&x, p.s());
        let q_after_y = q(&x, &y, tau);
        let xy_gap = (&x - &y).norm();
        trace.alternations.push(PdAlternation {
            tau,
            q_start,
            q_after_x,
            q_after_y,
            xy_gap,
            inner_converged: inner.converged,
        });
        rec.record(k, &y, p.value(&y));
        if xy_gap < cfg.stop_xy_tol {
            termination = Termination::Converged;
            break;
        }
        tau *= cfg.tau_growth;
    }

    let free = support(&y, 0.0);
    let refined = minimize_restricted(p, &free, &y, &cfg.inner)?;
    trace.refined_converged = refined.converged;
    let pattern = Pattern::with_free(p.n(), &free);
    if refined.f <= p.value(&y) {
        rec.set_final(&refined.x, refined.f);
    }
    rec.note("final point refined on the recovered support");
    let mut report = rec.finish(termination, Some(pattern));
    report.pd_trace = Some(trace);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::FnObjective;
    use nalgebra::dvector;
    use std::sync::Arc;

    fn shifted_quadratic(c: DVector<f64>, s: usize) -> SparseProblem {
        let n = c.len();
        let obj = FnObjective::new(n, move |x: &DVector<f64>| {
            let r = x - &c;
            (0.5 * r.norm_squared(), r)
        });
        SparseProblem::new(Arc::new(obj), s).unwrap()
    }

    fn origin(n: usize) -> Iterate {
        Iterate::new(DVector::zeros(n), Pattern::all_free(n))
    }

    #[test]
    fn hard_threshold_ties_to_lowest_index() {
        assert_eq!(hard_threshold(&dvector![1.0, -2.0, 2.0, 0.5], 2), dvector![0.0, -2.0, 2.0, 0.0]);
        assert_eq!(hard_threshold(&dvector![1.0, 1.0, 1.0], 1), dvector![1.0, 0.0, 0.0]);
    }

    #[test]
    fn single_sparse_shifted_quadratic() {
        let p = shifted_quadratic(dvector![3.0, 1.0, 0.1], 1);
        let r = pd_solve(&p, &origin(3), &PdConfig::default()).unwrap();
        assert!(r.is_converged());
        assert!((r.x_final() - dvector![3.0, 0.0, 0.0]).norm() < 1e-8);
        for a in &r.pd_trace.as_ref().unwrap().alternations {
            assert!(a.q_after_x <= a.q_start);
            assert!(a.q_after_y <= a.q_after_x);
        }
    }

    #[test]
    fn vacuous_budget_stops_after_one_alternation() {
        let p = shifted_quadratic(dvector![3.0, 1.0, 0.1], 3);
        let r = pd_solve(&p, &origin(3), &PdConfig::default()).unwrap();
        assert_eq!(r.pd_trace.as_ref().unwrap().alternations.len(), 1);
        assert!((r.x_final() - dvector![3.0, 1.0, 0.1]).norm() < 1e-8);
    }

    #[test]
    fn start_at_zero_residual_optimum_is_fixed_point() {
        let p = shifted_quadratic(dvector![3.0, 0.0, 0.0], 1);
        let start = Iterate::new(dvector![3.0, 0.0, 0.0], Pattern::from_bits(&[0, 1, 1]));
        let r = pd_solve(&p, &start, &PdConfig::default()).unwrap();
        let tr = r.pd_trace.unwrap();
        assert_eq!(tr.alternations.len(), 1);
        assert!(tr.alternations[0].xy_gap < 1e-4);
        assert_eq!(r.support_final, vec![0]);
    }

    #[test]
    fn rejects_box_set() {
        let p = shifted_quadratic(dvector![1.0, 1.0], 1).with_feasible_set(FeasibleSet::uniform_box(2, -1.0, 1.0)).unwrap();
        assert!(matches!(pd_solve(&p, &origin(2), &PdConfig::default()), Err(Error::UnsupportedSet(_))));
    }
}
