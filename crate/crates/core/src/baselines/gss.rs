//! Greedy Sparse-Simplex: at each outer iteration every feasible
//! single-coordinate move (and, on a full support, every swap) is solved
//! exactly and the best one is applied.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::scalar::{minimize_coordinate, ScalarConfig};
use crate::error::{Error, Result};
use crate::problem::{is_feasible_point, support, FeasibleSet, Iterate, Pattern, SparseProblem};
use crate::report::{Recorder, RunReport, Termination};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GssMoveRule {
    #[default]
    BestImprovement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GssConfig {
    pub stop_step_tol: f64,
    pub scalar: ScalarConfig,
    pub move_rule: GssMoveRule,
    pub max_outer: usize,
    pub time_limit_secs: f64,
}

impl Default for GssConfig {
    fn default() -> Self {
        Self {
            stop_step_tol: 1e-4,
            scalar: ScalarConfig::default(),
            move_rule: GssMoveRule::BestImprovement,
            max_outer: 100_000,
            time_limit_secs: 1e4,
        }
    }
}

impl GssConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.stop_step_tol >= 0.0) || self.max_outer == 0 || !(self.time_limit_secs > 0.0) {
            return Err(Error::InvalidConfig("GSS tolerances and budgets must be positive".into()));
        }
        if !(self.scalar.tol > 0.0) || self.scalar.max_iters == 0 {
            return Err(Error::InvalidConfig("GSS scalar solver needs tol > 0 and max_iters > 0".into()));
        }
        Ok(())
    }
}

/// The move applied at one outer iteration: coordinate `j` re-optimized
/// after zeroing `zeroed` (if any).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GssStep {
    pub zeroed: Option<usize>,
    pub coordinate: usize,
    pub f: f64,
    pub step_norm: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GssTrace {
    pub steps: Vec<GssStep>,
    /// Moves skipped because the scalar solver failed.
    pub skipped_moves: usize,
}

struct Candidate {
    zeroed: Option<usize>,
    coordinate: usize,
    x: DVector<f64>,
    f: f64,
}

fn best_move(p: &SparseProblem, x: &DVector<f64>, cfg: &GssConfig, skipped: &mut usize) -> Option<Candidate> {
    let supp = support(x, 0.0);
    let mut best: Option<Candidate> = None;
    let mut consider = |zeroed: Option<usize>, j: usize, base: &DVector<f64>, best: &mut Option<Candidate>| {
        match minimize_coordinate(p, base, j, &cfg.scalar) {
            Some((xn, f)) => {
                if best.as_ref().is_none_or(|b| f < b.f) {
                    *best = Some(Candidate { zeroed, coordinate: j, x: xn, f });
                }
            }
            None => *skipped += 1,
        }
    };
    if supp.len() < p.s() {
        for j in 0..p.n() {
            consider(None, j, x, &mut best);
        }
    } else {
        for &j in &supp {
            consider(None, j, x, &mut best);
        }
        for &i in &supp {
            let mut z = x.clone();
            z[i] = 0.0;
            for j in (0..p.n()).filter(|&j| j != i) {
                consider(Some(i), j, &z, &mut best);
            }
        }
    }
    best
}

pub fn gss_solve(p: &SparseProblem, start: &Iterate, cfg: &GssConfig) -> Result<RunReport> {
    cfg.validate()?;
    if !matches!(p.feasible_set(), FeasibleSet::Full) {
        return Err(Error::UnsupportedSet(p.feasible_set().name()));
    }
    if !is_feasible_point(&start.x, p, 0.0)? {
        return Err(Error::Infeasible("GSS start point is not feasible".into()));
    }

    let mut x = start.x.clone();
    let mut f = p.value(&x);
    if !f.is_finite() {
        return Err(Error::NonFinite(format!("f(x0) = {f}")));
    }
    let mut rec = Recorder::new("gss", serde_json::to_value(cfg)?, p.n(), p.s(), &x, f);
    let mut trace = GssTrace::default();
    let mut termination = Termination::MaxIterations;

    for k in 1..=cfg.max_outer {
        if rec.elapsed() > cfg.time_limit_secs {
            termination = Termination::TimeLimit;
            break;
        }
        let Some(cand) = best_move(p, &x, cfg, &mut trace.skipped_moves) else {
            termination = Termination::Converged;
            break;
        };
        if f - cand.f <= f64::EPSILON * f.abs().max(1.0) {
            termination = Termination::Converged;
            break;
        }
        let step_norm = (&cand.x - &x).norm();
        x = cand.x;
        f = cand.f;
        trace.steps.push(GssStep { zeroed: cand.zeroed, coordinate: cand.coordinate, f, step_norm });
        rec.record(k, &x, f);
        if step_norm <= cfg.stop_step_tol {
            termination = Termination::Converged;
            break;
        }
    }

    let free = support(&x, 0.0);
    let mut report = rec.finish(termination, Some(Pattern::with_free(p.n(), &free)));
    report.gss_trace = Some(trace);
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

    #[test]
    fn one_move_then_stop() {
        let p = shifted_quadratic(dvector![3.0, 1.0], 1);
        let start = Iterate::new(DVector::zeros(2), Pattern::all_free(2));
        let r = gss_solve(&p, &start, &GssConfig::default()).unwrap();
        assert!(r.is_converged());
        assert_eq!(r.gss_trace.as_ref().unwrap().steps.len(), 1);
        assert!((r.x_final() - dvector![3.0, 0.0]).norm() < 1e-10);
    }

    #[test]
    fn no_improving_move_terminates_immediately() {
        let p = shifted_quadratic(dvector![3.0, 1.0], 1);
        let start = Iterate::new(dvector![3.0, 0.0], Pattern::from_bits(&[0, 1]));
        let r = gss_solve(&p, &start, &GssConfig::default()).unwrap();
        assert!(r.is_converged());
        assert!(r.gss_trace.unwrap().steps.is_empty());
        assert_eq!(r.x_final, vec![3.0, 0.0]);
    }

    #[test]
    fn swap_moves_leave_a_bad_support() {
        let p = shifted_quadratic(dvector![1.0, 3.0], 1);
        let start = Iterate::new(dvector![1.0, 0.0], Pattern::from_bits(&[0, 1]));
        let r = gss_solve(&p, &start, &GssConfig::default()).unwrap();
        assert_eq!(r.support_final, vec![1]);
        assert!((r.f_final - 0.5).abs() < 1e-12);
    }

    #[test]
    fn trajectory_is_monotone() {
        let c = dvector![0.3, -2.0, 1.5, 0.7, -0.1];
        let obj = FnObjective::new(5, move |x: &DVector<f64>| {
            let mut g = x - &c;
            let coupling = 0.2 * (x[0] + x[1] + x[2] + x[3] + x[4]);
            let f = 0.5 * g.norm_squared() + 0.5 * coupling * coupling / 0.2;
            g.add_scalar_mut(coupling);
            (f, g)
        });
        let p = SparseProblem::new(Arc::new(obj), 2).unwrap();
        let start = Iterate::new(DVector::zeros(5), Pattern::all_free(5));
        let r = gss_solve(&p, &start, &GssConfig::default()).unwrap();
        assert!(r.trajectory.windows(2).all(|w| w[1].f <= w[0].f));
        assert!(r.support_final.len() <= 2);
    }
}
