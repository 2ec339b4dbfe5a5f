//! Sparse Neighborhood Search.
//!
//! Each outer iteration takes one projected-gradient step within the current
//! pattern, then scans the discrete neighborhood of the result for a
//! neighbor that, after refinement by further projected-gradient steps,
//! improves the objective by at least `η_k`. The first such neighbor is
//! accepted. If none exists the projected-gradient point is kept and `η`
//! shrinks when the iteration failed to decrease `f` by `η_k`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linesearch::{pgls_from, PglsConfig};
use crate::neighborhood::{enumerate, NeighborhoodSpec};
use crate::problem::{is_feasible_pair, support, Iterate, Pattern, SparseProblem};
use crate::report::{Recorder, RunReport, Termination};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SnsConfig {
    /// Neighbors with `f > f(x̃) + xi` are skipped.
    pub xi: f64,
    /// Shrink factor for `η` on unsuccessful iterations.
    pub theta: f64,
    pub eta0: f64,
    pub mu0: f64,
    /// Per-iteration factor for `μ`; 1 keeps it fixed.
    pub delta_mu: f64,
    pub neighborhood: NeighborhoodSpec,
    pub stop_step_tol: f64,
    pub max_outer_iters: usize,
    pub time_limit_secs: f64,
    pub pgls: PglsConfig,
    /// Safety cap on line searches spent refining one neighbor.
    pub inner_cap: usize,
}

impl Default for SnsConfig {
    fn default() -> Self {
        Self {
            xi: 1e3,
            theta: 0.5,
            eta0: 1e-5,
            mu0: 1e-6,
            delta_mu: 1.0,
            neighborhood: NeighborhoodSpec::new(2),
            stop_step_tol: 1e-4,
            max_outer_iters: 100_000,
            time_limit_secs: 1e4,
            pgls: PglsConfig::default(),
            inner_cap: 500,
        }
    }
}

impl SnsConfig {
    pub fn with_rho(mut self, rho: usize) -> Self {
        self.neighborhood.rho = rho;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.pgls.validate()?;
        self.neighborhood.validate(n)?;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.xi >= 0.0) {
            return bad(format!("xi = {} must be nonnegative", self.xi));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad(format!("theta = {} must lie in (0, 1)", self.theta));
        }
        if !(self.eta0 > 0.0) || !(self.mu0 > 0.0) {
            return bad("eta0 and mu0 must be positive".into());
        }
        if !(self.delta_mu > 0.0 && self.delta_mu <= 1.0) {
            return bad(format!("delta_mu = {} must lie in (0, 1]", self.delta_mu));
        }
        if !(self.stop_step_tol >= 0.0) || self.max_outer_iters == 0 || !(self.time_limit_secs > 0.0) || self.inner_cap == 0 {
            return bad("SNS budgets must be positive".into());
        }
        Ok(())
    }
}

/// Bookkeeping for one outer iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnsIteration {
    pub k: usize,
    /// Objective after the iteration.
    pub f: f64,
    /// `η_k` and `μ_k` used during the iteration.
    pub eta: f64,
    pub mu: f64,
    /// Flipped coordinates of the accepted neighbor, if one was accepted.
    pub accepted: Option<Vec<usize>>,
    /// `η` was shrunk (`k ∈ K_u`).
    pub unsuccessful: bool,
    pub step_norm: f64,
    pub neighbors_scanned: usize,
    pub line_searches: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SnsTrace {
    pub iterations: Vec<SnsIteration>,
    /// Neighbors abandoned because the refinement cap was reached.
    pub inner_cap_hits: usize,
    /// Most line searches spent on a single neighbor.
    pub max_inner_line_searches: usize,
}

/// Starting pattern for `x0`: frees the support of `x0` and then the
/// coordinates with the largest `|∇_i f(x0)|` until `s` are free. Ties go to
/// the lowest index.
pub fn initial_pattern(p: &SparseProblem, x0: &DVector<f64>) -> Result<Pattern> {
    p.check_dim(x0.len())?;
    let supp = support(x0, 0.0);
    if supp.len() > p.s() {
        return Err(Error::TooDense { nonzeros: supp.len(), budget: p.s() });
    }
    let (_, g) = p.eval(x0);
    let mut rest: Vec<usize> = (0..p.n()).filter(|i| !supp.contains(i)).collect();
    rest.sort_by(|&a, &b| g[b].abs().total_cmp(&g[a].abs()).then(a.cmp(&b)));
    let free: Vec<usize> = supp.iter().copied().chain(rest.into_iter().take(p.s() - supp.len())).collect();
    Ok(Pattern::with_free(p.n(), &free))
}

/// Starts from `x0 = 0` with [`initial_pattern`].
pub fn sns_from_origin(p: &SparseProblem, cfg: &SnsConfig) -> Result<RunReport> {
    let x0 = DVector::zeros(p.n());
    let y0 = initial_pattern(p, &x0)?;
    sns_solve(p, &Iterate::new(x0, y0), cfg)
}

struct Accepted {
    x: DVector<f64>,
    f: f64,
    grad: DVector<f64>,
    y: Pattern,
    flipped: Vec<usize>,
}

fn finite(f: f64, what: &str) -> Result<f64> {
    if f.is_finite() {
        Ok(f)
    } else {
        Err(Error::NonFinite(format!("{what}: f = {f}")))
    }
}

pub fn sns_solve(p: &SparseProblem, start: &Iterate, cfg: &SnsConfig) -> Result<RunReport> {
    cfg.validate(p.n())?;
    if !is_feasible_pair(start, p, 0.0)? {
        return Err(Error::Infeasible("SNS start (x0, y0) is not feasible".into()));
    }
    let mut x = start.x.clone();
    let mut y = start.y.clone();
    let (f0, g0) = p.eval(&x);
    let mut f = finite(f0, "objective at the start point")?;
    let mut g = g0;
    let mut eta = cfg.eta0;
    let mut mu = cfg.mu0;

    let mut rec = Recorder::new("sns", serde_json::to_value(cfg)?, p.n(), p.s(), &x, f);
    let mut trace = SnsTrace::default();

    let termination = 'outer: loop {
        let k = trace.iterations.len();
        if k >= cfg.max_outer_iters {
            break Termination::MaxIterations;
        }
        if rec.elapsed() > cfg.time_limit_secs {
            break Termination::TimeLimit;
        }

        // Step 1: projected-gradient step within the current pattern.
        let base = pgls_from(&x, f, &g, &y, p, &cfg.pgls);
        if !base.f.is_finite() {
            break Termination::Failed(format!("non-finite objective after the line search at iteration {k}"));
        }
        let r_k = base.residual;
        let f_tilde = base.f;
        let mut line_searches = 1;

        // Step 2: scan neighbors of (x̃, y) lazily, first improvement wins.
        let mut accepted: Option<Accepted> = None;
        let mut scanned = 0;
        for nb in enumerate(&base.x, &y, &cfg.neighborhood, p)? {
            scanned += 1;
            let (fh, gh) = p.eval(&nb.iterate.x);
            if fh.is_nan() {
                break 'outer Termination::Failed(format!("NaN objective at a neighbor in iteration {k}"));
            }
            if fh > f_tilde + cfg.xi {
                continue;
            }
            let y_prime = nb.iterate.y;
            let (mut xj, mut fj, mut gj) = (nb.iterate.x, fh, gh);
            let mut calls = 0;
            loop {
                if calls == cfg.inner_cap {
                    trace.inner_cap_hits += 1;
                    break;
                }
                let step = pgls_from(&xj, fj, &gj, &y_prime, p, &cfg.pgls);
                calls += 1;
                if step.f <= f_tilde - eta {
                    accepted = Some(Accepted { x: step.x, f: step.f, grad: step.grad, y: y_prime.clone(), flipped: nb.flipped.clone() });
                    break;
                }
                // Step 2.4: keep refining only while x^j is far from
                // stationary relative to the base point.
                if step.numerically_stationary || step.residual <= r_k + mu {
                    break;
                }
                xj = step.x;
                fj = step.f;
                gj = step.grad;
            }
            line_searches += calls;
            trace.max_inner_line_searches = trace.max_inner_line_searches.max(calls);
            if accepted.is_some() {
                break;
            }
        }

        // Step 3 (or the accepted neighbor from Step 2).
        let eta_k = eta;
        let mu_k = mu;
        let (x_next, y_next, f_next, g_next, flips) = match accepted {
            Some(a) => (a.x, a.y, a.f, a.grad, Some(a.flipped)),
            None => (base.x, y.clone(), base.f, base.grad, None),
        };
        let unsuccessful = flips.is_none() && f_next > f - eta;
        if unsuccessful {
            eta *= cfg.theta;
        }
        // Step 4
        mu *= cfg.delta_mu;

        let step_norm = (&x_next - &x).norm();
        x = x_next;
        y = y_next;
        f = f_next;
        g = g_next;
        rec.record(k + 1, &x, f);
        trace.iterations.push(SnsIteration {
            k,
            f,
            eta: eta_k,
            mu: mu_k,
            accepted: flips,
            unsuccessful,
            step_norm,
            neighbors_scanned: scanned,
            line_searches,
        });
        if unsuccessful && step_norm <= cfg.stop_step_tol {
            break Termination::Converged;
        }
    };

    let mut report = rec.finish(termination, Some(y));
    if trace.inner_cap_hits > 0 {
        report.notes.push(format!("inner refinement cap reached {} times", trace.inner_cap_hits));
    }
    report.sns_trace = Some(trace);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::LeastSquaresObjective;
    use crate::problem::FnObjective;
    use nalgebra::{dvector, DMatrix};
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
    fn initial_pattern_frees_largest_gradients() {
        let p = shifted_quadratic(dvector![3.0, 2.0, 1.0], 2);
        assert_eq!(initial_pattern(&p, &DVector::zeros(3)).unwrap(), Pattern::from_bits(&[0, 0, 1]));
    }

    #[test]
    fn initial_pattern_with_full_support() {
        let p = shifted_quadratic(dvector![3.0, 2.0, 1.0], 2);
        let y = initial_pattern(&p, &dvector![0.0, 1.0, 1.0]).unwrap();
        assert_eq!(y, Pattern::from_bits(&[1, 0, 0]));
        assert!(matches!(initial_pattern(&p, &dvector![1.0, 1.0, 1.0]), Err(Error::TooDense { .. })));
    }

    #[test]
    fn initial_pattern_tie_break() {
        let p = shifted_quadratic(dvector![1.0, 1.0, 1.0, 1.0], 2);
        assert_eq!(initial_pattern(&p, &DVector::zeros(4)).unwrap(), Pattern::from_bits(&[0, 0, 1, 1]));
    }

    #[test]
    fn recovers_planted_support() {
        // deterministic well-conditioned 8x6 matrix
        let a = DMatrix::from_fn(8, 6, |i, j| if i == j { 3.0 } else { ((i * 7 + j * 3) % 5) as f64 * 0.2 - 0.4 });
        let b = &a * dvector![1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let p = SparseProblem::new(Arc::new(LeastSquaresObjective::new(a, b).unwrap()), 2).unwrap();
        let cfg = SnsConfig { stop_step_tol: 1e-10, ..SnsConfig::default().with_rho(2) };
        let r = sns_from_origin(&p, &cfg).unwrap();
        assert!(r.is_converged());
        assert_eq!(r.support_final, vec![0, 1]);
        assert!(r.f_final <= 1e-10);
    }

    #[test]
    fn stationary_start_with_rho_zero_stops_at_once() {
        let p = shifted_quadratic(dvector![3.0, 1.0, 0.5], 1);
        let start = Iterate::new(dvector![3.0, 0.0, 0.0], Pattern::from_bits(&[0, 1, 1]));
        let r = sns_solve(&p, &start, &SnsConfig::default().with_rho(0)).unwrap();
        assert!(r.is_converged());
        let tr = r.sns_trace.unwrap();
        assert_eq!(tr.iterations.len(), 1);
        assert!(tr.iterations[0].unsuccessful);
        assert_eq!(r.x_final, vec![3.0, 0.0, 0.0]);
    }

    #[test]
    fn neighbor_move_escapes_bad_support() {
        let p = shifted_quadratic(dvector![1.0, 3.0], 1);
        let start = Iterate::new(dvector![1.0, 0.0], Pattern::from_bits(&[0, 1]));
        let r = sns_solve(&p, &start, &SnsConfig::default().with_rho(2)).unwrap();
        assert_eq!(r.support_final, vec![1]);
        assert!((r.f_final - 0.5).abs() < 1e-12);
        let tr = r.sns_trace.unwrap();
        assert!(tr.iterations[0].accepted.is_some());
        assert!(r.trajectory.windows(2).all(|w| w[1].f <= w[0].f));
    }

    #[test]
    fn eta_shrinks_only_on_unsuccessful_iterations() {
        let p = shifted_quadratic(dvector![1.0, -2.0, 0.5, 4.0, -0.1], 2);
        let cfg = SnsConfig { stop_step_tol: 1e-12, ..SnsConfig::default().with_rho(2) };
        let r = sns_from_origin(&p, &cfg).unwrap();
        let its = r.sns_trace.unwrap().iterations;
        for w in its.windows(2) {
            if w[0].unsuccessful {
                assert_eq!(w[1].eta, 0.5 * w[0].eta);
            } else {
                assert_eq!(w[1].eta, w[0].eta);
            }
        }
    }

    #[test]
    fn rejects_infeasible_start() {
        let p = shifted_quadratic(dvector![1.0, 3.0], 1);
        let start = Iterate::new(dvector![1.0, 1.0], Pattern::from_bits(&[0, 1]));
        assert!(matches!(sns_solve(&p, &start, &SnsConfig::default()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn config_ranges() {
        assert!(SnsConfig { theta: 1.0, ..Default::default() }.validate(3).is_err());
        assert!(SnsConfig { delta_mu: 0.0, ..Default::default() }.validate(3).is_err());
        assert!(SnsConfig::default().with_rho(4).validate(3).is_err());
        assert!(SnsConfig::default().validate(3).is_ok());
    }
}
