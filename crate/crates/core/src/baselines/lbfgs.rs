//! Limited-memory BFGS with a strong-Wolfe line search (bracketing + zoom
//! with safeguarded cubic interpolation).

use std::collections::VecDeque;

use nalgebra::DVector;

use super::InnerSolverConfig;

pub(crate) struct LbfgsOutcome {
    pub x: DVector<f64>,
    pub f: f64,
    pub g: DVector<f64>,
    pub iters: usize,
    pub converged: bool,
}

#[derive(Clone)]
struct Probe {
    alpha: f64,
    f: f64,
    slope: f64,
    x: DVector<f64>,
    g: DVector<f64>,
}

const MAX_BRACKET_STEPS: usize = 40;
const MAX_ZOOM_STEPS: usize = 40;
/// Relative slack on `f` for the approximate Wolfe test.
const APPROX_F_REL: f64 = 1e-12;

pub(crate) fn minimize<F>(x0: DVector<f64>, mut oracle: F, cfg: &InnerSolverConfig) -> LbfgsOutcome
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let (mut f, mut g) = oracle(&x0);
    let mut x = x0;
    let mut history: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::with_capacity(cfg.memory);

    for iter in 0..cfg.max_iters {
        if g.norm() <= cfg.grad_tol {
            return LbfgsOutcome { x, f, g, iters: iter, converged: true };
        }
        if !f.is_finite() {
            break;
        }

        let mut direction = two_loop(&g, &history);
        if g.dot(&direction) >= 0.0 {
            history.clear();
            direction = -&g;
        }
        let alpha0 = if history.is_empty() { (1.0 / g.norm()).min(1.0) } else { 1.0 };

        let probe = match strong_wolfe(&x, f, &g, &direction, alpha0, &mut oracle, cfg) {
            Some(p) => p,
            None if !history.is_empty() => {
                history.clear();
                let steepest = -&g;
                match strong_wolfe(&x, f, &g, &steepest, (1.0 / g.norm()).min(1.0), &mut oracle, cfg) {
                    Some(p) => p,
                    None => return LbfgsOutcome { x, f, g, iters: iter, converged: false },
                }
            }
            None => return LbfgsOutcome { x, f, g, iters: iter, converged: false },
        };

        let s = &probe.x - &x;
        let yv = &probe.g - &g;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            history.push_back((s, yv, 1.0 / sy));
        }
        x = probe.x;
        f = probe.f;
        g = probe.g;
    }
    let converged = g.norm() <= cfg.grad_tol;
    LbfgsOutcome { x, f, g, iters: cfg.max_iters, converged }
}

fn two_loop(g: &DVector<f64>, history: &VecDeque<(DVector<f64>, DVector<f64>, f64)>) -> DVector<f64> {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * s.dot(&q);
        q.axpy(-a, y, 1.0);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        q *= s.dot(y) / y.norm_squared();
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * y.dot(&q);
        q.axpy(a - b, s, 1.0);
    }
    -q
}

fn strong_wolfe<F>(
    x: &DVector<f64>,
    f0: f64,
    g0: &DVector<f64>,
    d: &DVector<f64>,
    alpha0: f64,
    oracle: &mut F,
    cfg: &InnerSolverConfig,
) -> Option<Probe>
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let slope0 = g0.dot(d);
    if !(slope0 < 0.0) {
        return None;
    }
    let mut eval = |alpha: f64| -> Probe {
        let xa = x + alpha * d;
        let (fa, ga) = oracle(&xa);
        let slope = ga.dot(d);
        Probe { alpha, f: fa, slope, x: xa, g: ga }
    };
    let armijo = |p: &Probe| p.f <= f0 + cfg.wolfe_c1 * p.alpha * slope0;
    let curvature = |p: &Probe| p.slope.abs() <= -cfg.wolfe_c2 * slope0;

    let origin = Probe { alpha: 0.0, f: f0, slope: slope0, x: x.clone(), g: g0.clone() };
    let mut prev = origin;
    let mut alpha = alpha0;
    for i in 0..MAX_BRACKET_STEPS {
        let cur = eval(alpha);
        if !cur.f.is_finite() {
            // shrink back towards the last finite point
            alpha = 0.5 * (prev.alpha + alpha);
            continue;
        }
        if approx_wolfe(&cur, f0, slope0, cfg) {
            return Some(cur);
        }
        if !armijo(&cur) || (i > 0 && cur.f >= prev.f) {
            return zoom(prev, cur, f0, slope0, &mut eval, cfg);
        }
        if curvature(&cur) {
            return Some(cur);
        }
        if cur.slope >= 0.0 {
            return zoom(cur, prev, f0, slope0, &mut eval, cfg);
        }
        prev = cur;
        alpha *= 2.0;
    }
    None
}

fn zoom<E>(
    mut lo: Probe,
    mut hi: Probe,
    f0: f64,
    slope0: f64,
    eval: &mut E,
    cfg: &InnerSolverConfig,
) -> Option<Probe>
where
    E: FnMut(f64) -> Probe,
{
    for _ in 0..MAX_ZOOM_STEPS {
        let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
        let width = b - a;
        if width <= f64::EPSILON * b.max(1.0) {
            break;
        }
        let mut alpha = cubic_minimizer(&lo, &hi).unwrap_or(0.5 * (a + b));
        if !(alpha > a + 0.1 * width && alpha < b - 0.1 * width) {
            alpha = 0.5 * (a + b);
        }
        let cur = eval(alpha);
        if approx_wolfe(&cur, f0, slope0, cfg) {
            return Some(cur);
        }
        if !cur.f.is_finite() || cur.f > f0 + cfg.wolfe_c1 * alpha * slope0 || cur.f >= lo.f {
            hi = cur;
        } else {
            if cur.slope.abs() <= -cfg.wolfe_c2 * slope0 {
                return Some(cur);
            }
            if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    // Accept the best sufficient-decrease point found, if any.
    (lo.alpha > 0.0 && lo.f < f0).then_some(lo)
}

/// Close to a minimizer the decrease demanded by the Armijo test drops below
/// the rounding error in `f`. The derivative-based conditions
/// `c2 φ'(0) <= φ'(α) <= (2 c1 - 1) φ'(0)` together with `φ(α) <= φ(0) + ε`
/// still identify an acceptable step there.
fn approx_wolfe(p: &Probe, f0: f64, slope0: f64, cfg: &InnerSolverConfig) -> bool {
    p.f.is_finite()
        && p.f <= f0 + APPROX_F_REL * f0.abs()
        && p.slope >= cfg.wolfe_c2 * slope0
        && p.slope <= (2.0 * cfg.wolfe_c1 - 1.0) * slope0
}

fn cubic_minimizer(p: &Probe, q: &Probe) -> Option<f64> {
    let d1 = p.slope + q.slope - 3.0 * (p.f - q.f) / (p.alpha - q.alpha);
    let disc = d1 * d1 - p.slope * q.slope;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (q.alpha - p.alpha).signum() * disc.sqrt();
    let denom = q.slope - p.slope + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let alpha = q.alpha - (q.alpha - p.alpha) * (q.slope + d2 - d1) / denom;
    alpha.is_finite().then_some(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dvector, DMatrix};

    #[test]
    fn rosenbrock() {
        let cfg = InnerSolverConfig { max_iters: 500, ..Default::default() };
        let out = minimize(
            dvector![-1.2, 1.0],
            |x: &DVector<f64>| {
                let (a, b) = (x[0], x[1]);
                let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
                let g = dvector![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
                (f, g)
            },
            &cfg,
        );
        assert!(out.converged);
        assert!((out.x - dvector![1.0, 1.0]).norm() < 1e-6);
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let h = DMatrix::from_diagonal(&dvector![1.0, 10.0, 100.0, 1000.0]);
        let b = dvector![1.0, -2.0, 3.0, -4.0];
        let out = minimize(
            DVector::zeros(4),
            |x: &DVector<f64>| {
                let hx = &h * x;
                (0.5 * x.dot(&hx) - b.dot(x), hx - &b)
            },
            &InnerSolverConfig::default(),
        );
        assert!(out.converged);
        let expected = dvector![1.0, -0.2, 0.03, -0.004];
        assert!((out.x - expected).norm() < 1e-9);
    }

    #[test]
    fn converges_under_a_large_offset() {
        // f = 1e8 + |x - c|^2 / 2: the last steps change f by far less than
        // its rounding error, yet the gradient can still be driven to 1e-8.
        let c = dvector![0.3, -1.7, 2.2];
        let out = minimize(
            DVector::zeros(3),
            |x: &DVector<f64>| {
                let r = x - &c;
                (1e8 + 0.5 * r.norm_squared(), r)
            },
            &InnerSolverConfig::default(),
        );
        assert!(out.converged);
        assert!((out.x - c).norm() <= 1e-8);
    }
}
