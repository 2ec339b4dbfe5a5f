//! Problem abstraction for `min f(x)  s.t. ||x||_0 <= s, x in X`.
//!
//! The cardinality constraint is handled through its mixed-integer
//! reformulation: a binary [`Pattern`] `y` marks coordinates forced to zero,
//! admissible patterns satisfy `e'y >= n - s`, and for a fixed pattern the
//! continuous feasible set is the convex set `X(y) = { x in X : x_i y_i = 0 }`.
//!
//! Indices are 0-based throughout.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A continuously differentiable objective with a combined value/gradient oracle.
///
/// Implementations must be reentrant: solvers running in parallel share one
/// objective behind an `Arc`.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>);

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.value_and_gradient(x).0
    }

    /// A Lipschitz constant of the gradient, if one is cheaply available.
    fn lipschitz(&self) -> Option<f64> {
        None
    }
}

/// Objective backed by a closure. Mostly useful in tests and examples.
pub struct FnObjective<F> {
    dim: usize,
    oracle: F,
    lipschitz: Option<f64>,
}

impl<F> FnObjective<F>
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>) + Send + Sync,
{
    pub fn new(dim: usize, oracle: F) -> Self {
        Self { dim, oracle, lipschitz: None }
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }
}

impl<F> Objective for FnObjective<F>
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        (self.oracle)(x)
    }

    fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }
}

/// The convex set `X`. Only sets with closed-form projections onto `X(y)`
/// are supported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeasibleSet {
    /// `X = R^n`.
    Full,
    /// Axis-aligned box `[lower, upper]`; every interval must contain 0 so
    /// that zeroing a coordinate never leaves the box.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Euclidean ball of the given radius centred at the origin.
    Ball { radius: f64 },
}

impl FeasibleSet {
    pub fn uniform_box(n: usize, lower: f64, upper: f64) -> Self {
        FeasibleSet::Box { lower: vec![lower; n], upper: vec![upper; n] }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FeasibleSet::Full => "full",
            FeasibleSet::Box { .. } => "box",
            FeasibleSet::Ball { .. } => "ball",
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            FeasibleSet::Full => Ok(()),
            FeasibleSet::Box { lower, upper } => {
                if lower.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: lower.len() });
                }
                if upper.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: upper.len() });
                }
                for (i, (&l, &u)) in lower.iter().zip(upper).enumerate() {
                    if !(l <= 0.0 && 0.0 <= u) {
                        return Err(Error::InvalidConfig(format!(
                            "box interval {i} is [{l}, {u}], which does not contain 0"
                        )));
                    }
                }
                Ok(())
            }
            FeasibleSet::Ball { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidConfig(format!("ball radius {radius} must be positive")));
                }
                Ok(())
            }
        }
    }

    /// Projection onto `X(y)`. Coordinates fixed by `y` are set to exact zero.
    pub fn project_onto(&self, x: &DVector<f64>, y: &Pattern) -> DVector<f64> {
        let mut z = x.clone();
        for i in y.fixed_indices() {
            z[i] = 0.0;
        }
        match self {
            FeasibleSet::Full => {}
            FeasibleSet::Box { lower, upper } => {
                for i in 0..z.len() {
                    if !y.is_fixed(i) {
                        z[i] = z[i].clamp(lower[i], upper[i]);
                    }
                }
            }
            FeasibleSet::Ball { radius } => {
                // X(y) is the ball intersected with a coordinate subspace
                // through its centre, so zero-then-rescale is exact.
                let norm = z.norm();
                if norm > *radius {
                    z *= *radius / norm;
                }
            }
        }
        z
    }

    /// Projection onto `X` itself.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        self.project_onto(x, &Pattern::all_free(x.len()))
    }
}

/// Binary pattern `y`: `y_i = 1` forces `x_i = 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Pattern {
    bits: Vec<bool>,
}

impl Pattern {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Builds a pattern from 0/1 integers, e.g. `Pattern::from_bits(&[0, 0, 1])`.
    pub fn from_bits(bits: &[u8]) -> Self {
        Self { bits: bits.iter().map(|&b| b != 0).collect() }
    }

    /// Pattern with no fixed coordinates.
    pub fn all_free(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    /// Pattern whose free coordinates are exactly `free`.
    pub fn with_free(n: usize, free: &[usize]) -> Self {
        let mut bits = vec![true; n];
        for &i in free {
            bits[i] = false;
        }
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_fixed(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// `e'y`.
    pub fn fixed_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// `I_0(y)`: coordinates allowed to be nonzero.
    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.bits[i]).collect()
    }

    /// `I_1(y)`: coordinates forced to zero.
    pub fn fixed_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.bits[i]).collect()
    }

    /// Admissibility `e'y >= n - s`.
    pub fn is_admissible(&self, s: usize) -> bool {
        self.fixed_count() + s >= self.len()
    }

    /// Copy of the pattern with the listed coordinates toggled.
    pub fn flipped(&self, indices: &[usize]) -> Pattern {
        let mut bits = self.bits.clone();
        for &i in indices {
            bits[i] = !bits[i];
        }
        Pattern { bits }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl From<Pattern> for String {
    fn from(p: Pattern) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for Pattern {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, Self::Error> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("invalid pattern character {other:?}")),
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Pattern::new)
    }
}

/// A pair `(x, y)` of the mixed-integer reformulation.
#[derive(Clone, Debug, PartialEq)]
pub struct Iterate {
    pub x: DVector<f64>,
    pub y: Pattern,
}

impl Iterate {
    pub fn new(x: DVector<f64>, y: Pattern) -> Self {
        Self { x, y }
    }

    /// `max_i |x_i y_i|`.
    pub fn complementarity_violation(&self) -> f64 {
        self.y.fixed_indices().into_iter().map(|i| self.x[i].abs()).fold(0.0, f64::max)
    }
}

/// An ordered index set of size `s` containing the support of a point.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupportSet(Vec<usize>);

impl SupportSet {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// Pattern with zeros exactly on this set.
    pub fn pattern(&self, n: usize) -> Pattern {
        Pattern::with_free(n, &self.0)
    }
}

/// The sparsity-constrained problem: objective, dimension, budget and `X`.
#[derive(Clone)]
pub struct SparseProblem {
    n: usize,
    s: usize,
    objective: Arc<dyn Objective>,
    feasible_set: FeasibleSet,
    lipschitz_hint: Option<f64>,
}

impl fmt::Debug for SparseProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SparseProblem")
            .field("n", &self.n)
            .field("s", &self.s)
            .field("feasible_set", &self.feasible_set)
            .field("lipschitz_hint", &self.lipschitz_hint)
            .finish_non_exhaustive()
    }
}

impl SparseProblem {
    /// Problem over `X = R^n`. Budgets `0 <= s <= n` are accepted; `s = n`
    /// and `s = 0` are degenerate but useful for oracles and baselines.
    pub fn new(objective: Arc<dyn Objective>, s: usize) -> Result<Self> {
        let n = objective.dim();
        if n == 0 {
            return Err(Error::InvalidConfig("problem dimension must be positive".into()));
        }
        if s > n {
            return Err(Error::InvalidConfig(format!("sparsity budget {s} exceeds dimension {n}")));
        }
        let lipschitz_hint = objective.lipschitz();
        Ok(Self { n, s, objective, feasible_set: FeasibleSet::Full, lipschitz_hint })
    }

    pub fn with_feasible_set(mut self, set: FeasibleSet) -> Result<Self> {
        set.validate(self.n)?;
        self.feasible_set = set;
        Ok(self)
    }

    pub fn with_lipschitz_hint(mut self, l: Option<f64>) -> Self {
        self.lipschitz_hint = l;
        self
    }

    /// Same objective and set with a different budget.
    pub fn with_budget(&self, s: usize) -> Result<Self> {
        if s > self.n {
            return Err(Error::InvalidConfig(format!("sparsity budget {s} exceeds dimension {}", self.n)));
        }
        Ok(Self { s, ..self.clone() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn objective(&self) -> &Arc<dyn Objective> {
        &self.objective
    }

    pub fn feasible_set(&self) -> &FeasibleSet {
        &self.feasible_set
    }

    pub fn lipschitz_hint(&self) -> Option<f64> {
        self.lipschitz_hint
    }

    pub fn eval(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        self.objective.value_and_gradient(x)
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.objective.value(x)
    }

    pub(crate) fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: len });
        }
        Ok(())
    }
}

/// `I_1(x)`: indices with `|x_i| > zero_tol`. Entries exactly at the
/// tolerance count as zero.
pub fn support(x: &DVector<f64>, zero_tol: f64) -> Vec<usize> {
    x.iter().enumerate().filter(|(_, v)| v.abs() > zero_tol).map(|(i, _)| i).collect()
}

/// Feasibility of `(x, y)` for the mixed-integer reformulation.
pub fn is_feasible_pair(it: &Iterate, p: &SparseProblem, tol: f64) -> Result<bool> {
    p.check_dim(it.x.len())?;
    p.check_dim(it.y.len())?;
    if !it.y.is_admissible(p.s()) {
        return Ok(false);
    }
    if it.complementarity_violation() > tol {
        return Ok(false);
    }
    let proj = p.feasible_set().project(&it.x);
    Ok((&it.x - proj).norm() <= tol)
}

/// Feasibility of `x` alone: `||x||_0 <= s` and `x ∈ X`.
pub fn is_feasible_point(x: &DVector<f64>, p: &SparseProblem, tol: f64) -> Result<bool> {
    p.check_dim(x.len())?;
    if support(x, 0.0).len() > p.s() {
        return Ok(false);
    }
    Ok((x - p.feasible_set().project(x)).norm() <= tol)
}

/// `Π_{X(y)}(x)`.
pub fn project_pattern(x: &DVector<f64>, y: &Pattern, p: &SparseProblem) -> Result<DVector<f64>> {
    p.check_dim(x.len())?;
    p.check_dim(y.len())?;
    Ok(p.feasible_set().project_onto(x, y))
}

/// `||x - Π_{X(y)}(x - ∇f(x))||`, zero exactly at stationary points of
/// `min f` over `X(y)`.
pub fn stationarity_residual(x: &DVector<f64>, y: &Pattern, p: &SparseProblem) -> f64 {
    let (_, g) = p.eval(x);
    residual_with_gradient(x, &g, y, p)
}

pub(crate) fn residual_with_gradient(
    x: &DVector<f64>,
    g: &DVector<f64>,
    y: &Pattern,
    p: &SparseProblem,
) -> f64 {
    let target = x - g;
    (x - p.feasible_set().project_onto(&target, y)).norm()
}
