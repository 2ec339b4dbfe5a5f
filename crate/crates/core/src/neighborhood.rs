//! Discrete neighborhoods of a feasible pair `(x, y)`.
//!
//! `N_rho(x, y)` holds every admissible pattern `ŷ` within Hamming distance
//! `rho` of `y`, paired with `x̂ = H_J(x)`: `x` with the flipped coordinates
//! `J = {i : y_i != ŷ_i}` set to zero. The projected variant additionally
//! maps `x̂` onto `X(ŷ)`.
//!
//! Neighborhoods are produced lazily. At `n = 123, rho = 4` there are
//! millions of members and the search consumes them one at a time.

use itertools::Itertools;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{support, Iterate, Pattern, SparseProblem, SupportSet};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `x̂ = H_J(x)`.
    Plain,
    /// `x̂ = Π_{X(ŷ)}(H_J(x))`; identical to `Plain` when `X = R^n`.
    #[default]
    Projected,
}

/// Order in which neighbors are produced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborOrder {
    /// By `|J|`, then lexicographically by the sorted flip set. `J = ∅` first.
    Lexicographic,
    /// By `|J|`; within a size, flips that free coordinates with large
    /// `|∇_i f(x)|` and fix coordinates with small `|x_i|` come first.
    /// `J = ∅` is produced last.
    #[default]
    GradientGuided,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborhoodSpec {
    pub rho: usize,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub ordering: NeighborOrder,
}

impl NeighborhoodSpec {
    pub fn new(rho: usize) -> Self {
        Self { rho, variant: Variant::default(), ordering: NeighborOrder::default() }
    }

    pub fn with_ordering(mut self, ordering: NeighborOrder) -> Self {
        self.ordering = ordering;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.rho > n {
            return Err(Error::InvalidConfig(format!("radius {} exceeds dimension {n}", self.rho)));
        }
        Ok(())
    }
}

/// A member of the neighborhood together with its flip set `J(y, ŷ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    pub iterate: Iterate,
    pub flipped: Vec<usize>,
}

pub fn hamming(y: &Pattern, yhat: &Pattern) -> Result<usize> {
    if y.len() != yhat.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), found: yhat.len() });
    }
    Ok(y.bits().iter().zip(yhat.bits()).filter(|(a, b)| a != b).count())
}

/// `H_J(x)`.
pub fn zero_map(x: &DVector<f64>, flipped: &[usize]) -> DVector<f64> {
    let mut z = x.clone();
    for &i in flipped {
        z[i] = 0.0;
    }
    z
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// `e'y - (n - s)`: how many more coordinates may be freed than fixed.
fn slack(y: &Pattern, s: usize) -> i64 {
    y.fixed_count() as i64 + s as i64 - y.len() as i64
}

fn split_is_admissible(freed: usize, fixed: usize, slack: i64) -> bool {
    freed as i64 - fixed as i64 <= slack
}

/// Number of members of `N_rho(x, y)`; used to guard exhaustive scans.
pub fn neighborhood_size(y: &Pattern, s: usize, rho: usize) -> u128 {
    let fixed = y.fixed_count();
    let free = y.len() - fixed;
    let slack = slack(y, s);
    let mut total: u128 = 0;
    for k in 0..=rho {
        for a in 0..=k.min(fixed) {
            let b = k - a;
            if b <= free && split_is_admissible(a, b, slack) {
                total = total.saturating_add(binomial(fixed, a).saturating_mul(binomial(free, b)));
            }
        }
    }
    total
}

type FlipSets = Box<dyn Iterator<Item = Vec<usize>> + Send>;

/// Lazy cursor over `N_rho(x, y)` (or its projected variant).
pub struct Neighbors<'a> {
    x: DVector<f64>,
    y: Pattern,
    variant: Variant,
    problem: &'a SparseProblem,
    flips: FlipSets,
}

impl Iterator for Neighbors<'_> {
    type Item = Neighbor;

    fn next(&mut self) -> Option<Neighbor> {
        let flipped = self.flips.next()?;
        let yhat = self.y.flipped(&flipped);
        let mut xhat = zero_map(&self.x, &flipped);
        if self.variant == Variant::Projected {
            xhat = self.problem.feasible_set().project_onto(&xhat, &yhat);
        }
        Some(Neighbor { iterate: Iterate::new(xhat, yhat), flipped })
    }
}

/// Enumerates `N_rho(x, y)` lazily. Every admissible `ŷ` with
/// `d_H(ŷ, y) <= rho` is produced exactly once, including `ŷ = y`.
pub fn enumerate<'a>(
    x: &DVector<f64>,
    y: &Pattern,
    spec: &NeighborhoodSpec,
    p: &'a SparseProblem,
) -> Result<Neighbors<'a>> {
    p.check_dim(x.len())?;
    p.check_dim(y.len())?;
    spec.validate(p.n())?;
    let flips = match spec.ordering {
        NeighborOrder::Lexicographic => lexicographic_flips(y, p.s(), spec.rho),
        NeighborOrder::GradientGuided => {
            let (_, g) = p.eval(x);
            guided_flips(x, &g, y, p.s(), spec.rho)
        }
    };
    Ok(Neighbors { x: x.clone(), y: y.clone(), variant: spec.variant, problem: p, flips })
}

fn lexicographic_flips(y: &Pattern, s: usize, rho: usize) -> FlipSets {
    let n = y.len();
    let slack = slack(y, s);
    let fixed: Vec<bool> = y.bits().to_vec();
    Box::new((0..=rho).flat_map(move |k| (0..n).combinations(k)).filter(move |j| {
        let freed = j.iter().filter(|&&i| fixed[i]).count();
        split_is_admissible(freed, j.len() - freed, slack)
    }))
}

fn guided_flips(x: &DVector<f64>, g: &DVector<f64>, y: &Pattern, s: usize, rho: usize) -> FlipSets {
    let slack = slack(y, s);

    // candidates to free, largest |g_i| first
    let mut to_free = y.fixed_indices();
    to_free.sort_by(|&a, &b| g[b].abs().total_cmp(&g[a].abs()).then(a.cmp(&b)));
    // candidates to fix, smallest |x_i| first
    let mut to_fix = y.free_indices();
    to_fix.sort_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs()).then(a.cmp(&b)));

    let mut splits = Vec::new();
    for k in 1..=rho {
        for a in (0..=k).rev() {
            let b = k - a;
            if a <= to_free.len() && b <= to_fix.len() && split_is_admissible(a, b, slack) {
                splits.push((a, b));
            }
        }
    }

    let moves = splits.into_iter().flat_map(move |(a, b)| {
        let to_fix = to_fix.clone();
        to_free.clone().into_iter().combinations(a).flat_map(move |freed| {
            to_fix.clone().into_iter().combinations(b).map(move |fixed| {
                let mut j: Vec<usize> = freed.iter().copied().chain(fixed).collect();
                j.sort_unstable();
                j
            })
        })
    });
    Box::new(moves.chain(std::iter::once(Vec::new())))
}

/// Number of super supports of a point with `delta` nonzeros: `C(n - delta, s - delta)`.
pub fn super_support_count(n: usize, s: usize, delta: usize) -> u128 {
    if delta > s {
        return 0;
    }
    binomial(n - delta, s - delta)
}

/// Every super support `J ⊇ I_1(x)` with `|J| = s`, paired with the pattern
/// that frees exactly `J`. This is the family `N̄(x)`.
pub fn super_support_patterns(
    x: &DVector<f64>,
    p: &SparseProblem,
) -> Result<impl Iterator<Item = (SupportSet, Pattern)> + Send> {
    p.check_dim(x.len())?;
    let n = p.n();
    let s = p.s();
    let supp = support(x, 0.0);
    if supp.len() > s {
        return Err(Error::TooDense { nonzeros: supp.len(), budget: s });
    }
    let rest: Vec<usize> = (0..n).filter(|i| !supp.contains(i)).collect();
    let extra = s - supp.len();
    Ok(rest.into_iter().combinations(extra).map(move |add| {
        let set = SupportSet::new(supp.iter().copied().chain(add).collect());
        let pattern = set.pattern(n);
        (set, pattern)
    }))
}
