//! Exhaustive global optimum over all supports of size `s`.

use itertools::Itertools;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{minimize_restricted, InnerSolverConfig};
use crate::error::{Error, Result};
use crate::neighborhood::binomial;
use crate::problem::{SparseProblem, SupportSet};

/// Largest number of supports the oracle will enumerate.
pub const ORACLE_CAP: u128 = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub support: SupportSet,
    pub supports_checked: usize,
    /// Every restricted subproblem met the inner solver's tolerance.
    pub all_converged: bool,
}

impl OracleResult {
    pub fn x(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x)
    }
}

/// Minimizes `f` over every `s`-subset of coordinates and returns the best.
/// Values within a relative `1e-12` of each other count as ties, which go
/// to the lexicographically smallest support.
pub fn brute_force_oracle(p: &SparseProblem, cfg: &InnerSolverConfig) -> Result<OracleResult> {
    let (n, s) = (p.n(), p.s());
    let count = binomial(n, s);
    if count > ORACLE_CAP {
        return Err(Error::CapExceeded { count, cap: ORACLE_CAP });
    }
    let supports: Vec<Vec<usize>> = (0..n).combinations(s).collect();
    let warm = DVector::zeros(n);
    let solved: Vec<_> = supports
        .par_iter()
        .map(|j| minimize_restricted(p, j, &warm, cfg))
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (k, sol) in solved.iter().enumerate().skip(1) {
        let incumbent = solved[best].f;
        if sol.f < incumbent - 1e-12 * incumbent.abs().max(1.0) {
            best = k;
        }
    }
    let sol = &solved[best];
    Ok(OracleResult {
        x: sol.x.as_slice().to_vec(),
        f: sol.f,
        support: SupportSet::new(supports[best].clone()),
        supports_checked: supports.len(),
        all_converged: solved.iter().all(|s| s.converged),
    })
}
