//! Sparsity-constrained minimization: `min f(x)` subject to `||x||_0 <= s`
//! and `x ∈ X`.
//!
//! The main solver is Sparse Neighborhood Search ([`sns_solve`]), which
//! alternates projected-gradient steps within a fixed zero pattern with a
//! search over nearby patterns. Penalty Decomposition and Greedy
//! Sparse-Simplex baselines, optimality certificates, objective
//! instances and a benchmarking harness are included.

// `!(a > b)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod linesearch;
pub mod neighborhood;
pub mod objectives;
pub mod oracle;
pub mod problem;
pub mod profile;
pub mod report;
pub mod sns;
pub mod stationarity;
pub mod suite;

pub use baselines::{gss_solve, minimize_restricted, pd_solve, GssConfig, InnerSolverConfig, PdConfig};
pub use error::{Error, Result};
pub use linesearch::{pgls, PglsConfig, PglsStep};
pub use neighborhood::{enumerate, NeighborOrder, NeighborhoodSpec, Variant};
pub use objectives::{Dataset, LeastSquaresObjective, LogisticObjective};
pub use oracle::{brute_force_oracle, OracleResult};
pub use problem::{
    is_feasible_pair, is_feasible_point, project_pattern, stationarity_residual, support, FeasibleSet, FnObjective, Iterate, Objective,
    Pattern, SparseProblem, SupportSet,
};
pub use profile::{performance_profile, FailureRule, ProfileMetric, ProfileTable};
pub use report::{RunReport, Termination, TracePoint};
pub use sns::{initial_pattern, sns_from_origin, sns_solve, SnsConfig};
pub use stationarity::{Certificate, CertificateKind};
pub use suite::{run_suite, SuiteConfig};
