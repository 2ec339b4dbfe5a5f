//! Config-driven benchmark suites: instances × budgets × solvers, run in a
//! worker pool, one JSON report per cell plus a CSV summary.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{gss_solve, pd_solve, GssConfig, InnerSolverConfig, PdConfig};
use crate::error::{Error, Result};
use crate::neighborhood::NeighborhoodSpec;
use crate::objectives::{load_csv, load_libsvm, synth_planted, CsvSchema, LeastSquaresObjective, LogisticObjective, PlantedKind};
use crate::oracle::{brute_force_oracle, OracleResult};
use crate::problem::{support, FeasibleSet, Iterate, Objective, Pattern, SparseProblem};
use crate::report::{RunReport, Termination};
use crate::sns::{initial_pattern, sns_solve, SnsConfig};
use crate::stationarity::{check_bf, check_n_stationary, check_proj_stationary, default_tol_f, DEFAULT_TOL_R};

/// Where an instance's objective comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum InstanceSource {
    Planted { planted: PlantedKind, n: usize, s_true: usize, rows: usize, #[serde(default)] noise: f64, seed: u64 },
    /// Logistic regression on a CSV file.
    Csv { path: PathBuf, schema: CsvSchema },
    /// Logistic regression on a sparse `label index:value` file.
    Libsvm { path: PathBuf, #[serde(default)] n_features: Option<usize> },
    /// Least squares with an explicit row-major matrix.
    LeastSquares { rows: usize, cols: usize, a: Vec<f64>, b: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub id: String,
    #[serde(flatten)]
    pub source: InstanceSource,
    /// Sparsity budgets to run; each gives a separate problem.
    #[serde(default)]
    pub budgets: Vec<usize>,
    #[serde(default)]
    pub feasible_set: Option<FeasibleSet>,
}

impl InstanceSpec {
    /// Reads one instance from TOML or JSON, chosen by file extension.
    pub fn load(path: &Path) -> Result<Self> {
        read_config(path)
    }

    /// Builds the objective. Relative paths resolve against `base`.
    pub fn objective(&self, base: &Path) -> Result<Arc<dyn Objective>> {
        Ok(match &self.source {
            InstanceSource::Planted { planted, n, s_true, rows, noise, seed } => {
                synth_planted(*planted, *n, *s_true, *rows, *noise, *seed)?.objective
            }
            InstanceSource::Csv { path, schema } => Arc::new(LogisticObjective::new(load_csv(&base.join(path), schema)?)),
            InstanceSource::Libsvm { path, n_features } => {
                Arc::new(LogisticObjective::new(load_libsvm(&base.join(path), *n_features)?))
            }
            InstanceSource::LeastSquares { rows, cols, a, b } => {
                if a.len() != rows * cols {
                    return Err(Error::DimensionMismatch { expected: rows * cols, found: a.len() });
                }
                let a = nalgebra::DMatrix::from_row_slice(*rows, *cols, a);
                Arc::new(LeastSquaresObjective::new(a, DVector::from_column_slice(b))?)
            }
        })
    }

    pub fn problem(&self, base: &Path, s: usize) -> Result<SparseProblem> {
        let p = SparseProblem::new(self.objective(base)?, s)?;
        match &self.feasible_set {
            Some(set) => p.with_feasible_set(set.clone()),
            None => Ok(p),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum SolverSpec {
    Sns {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        rho: Option<usize>,
        #[serde(default)]
        config: SnsConfig,
    },
    Pd {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        config: PdConfig,
    },
    Gss {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        config: GssConfig,
    },
}

impl SolverSpec {
    pub fn sns(rho: usize) -> Self {
        SolverSpec::Sns { name: None, rho: Some(rho), config: SnsConfig::default() }
    }

    /// Label used in reports and profiles.
    pub fn label(&self) -> String {
        match self {
            SolverSpec::Sns { name: Some(n), .. } | SolverSpec::Pd { name: Some(n), .. } | SolverSpec::Gss { name: Some(n), .. } => n.clone(),
            SolverSpec::Sns { rho, config, .. } => format!("sns-rho{}", rho.unwrap_or(config.neighborhood.rho)),
            SolverSpec::Pd { .. } => "pd".into(),
            SolverSpec::Gss { .. } => "gss".into(),
        }
    }

    fn with_time_limit(&self, limit: Option<f64>) -> Self {
        let mut s = self.clone();
        if let Some(t) = limit {
            match &mut s {
                SolverSpec::Sns { config, .. } => config.time_limit_secs = t,
                SolverSpec::Pd { config, .. } => config.time_limit_secs = t,
                SolverSpec::Gss { config, .. } => config.time_limit_secs = t,
            }
        }
        s
    }

    /// Runs this solver from `x0 = 0` and attaches certificates if asked.
    pub fn run(&self, p: &SparseProblem, certify: bool) -> Result<RunReport> {
        let x0 = DVector::zeros(p.n());
        let mut report = match self {
            SolverSpec::Sns { rho, config, .. } => {
                let mut cfg = config.clone();
                if let Some(r) = rho {
                    cfg.neighborhood = NeighborhoodSpec { rho: *r, ..cfg.neighborhood };
                }
                let y0 = initial_pattern(p, &x0)?;
                sns_solve(p, &Iterate::new(x0, y0), &cfg)?
            }
            SolverSpec::Pd { config, .. } => pd_solve(p, &Iterate::new(x0, Pattern::all_free(p.n())), config)?,
            SolverSpec::Gss { config, .. } => gss_solve(p, &Iterate::new(x0, Pattern::all_free(p.n())), config)?,
        };
        report.solver = self.label();
        if certify {
            attach_certificates(&mut report, p, self)?;
        }
        Ok(report)
    }
}

/// Projection stationarity on the final pattern, basic feasibility, and for
/// SNS the N-stationarity check with the solver's own neighborhood.
pub fn attach_certificates(report: &mut RunReport, p: &SparseProblem, solver: &SolverSpec) -> Result<()> {
    let x = report.x_final();
    let pattern = report.pattern_final.clone().unwrap_or_else(|| Pattern::with_free(p.n(), &support(&x, 0.0)));
    report.certificates.push(check_proj_stationary(&x, &pattern, p, DEFAULT_TOL_R)?);
    if let SolverSpec::Sns { rho, config, .. } = solver {
        let spec = NeighborhoodSpec { rho: rho.unwrap_or(config.neighborhood.rho), ..config.neighborhood };
        report.certificates.push(check_n_stationary(&x, &pattern, p, &spec, default_tol_f(report.f_final), DEFAULT_TOL_R)?);
    }
    if support(&x, 0.0).len() <= p.s() {
        report.certificates.push(check_bf(&x, p, DEFAULT_TOL_R)?);
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub instances: Vec<InstanceSpec>,
    pub solvers: Vec<SolverSpec>,
    /// Worker threads; 1 runs cells sequentially.
    #[serde(default = "one")]
    pub workers: usize,
    /// Overrides every solver's time limit.
    #[serde(default)]
    pub time_limit_secs: Option<f64>,
    #[serde(default = "yes")]
    pub certify: bool,
    /// Also compute the brute-force optimum where it is affordable.
    #[serde(default)]
    pub oracle: bool,
    #[serde(default)]
    pub oracle_inner: InnerSolverConfig,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl SuiteConfig {
    /// Reads TOML or JSON, chosen by file extension.
    pub fn load(path: &Path) -> Result<Self> {
        read_config(path)
    }
}

/// Parses TOML, or JSON when the extension is `.json`.
pub fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        Ok(serde_json::from_str(&text)?)
    } else {
        toml::from_str(&text).map_err(|e| Error::Data { path: path.to_path_buf(), reason: e.to_string() })
    }
}

/// One `(instance, budget)` problem with its optional oracle.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub instance: String,
    pub s: usize,
    pub oracle: Option<OracleResult>,
}

#[derive(Clone, Debug)]
pub struct SuiteOutcome {
    pub reports: Vec<RunReport>,
    pub problems: Vec<ProblemSummary>,
    /// `(cell id, error)` for cells that failed.
    pub failures: Vec<(String, String)>,
}

fn cell_id(instance: &str, s: usize) -> String {
    format!("{instance}/s{s}")
}

fn file_stem(id: &str, solver: &str) -> String {
    format!("{id}__{solver}").replace(['/', '\\', ' '], "_")
}

/// Runs every `(instance, budget, solver)` cell. `base` anchors relative
/// data paths. Reports are written to `out` when given.
pub fn run_suite(cfg: &SuiteConfig, base: &Path, out: Option<&Path>) -> Result<SuiteOutcome> {
    if cfg.solvers.is_empty() {
        return Err(Error::NothingToRun("the suite lists no solvers".into()));
    }
    if cfg.instances.is_empty() || cfg.instances.iter().all(|i| i.budgets.is_empty()) {
        return Err(Error::NothingToRun("the suite lists no instances".into()));
    }
    if cfg.workers == 0 {
        return Err(Error::InvalidConfig("workers must be positive".into()));
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }

    // Problems are built up front so that data errors surface per problem.
    let mut problems = Vec::new();
    let mut failures = Vec::new();
    for inst in &cfg.instances {
        for &s in &inst.budgets {
            let id = cell_id(&inst.id, s);
            match inst.problem(base, s) {
                Ok(p) => problems.push((id, s, p)),
                Err(e) => failures.push((id, e.to_string())),
            }
        }
    }

    let contended = cfg.workers > 1;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let cells: Vec<(usize, &SolverSpec)> = (0..problems.len()).flat_map(|k| cfg.solvers.iter().map(move |sv| (k, sv))).collect();

    type Cells = Vec<(String, Result<RunReport>)>;
    let (results, oracles): (Cells, Vec<Option<OracleResult>>) = pool.install(|| {
        let results = cells
            .par_iter()
            .map(|&(k, solver)| {
                let (id, _, p) = &problems[k];
                let solver = solver.with_time_limit(cfg.time_limit_secs);
                let r = solver.run(p, cfg.certify).map(|mut r| {
                    r.instance = id.clone();
                    r.contended = contended;
                    r
                });
                (format!("{id} / {}", solver.label()), r)
            })
            .collect();
        let oracles = problems
            .iter()
            .map(|(id, _, p)| {
                if !cfg.oracle {
                    return None;
                }
                match brute_force_oracle(p, &cfg.oracle_inner) {
                    Ok(o) => Some(o),
                    Err(e) => {
                        log::warn!("no oracle for {id}: {e}");
                        None
                    }
                }
            })
            .collect();
        (results, oracles)
    });

    let mut reports = Vec::new();
    for ((cell, result), &(k, solver)) in results.into_iter().zip(&cells) {
        let report = match result {
            Ok(r) => r,
            Err(e) => {
                failures.push((cell, e.to_string()));
                let (id, s, p) = &problems[k];
                RunReport {
                    solver: solver.label(),
                    instance: id.clone(),
                    n: p.n(),
                    s: *s,
                    f_final: f64::MAX,
                    f_best: f64::MAX,
                    termination: Some(Termination::Failed(e.to_string())),
                    contended,
                    ..Default::default()
                }
            }
        };
        if let Some(dir) = out {
            report.save_json(&dir.join(format!("{}.json", file_stem(&report.instance, &report.solver))))?;
        }
        reports.push(report);
    }

    let problems: Vec<ProblemSummary> =
        problems.iter().zip(oracles).map(|((id, s, _), oracle)| ProblemSummary { instance: id.clone(), s: *s, oracle }).collect();
    if let Some(dir) = out {
        write_summary(&dir.join("summary.csv"), &reports, &problems)?;
        let file = std::io::BufWriter::new(std::fs::File::create(dir.join("problems.json"))?);
        serde_json::to_writer_pretty(file, &problems)?;
    }
    Ok(SuiteOutcome { reports, problems, failures })
}

/// One row per report.
pub fn write_summary(path: &Path, reports: &[RunReport], problems: &[ProblemSummary]) -> Result<()> {
    let err = |e: csv::Error| Error::Data { path: path.to_path_buf(), reason: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record([
        "instance",
        "solver",
        "n",
        "s",
        "f_final",
        "f_best",
        "f_oracle",
        "time_to_best",
        "total_time",
        "termination",
        "support",
        "certificates_passed",
    ])
    .map_err(err)?;
    for r in reports {
        let oracle = problems.iter().find(|p| p.instance == r.instance).and_then(|p| p.oracle.as_ref()).map(|o| o.f.to_string());
        let termination = match &r.termination {
            Some(Termination::Converged) => "converged".to_string(),
            Some(Termination::MaxIterations) => "max_iterations".to_string(),
            Some(Termination::TimeLimit) => "time_limit".to_string(),
            Some(Termination::Failed(m)) => format!("failed: {m}"),
            None => "unknown".to_string(),
        };
        let support = r.support_final.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        let certs = r.certificates.iter().map(|c| format!("{:?}={}", c.kind, c.passed)).collect::<Vec<_>>().join(" ");
        w.write_record([
            r.instance.clone(),
            r.solver.clone(),
            r.n.to_string(),
            r.s.to_string(),
            r.f_final.to_string(),
            r.f_best.to_string(),
            oracle.unwrap_or_default(),
            r.time_to_best.to_string(),
            r.total_time.to_string(),
            termination,
            support,
            certs,
        ])
        .map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted_ls(id: &str, seed: u64) -> InstanceSpec {
        InstanceSpec {
            id: id.into(),
            source: InstanceSource::Planted { planted: PlantedKind::LeastSquares, n: 6, s_true: 2, rows: 12, noise: 0.0, seed },
            budgets: vec![2],
            feasible_set: None,
        }
    }

    #[test]
    fn empty_solver_list_is_an_error() {
        let cfg = SuiteConfig {
            instances: vec![planted_ls("a", 1)],
            solvers: vec![],
            workers: 1,
            time_limit_secs: None,
            certify: false,
            oracle: false,
            oracle_inner: Default::default(),
        };
        assert!(matches!(run_suite(&cfg, Path::new("."), None), Err(Error::NothingToRun(_))));
    }

    #[test]
    fn toml_config_parses() {
        let text = r#"
            workers = 2
            oracle = true

            [[instances]]
            id = "ls"
            source = "planted"
            planted = "least_squares"
            n = 6
            s_true = 2
            rows = 12
            seed = 3
            budgets = [2, 3]

            [[solvers]]
            solver = "sns"
            rho = 2

            [[solvers]]
            solver = "pd"
            [solvers.config]
            tau_growth = 1.1

            [[solvers]]
            solver = "gss"
        "#;
        let cfg: SuiteConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.instances[0].budgets, vec![2, 3]);
        assert_eq!(cfg.solvers.len(), 3);
        assert_eq!(cfg.solvers[0].label(), "sns-rho2");
        match &cfg.solvers[1] {
            SolverSpec::Pd { config, .. } => assert_eq!(config.tau_growth, 1.1),
            _ => panic!(),
        }
        assert!(cfg.certify);
    }

    #[test]
    fn runs_cells_and_writes_reports() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SuiteConfig {
            instances: vec![planted_ls("a", 1), planted_ls("b", 2)],
            solvers: vec![SolverSpec::sns(2), SolverSpec::Pd { name: None, config: PdConfig::default() }],
            workers: 2,
            time_limit_secs: Some(60.0),
            certify: true,
            oracle: true,
            oracle_inner: Default::default(),
        };
        let out = run_suite(&cfg, Path::new("."), Some(dir.path())).unwrap();
        assert_eq!(out.reports.len(), 4);
        assert!(out.failures.is_empty());
        assert!(out.reports.iter().all(|r| r.contended));
        assert!(dir.path().join("summary.csv").exists());
        assert!(dir.path().join("a_s2__sns-rho2.json").exists());
        let again = run_suite(&cfg, Path::new("."), None).unwrap();
        for (x, y) in out.reports.iter().zip(&again.reports) {
            assert_eq!(x.f_final.to_bits(), y.f_final.to_bits());
        }
    }
}
