use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use sns_core::neighborhood::NeighborhoodSpec;
use sns_core::oracle::brute_force_oracle;
use sns_core::profile::{performance_profile, FailureRule, ProfileMetric};
use sns_core::stationarity::{check_bf, check_lu_zhang, check_n_stationary, check_proj_stationary, check_s_stationary, default_tol_f};
use sns_core::suite::{read_config, run_suite, InstanceSource, InstanceSpec, SolverSpec, SuiteConfig};
use sns_core::{support, FeasibleSet, GssConfig, InnerSolverConfig, Pattern, PdConfig, RunReport, SnsConfig, SparseProblem};

/// Exit status when some cells or checks failed but the command itself ran.
const PARTIAL_FAILURE: u8 = 2;

#[derive(Parser)]
#[command(name = "sns", version, about = "Sparsity-constrained minimization: solve, benchmark and certify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Solver {
    Sns,
    Pd,
    Gss,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Metric {
    TimeToBest,
    FFinal,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum FailureArg {
    AbortedOnly,
    NotConverged,
}

#[derive(clap::Args)]
struct ProblemArgs {
    /// Instance file (TOML or JSON), same layout as one `[[instances]]` entry of a suite.
    #[arg(long)]
    problem: PathBuf,
    /// Sparsity budget; defaults to the first entry of the instance's `budgets`.
    #[arg(long)]
    s: Option<usize>,
    /// Replaces the seed of a planted instance.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver on one instance from x0 = 0.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_enum, default_value = "sns")]
        solver: Solver,
        /// Neighborhood radius for SNS.
        #[arg(long)]
        rho: Option<usize>,
        #[arg(long)]
        time_limit: Option<f64>,
        /// Solver configuration file with SnsConfig, PdConfig or GssConfig fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip the stationarity certificates.
        #[arg(long)]
        no_certify: bool,
    },
    /// Run a benchmark suite described by a config file.
    Suite {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        time_limit: Option<f64>,
        /// Overrides the worker count of the config.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the stationarity checks on the final point of a stored report.
    Certify {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        report: PathBuf,
        /// Radius for the N-stationarity check; defaults to the report's own.
        #[arg(long)]
        rho: Option<usize>,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Exhaustive optimum over all supports of size s.
    Oracle {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a performance profile from a directory of reports.
    Profile {
        /// Directory holding run reports (`*.json`).
        #[arg(long)]
        reports: PathBuf,
        #[arg(long, value_enum, default_value = "time-to-best")]
        metric: Metric,
        #[arg(long, value_enum, default_value = "aborted-only")]
        failure_rule: FailureArg,
        /// CSV output; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(PARTIAL_FAILURE),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// `Ok(false)` means the command completed but some cells aborted or some
/// certificates failed (`certify` only).
fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Solve { problem, solver, rho, time_limit, config, out, no_certify } => {
            let (spec, p) = load_problem(&problem)?;
            let mut solver = build_solver(solver, rho, config.as_deref())?;
            if let Some(t) = time_limit {
                set_time_limit(&mut solver, t);
            }
            let mut report = solver.run(&p, !no_certify)?;
            report.instance = format!("{}/s{}", spec.id, p.s());
            report.seed = planted_seed(&spec);
            let ok = !report.is_failure();
            print_summary(&report);
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                let path = dir.join(format!("{}_s{}__{}.json", spec.id, p.s(), report.solver));
                report.save_json(&path)?;
                println!("report written to {}", path.display());
            }
            Ok(ok)
        }
        Command::Suite { config, out, time_limit, workers } => {
            let mut cfg = SuiteConfig::load(&config)?;
            if time_limit.is_some() {
                cfg.time_limit_secs = time_limit;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let base = config.parent().unwrap_or(Path::new("."));
            let outcome = run_suite(&cfg, base, out.as_deref())?;
            for r in &outcome.reports {
                print_summary(r);
            }
            for (cell, err) in &outcome.failures {
                eprintln!("failed: {cell}: {err}");
            }
            Ok(outcome.failures.is_empty())
        }
        Command::Certify { problem, report, rho, tol } => {
            let (_, p) = load_problem(&problem)?;
            let report = RunReport::load_json(&report)?;
            let x = report.x_final();
            let y = report.pattern_final.clone().unwrap_or_else(|| Pattern::with_free(p.n(), &support(&x, 0.0)));
            let rho = rho.or_else(|| report.config["neighborhood"]["rho"].as_u64().map(|r| r as usize)).unwrap_or(2).min(p.n());
            let f = p.value(&x);
            let mut certs = vec![
                check_proj_stationary(&x, &y, &p, tol)?,
                check_n_stationary(&x, &y, &p, &NeighborhoodSpec::new(rho), default_tol_f(f), tol)?,
            ];
            if support(&x, 0.0).len() <= p.s() {
                certs.push(check_bf(&x, &p, tol)?);
                if !matches!(p.feasible_set(), FeasibleSet::Ball { .. }) {
                    certs.push(check_lu_zhang(&x, &p, tol)?);
                    certs.push(check_s_stationary(&x, &y, &p, tol)?);
                }
            }
            println!("{}", serde_json::to_string_pretty(&certs)?);
            Ok(certs.iter().all(|c| c.passed))
        }
        Command::Oracle { problem, out } => {
            let (_, p) = load_problem(&problem)?;
            let o = brute_force_oracle(&p, &InnerSolverConfig::default())?;
            let text = serde_json::to_string_pretty(&o)?;
            match out {
                Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => println!("{text}"),
            }
            Ok(o.all_converged)
        }
        Command::Profile { reports, metric, failure_rule, out } => {
            let runs = load_reports(&reports)?;
            let metric = match metric {
                Metric::TimeToBest => ProfileMetric::TimeToBest,
                Metric::FFinal => ProfileMetric::FFinal,
            };
            let rule = match failure_rule {
                FailureArg::AbortedOnly => FailureRule::AbortedOnly,
                FailureArg::NotConverged => FailureRule::NotConverged,
            };
            let table = performance_profile(&runs, metric, rule)?;
            match out {
                Some(path) => table.write_csv(&path)?,
                None => table.write_csv_to(std::io::stdout().lock())?,
            }
            Ok(table.dropped.is_empty())
        }
    }
}

fn load_problem(args: &ProblemArgs) -> Result<(InstanceSpec, SparseProblem)> {
    let mut spec = InstanceSpec::load(&args.problem).with_context(|| format!("reading {}", args.problem.display()))?;
    if let Some(seed) = args.seed {
        match &mut spec.source {
            InstanceSource::Planted { seed: s, .. } => *s = seed,
            _ => log::warn!("--seed only applies to planted instances; ignored"),
        }
    }
    let s = match args.s.or_else(|| spec.budgets.first().copied()) {
        Some(s) => s,
        None => bail!("no sparsity budget: pass --s or list `budgets` in the instance file"),
    };
    let base = args.problem.parent().unwrap_or(Path::new("."));
    let p = spec.problem(base, s)?;
    Ok((spec, p))
}

fn planted_seed(spec: &InstanceSpec) -> Option<u64> {
    match spec.source {
        InstanceSource::Planted { seed, .. } => Some(seed),
        _ => None,
    }
}

fn read_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => read_config(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(T::default()),
    }
}

fn build_solver(solver: Solver, rho: Option<usize>, config: Option<&Path>) -> Result<SolverSpec> {
    if rho.is_some() && solver != Solver::Sns {
        bail!("--rho only applies to --solver sns");
    }
    Ok(match solver {
        Solver::Sns => SolverSpec::Sns { name: None, rho, config: read_or_default::<SnsConfig>(config)? },
        Solver::Pd => SolverSpec::Pd { name: None, config: read_or_default::<PdConfig>(config)? },
        Solver::Gss => SolverSpec::Gss { name: None, config: read_or_default::<GssConfig>(config)? },
    })
}

fn set_time_limit(solver: &mut SolverSpec, t: f64) {
    match solver {
        SolverSpec::Sns { config, .. } => config.time_limit_secs = t,
        SolverSpec::Pd { config, .. } => config.time_limit_secs = t,
        SolverSpec::Gss { config, .. } => config.time_limit_secs = t,
    }
}

fn load_reports(dir: &Path) -> Result<Vec<RunReport>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json") && p.file_name().is_some_and(|n| n != "problems.json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| RunReport::load_json(p).with_context(|| format!("reading {}", p.display()))).collect()
}

fn print_summary(r: &RunReport) {
    let status = match &r.termination {
        Some(t) => serde_json::to_value(t).ok().and_then(|v| v["reason"].as_str().map(String::from)).unwrap_or_default(),
        None => "unknown".into(),
    };
    let certs: Vec<String> = r.certificates.iter().map(|c| format!("{:?}={}", c.kind, if c.passed { "ok" } else { "FAIL" })).collect();
    println!(
        "{:<16} {:<10} f={:<16.10} |supp|={:<3} time={:.3}s {status} {}",
        r.instance,
        r.solver,
        r.f_final,
        r.support_final.len(),
        r.total_time,
        certs.join(" ")
    );
}
