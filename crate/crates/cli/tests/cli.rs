use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sns(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sns")).args(args).output().expect("binary runs")
}

fn repo(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json") && !p.ends_with("problems.json"))
        .collect();
    v.sort();
    v
}

#[test]
fn solve_writes_a_report_and_certify_reads_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let problem = repo("suites/instances/planted_ls.toml");
    let cfg = dir.path().join("sns.toml");
    std::fs::write(&cfg, "stop_step_tol = 1e-10\n").unwrap();

    let o = sns(&["solve", "--problem", &problem, "--rho", "2", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("converged"));

    let files = json_files(dir.path());
    assert_eq!(files.len(), 1);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&files[0]).unwrap()).unwrap();
    assert_eq!(report["solver"], "sns-rho2");
    assert_eq!(report["instance"], "planted_ls/s3");
    assert_eq!(report["seed"], 7);
    assert_eq!(report["config"]["stop_step_tol"], 1e-10);

    let o = sns(&["certify", "--problem", &problem, "--report", files[0].to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let certs: Vec<serde_json::Value> = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(certs.iter().all(|c| c["passed"] == true));
}

#[test]
fn seed_flag_changes_the_planted_instance() {
    let problem = repo("suites/instances/planted_ls.toml");
    let a = sns(&["oracle", "--problem", &problem]);
    let b = sns(&["oracle", "--problem", &problem, "--seed", "8"]);
    assert!(a.status.success() && b.status.success());
    assert_ne!(stdout(&a), stdout(&b));
}

#[test]
fn rho_is_rejected_for_baselines() {
    let o = sns(&["solve", "--problem", &repo("suites/instances/planted_ls.toml"), "--solver", "pd", "--rho", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--rho"));
}

#[test]
fn suite_then_profile() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite.toml");
    std::fs::write(
        &suite,
        r#"
[[instances]]
id = "ls"
source = "planted"
planted = "least_squares"
n = 8
s_true = 2
rows = 20
seed = 3
budgets = [2, 3]

[[solvers]]
solver = "sns"
rho = 2

[[solvers]]
solver = "gss"
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = sns(&["suite", "--config", suite.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json_files(&out).len(), 4);
    assert!(out.join("summary.csv").exists());

    let o = sns(&["profile", "--reports", out.to_str().unwrap(), "--metric", "f-final"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("tau,gss,sns-rho2"), "{text}");
}

#[test]
fn partial_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite.json");
    // the second instance points at a missing file
    std::fs::write(
        &suite,
        r#"{
  "instances": [
    {"id": "ok", "source": "planted", "planted": "least_squares", "n": 5, "s_true": 1, "rows": 12, "seed": 1, "budgets": [1]},
    {"id": "missing", "source": "libsvm", "path": "nope.svm", "budgets": [1]}
  ],
  "solvers": [{"solver": "sns"}]
}"#,
    )
    .unwrap();
    let o = sns(&["suite", "--config", suite.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing"));
}

#[test]
fn unknown_problem_file_is_an_error() {
    let o = sns(&["oracle", "--problem", "/nonexistent/problem.toml"]);
    assert_eq!(o.status.code(), Some(1));
}
