//! Dolan–Moré performance profiles over a set of run reports.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{RunReport, Termination};

/// Shift added to `f - f*` so that the best solver's metric is not zero.
pub const F_SHIFT: f64 = 1e-12;
/// Floor on measured times, so that a zero time-to-best stays comparable.
pub const TIME_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileMetric {
    TimeToBest,
    FFinal,
}

/// Which runs count as failures (ratio `∞`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureRule {
    /// Only aborted runs fail; budget or time-limit stops still count.
    #[default]
    AbortedOnly,
    /// Anything that did not converge fails.
    NotConverged,
}

impl FailureRule {
    fn fails(&self, r: &RunReport) -> bool {
        match self {
            FailureRule::AbortedOnly => r.is_failure() || !r.f_final.is_finite(),
            FailureRule::NotConverged => !matches!(r.termination, Some(Termination::Converged)) || !r.f_final.is_finite(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileTable {
    pub metric: ProfileMetric,
    pub solvers: Vec<String>,
    pub problems: Vec<String>,
    /// `metric[p][a]`; `None` for failed runs.
    pub values: Vec<Vec<Option<f64>>>,
    /// `r[p][a]`; `∞` for failed runs.
    pub ratios: Vec<Vec<f64>>,
    /// Breakpoints of the curves: the distinct finite ratios, ascending.
    pub taus: Vec<f64>,
    /// `curves[a][k]`: fraction of problems with `r[p][a] <= taus[k]`.
    pub curves: Vec<Vec<f64>>,
    /// Problems on which every solver failed.
    pub dropped: Vec<String>,
}

impl ProfileTable {
    /// Value of a solver's step curve at an arbitrary `tau`.
    pub fn curve_at(&self, solver: &str, tau: f64) -> Option<f64> {
        let a = self.solvers.iter().position(|s| s == solver)?;
        let k = self.taus.partition_point(|&t| t <= tau);
        Some(if k == 0 { 0.0 } else { self.curves[a][k - 1] })
    }

    /// Writes `tau,<solver>,...` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv_to(file)
    }

    pub fn write_csv_to<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["tau".to_string()];
        header.extend(self.solvers.iter().cloned());
        w.write_record(&header).map_err(std::io::Error::from)?;
        for (k, tau) in self.taus.iter().enumerate() {
            let mut row = vec![tau.to_string()];
            row.extend(self.curves.iter().map(|c| c[k].to_string()));
            w.write_record(&row).map_err(std::io::Error::from)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Curves as read back from a profile CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileCurves {
    pub solvers: Vec<String>,
    pub taus: Vec<f64>,
    pub curves: Vec<Vec<f64>>,
}

impl ProfileCurves {
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
        if header.get(0) != Some("tau") {
            return Err(Error::Data { path: path.to_path_buf(), reason: "first column must be `tau`".into() });
        }
        let solvers: Vec<String> = header.iter().skip(1).map(String::from).collect();
        let mut taus = Vec::new();
        let mut curves = vec![Vec::new(); solvers.len()];
        for rec in r.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| Error::Data { path: path.to_path_buf(), reason: format!("bad number `{s}`") })
            };
            taus.push(parse(&rec[0])?);
            for (a, c) in curves.iter_mut().enumerate() {
                c.push(parse(&rec[a + 1])?);
            }
        }
        Ok(Self { solvers, taus, curves })
    }

    pub fn curve_at(&self, solver: &str, tau: f64) -> Option<f64> {
        let a = self.solvers.iter().position(|s| s == solver)?;
        let k = self.taus.partition_point(|&t| t <= tau);
        Some(if k == 0 { 0.0 } else { self.curves[a][k - 1] })
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Data { path: path.to_path_buf(), reason: e.to_string() }
}

/// Builds the profile. Problems are identified by `instance`, solvers by
/// `solver`; each pair may appear at most once.
///
/// For `FFinal` the metric is `f - f*_p + 1e-12` with `f*_p` the best
/// non-failed value on problem `p`. Times are floored at `1e-9` s.
pub fn performance_profile(reports: &[RunReport], metric: ProfileMetric, rule: FailureRule) -> Result<ProfileTable> {
    let solvers: Vec<String> = reports.iter().map(|r| r.solver.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let all_problems: Vec<String> = reports.iter().map(|r| r.instance.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    if solvers.is_empty() || all_problems.is_empty() {
        return Err(Error::NothingToRun("no reports to profile".into()));
    }
    let mut cell: BTreeMap<(&str, &str), &RunReport> = BTreeMap::new();
    for r in reports {
        if cell.insert((r.instance.as_str(), r.solver.as_str()), r).is_some() {
            return Err(Error::InvalidConfig(format!("duplicate report for solver `{}` on `{}`", r.solver, r.instance)));
        }
    }

    let mut problems = Vec::new();
    let mut values = Vec::new();
    let mut dropped = Vec::new();
    for p in &all_problems {
        let raw: Vec<Option<f64>> = solvers
            .iter()
            .map(|a| {
                let r = cell.get(&(p.as_str(), a.as_str()))?;
                if rule.fails(r) {
                    return None;
                }
                Some(match metric {
                    ProfileMetric::TimeToBest => r.time_to_best.max(TIME_FLOOR),
                    ProfileMetric::FFinal => r.f_final,
                })
            })
            .collect();
        if raw.iter().all(Option::is_none) {
            log::warn!("every solver failed on `{p}`; dropping it from the profile");
            dropped.push(p.clone());
            continue;
        }
        let row = match metric {
            ProfileMetric::TimeToBest => raw,
            ProfileMetric::FFinal => {
                let best = raw.iter().flatten().copied().fold(f64::INFINITY, f64::min);
                raw.iter().map(|v| v.map(|f| f - best + F_SHIFT)).collect()
            }
        };
        problems.push(p.clone());
        values.push(row);
    }

    let ratios: Vec<Vec<f64>> = values
        .iter()
        .map(|row| {
            let best = row.iter().flatten().copied().fold(f64::INFINITY, f64::min);
            row.iter().map(|v| v.map_or(f64::INFINITY, |m| m / best)).collect()
        })
        .collect();

    let mut taus: Vec<f64> = ratios.iter().flatten().copied().filter(|r| r.is_finite()).collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup();

    let np = problems.len() as f64;
    let curves = (0..solvers.len())
        .map(|a| taus.iter().map(|&t| ratios.iter().filter(|row| row[a] <= t).count() as f64 / np).collect())
        .collect();

    Ok(ProfileTable { metric, solvers, problems, values, ratios, taus, curves, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn report(solver: &str, instance: &str, time: f64, f: f64, failed: bool) -> RunReport {
        RunReport {
            solver: solver.into(),
            instance: instance.into(),
            time_to_best: time,
            total_time: time,
            f_final: f,
            termination: Some(if failed { Termination::Failed("boom".into()) } else { Termination::Converged }),
            ..Default::default()
        }
    }

    #[test]
    fn single_solver_curve_is_one() {
        let t = performance_profile(&[report("a", "p1", 3.0, 1.0, false), report("a", "p2", 5.0, 1.0, false)], ProfileMetric::TimeToBest, FailureRule::default()).unwrap();
        assert_eq!(t.taus, vec![1.0]);
        assert_eq!(t.curves, vec![vec![1.0]]);
        assert_eq!(t.curve_at("a", 17.0), Some(1.0));
    }

    #[test]
    fn two_solvers_hand_ratios() {
        let t = performance_profile(&[report("A", "p", 1.0, 0.0, false), report("B", "p", 2.0, 0.0, false)], ProfileMetric::TimeToBest, FailureRule::default()).unwrap();
        assert_eq!(t.ratios, vec![vec![1.0, 2.0]]);
        assert_eq!(t.curve_at("B", 1.999), Some(0.0));
        assert_eq!(t.curve_at("B", 2.0), Some(1.0));
        assert_eq!(t.curve_at("A", 1.0), Some(1.0));
    }

    #[test]
    fn failure_plateaus_at_half() {
        let t = performance_profile(
            &[
                report("A", "p1", 1.0, 0.0, false),
                report("A", "p2", 1.0, 0.0, true),
                report("B", "p1", 2.0, 0.0, false),
                report("B", "p2", 2.0, 0.0, false),
            ],
            ProfileMetric::TimeToBest,
            FailureRule::default(),
        )
        .unwrap();
        assert_eq!(t.curve_at("A", 1e300), Some(0.5));
        assert_eq!(t.curve_at("B", 1e300), Some(1.0));
    }

    #[test]
    fn all_failed_problem_is_dropped() {
        let t = performance_profile(&[report("A", "p1", 1.0, 0.0, false), report("A", "p2", 1.0, 0.0, true)], ProfileMetric::TimeToBest, FailureRule::default()).unwrap();
        assert_eq!(t.dropped, vec!["p2".to_string()]);
        assert_eq!(t.problems, vec!["p1".to_string()]);
    }

    #[test]
    fn objective_metric_uses_shift() {
        let t = performance_profile(&[report("A", "p", 1.0, 2.0, false), report("B", "p", 1.0, 2.0 + 1e-12, false)], ProfileMetric::FFinal, FailureRule::default()).unwrap();
        assert_eq!(t.ratios[0][0], 1.0);
        assert!((t.ratios[0][1] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn duplicates_are_rejected() {
        let r = report("A", "p", 1.0, 0.0, false);
        assert!(performance_profile(&[r.clone(), r], ProfileMetric::TimeToBest, FailureRule::default()).is_err());
    }
}
