//! Per-run reports shared by all solvers.

use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::baselines::{GssTrace, PdTrace};
use crate::error::Result;
use crate::problem::{support, Pattern};
use crate::sns::SnsTrace;
use crate::stationarity::Certificate;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason", content = "detail")]
pub enum Termination {
    Converged,
    MaxIterations,
    TimeLimit,
    /// The run aborted; the report holds the last good iterate.
    Failed(String),
}

impl Termination {
    pub fn is_converged(&self) -> bool {
        matches!(self, Termination::Converged)
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, Termination::Failed(_))
    }
}

/// Objective value at an outer-loop boundary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub f: f64,
    /// Seconds since the solver started.
    pub wall_clock: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub solver: String,
    /// Full solver configuration as it was used.
    pub config: serde_json::Value,
    pub instance: String,
    pub seed: Option<u64>,
    pub n: usize,
    pub s: usize,
    pub trajectory: Vec<TracePoint>,
    pub x_final: Vec<f64>,
    pub pattern_final: Option<Pattern>,
    pub support_final: Vec<usize>,
    pub f_final: f64,
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub time_to_best: f64,
    pub total_time: f64,
    pub termination: Option<Termination>,
    #[serde(default)]
    pub certificates: Vec<Certificate>,
    /// Timings were taken while other runs shared the machine.
    #[serde(default)]
    pub contended: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sns_trace: Option<SnsTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pd_trace: Option<PdTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gss_trace: Option<GssTrace>,
}

impl RunReport {
    pub fn x_final(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x_final)
    }

    pub fn is_converged(&self) -> bool {
        self.termination.as_ref().is_some_and(Termination::is_converged)
    }

    pub fn is_failure(&self) -> bool {
        self.termination.as_ref().is_none_or(Termination::is_failure)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Ok(serde_json::from_reader(file)?)
    }
}

/// Bookkeeping for trajectory, best point and timings during a solve.
pub(crate) struct Recorder {
    clock: Instant,
    report: RunReport,
}

impl Recorder {
    pub fn new(solver: &str, config: serde_json::Value, n: usize, s: usize, x0: &DVector<f64>, f0: f64) -> Self {
        let report = RunReport {
            solver: solver.to_string(),
            config,
            n,
            s,
            trajectory: vec![TracePoint { iteration: 0, f: f0, wall_clock: 0.0 }],
            x_final: x0.as_slice().to_vec(),
            f_final: f0,
            x_best: x0.as_slice().to_vec(),
            f_best: f0,
            ..Default::default()
        };
        Self { clock: Instant::now(), report }
    }

    pub fn elapsed(&self) -> f64 {
        self.clock.elapsed().as_secs_f64()
    }

    pub fn record(&mut self, iteration: usize, x: &DVector<f64>, f: f64) {
        let t = self.elapsed();
        self.report.trajectory.push(TracePoint { iteration, f, wall_clock: t });
        self.report.x_final = x.as_slice().to_vec();
        self.report.f_final = f;
        if f < self.report.f_best {
            self.report.f_best = f;
            self.report.x_best = x.as_slice().to_vec();
            self.report.time_to_best = t;
        }
    }

    /// Overrides the final point without adding a trajectory entry.
    pub fn set_final(&mut self, x: &DVector<f64>, f: f64) {
        self.report.x_final = x.as_slice().to_vec();
        self.report.f_final = f;
        if f < self.report.f_best {
            self.report.f_best = f;
            self.report.x_best = x.as_slice().to_vec();
            self.report.time_to_best = self.elapsed();
        }
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        self.report.notes.push(msg.into());
    }

    pub fn finish(mut self, termination: Termination, pattern: Option<Pattern>) -> RunReport {
        self.report.total_time = self.elapsed();
        self.report.support_final = support(&DVector::from_column_slice(&self.report.x_final), 0.0);
        self.report.pattern_final = pattern;
        self.report.termination = Some(termination);
        self.report
    }
}
