//! Experiment files, CSV/summary writers and single-instance evaluation used
//! by the `jamsched` binary.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{run_sweep, Axis, HarnessError, MetricsReport, ScenarioConfig};
use crate::jammer::JammerSpec;
use crate::model::{FrameConfig, JammingProfile, ModelError, Schedule, Task};
use crate::objective::{evaluate, realized_metrics, Evaluation, RealizedMetrics};
use crate::solvers::GaConfig;

pub const FORMAT_VERSION: u32 = 1;
pub const OUTPUT_DIR_ENV: &str = "JAMSCHED_OUTPUT_DIR";

pub const SWEEP_HEADER: &str = "solver,jam_prob,mean_drop_ratio,mean_latency_ms,nominal_expected_drop,n_sim,seed";
pub const DISTRIBUTION_HEADER: &str = "solver,axis,bin_low,bin_high,drop_fraction,count";
pub const RUN_LOG_HEADER: &str =
    "solver,jam_prob,replicate,frame_seed,jam_seed,solver_seed,drop_ratio,unweighted_drop_ratio,mean_latency_ms,nominal_expected_drop,objective";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Artifact {
    SweepCsv,
    DistributionCsv,
    SummaryTable,
    PerRunLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub version: u32,
    pub output_dir: PathBuf,
    pub emit: BTreeSet<Artifact>,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub ga: GaConfig,
    pub jammer: JammerSpec,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Run(#[from] HarnessError),
}

impl ExperimentError {
    /// 2 for anything wrong with the input file, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Read { .. } | Self::Parse { .. } | Self::Invalid { .. } => 2,
            Self::Write { .. } | Self::Run(_) => 1,
        }
    }
}

impl ExperimentFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ExperimentError> {
        let file: Self = toml::from_str(text).map_err(|e| ExperimentError::Parse {
            path: path.to_path_buf(),
            message: e.to_string().trim_end().to_string(),
        })?;
        file.check(path)?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|source| ExperimentError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment files serialize")
    }

    fn check(&self, path: &Path) -> Result<(), ExperimentError> {
        let invalid = |message: String| ExperimentError::Invalid {
            path: path.to_path_buf(),
            message,
        };
        if self.version != FORMAT_VERSION {
            return Err(invalid(format!(
                "unsupported version {}, expected {FORMAT_VERSION}",
                self.version
            )));
        }
        self.scenario.check().map_err(|e| invalid(e.to_string()))?;
        self.ga.check().map_err(|e| invalid(e.to_string()))?;
        self.jammer.check().map_err(|e| invalid(format!("jammer: {e}")))?;
        for &p in &self.scenario.sweep {
            self.jammer
                .at_probability(p)
                .map_err(|e| invalid(format!("jammer at sweep point {p}: {e}")))?;
        }
        Ok(())
    }
}

/// Everything written by one run.
#[derive(Debug)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub output_dir: PathBuf,
    pub written: Vec<PathBuf>,
    pub summary: String,
}

pub fn run_experiment(path: &Path, output_override: Option<&Path>) -> Result<RunOutput, ExperimentError> {
    let file = ExperimentFile::load(path)?;
    let report = run_sweep(&file.scenario, &file.jammer, &file.ga)?;
    let output_dir = output_override.map_or_else(|| file.output_dir.clone(), Path::to_path_buf);
    let written = write_artifacts(&file, &report, &output_dir)?;
    Ok(RunOutput {
        summary: summary_table(&file, &report),
        report,
        output_dir,
        written,
    })
}

fn write_file(path: PathBuf, contents: &str) -> Result<PathBuf, ExperimentError> {
    fs::write(&path, contents).map_err(|source| ExperimentError::Write {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

pub fn write_artifacts(
    file: &ExperimentFile,
    report: &MetricsReport,
    dir: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir).map_err(|source| ExperimentError::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    for artifact in &file.emit {
        match artifact {
            Artifact::SweepCsv => {
                written.push(write_file(dir.join("sweep.csv"), &sweep_csv(report))?);
            }
            Artifact::DistributionCsv => {
                for &p in &file.scenario.sweep {
                    let name = format!("distribution_p{p:.2}.csv");
                    written.push(write_file(dir.join(name), &distribution_csv(report, p))?);
                }
            }
            Artifact::SummaryTable => {
                written.push(write_file(dir.join("summary.txt"), &summary_table(file, report))?);
            }
            Artifact::PerRunLog => {
                written.push(write_file(dir.join("runs.csv"), &run_log_csv(report))?);
            }
        }
    }
    Ok(written)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn sweep_csv(report: &MetricsReport) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for p in &report.points {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.solver,
            p.jam_prob,
            p.mean_drop_ratio,
            opt(p.mean_latency_ms),
            p.nominal_expected_drop,
            p.n_sim,
            report.metadata.rng_seed
        )
        .unwrap();
    }
    out
}

/// Bins for one sweep point; empty bins keep their row with a blank fraction.
pub fn distribution_csv(report: &MetricsReport, jam_prob: f64) -> String {
    let mut out = format!("{DISTRIBUTION_HEADER}\n");
    for b in report.distributions.iter().filter(|b| b.jam_prob == jam_prob) {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            b.solver,
            b.axis.label(),
            b.bin_low,
            b.bin_high,
            opt(b.drop_fraction()),
            b.count
        )
        .unwrap();
    }
    out
}

pub fn run_log_csv(report: &MetricsReport) -> String {
    let mut out = format!("{RUN_LOG_HEADER}\n");
    for r in &report.replicates {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.solver,
            r.jam_prob,
            r.replicate,
            r.frame_seed,
            r.jam_seed,
            r.solver_seed,
            r.weighted_drop_ratio,
            r.unweighted_drop_ratio,
            opt(r.mean_latency()),
            r.nominal_expected_drop,
            r.objective
        )
        .unwrap();
    }
    out
}

fn fmt_opt(v: Option<f64>, width: usize, prec: usize) -> String {
    match v {
        Some(x) => format!("{x:>width$.prec$}"),
        None => format!("{:>width$}", "-"),
    }
}

/// Plain-text table of the sweep and the weight-class drop fractions. Every
/// value is a rounded copy of a CSV field.
pub fn summary_table(file: &ExperimentFile, report: &MetricsReport) -> String {
    let mut out = String::new();
    writeln!(out, "config hash {}", report.metadata.config_hash).unwrap();
    writeln!(out, "seed {}  n_sim {}", report.metadata.rng_seed, report.metadata.n_sim).unwrap();
    writeln!(out).unwrap();
    writeln!(out, "{:<8}{:>8}{:>12}{:>14}{:>12}", "solver", "P_jam", "drop", "latency_ms", "E[drop]").unwrap();
    for p in &report.points {
        writeln!(
            out,
            "{:<8}{:>8.2}{:>12.4}{}{:>12.4}",
            p.solver.label(),
            p.jam_prob,
            p.mean_drop_ratio,
            fmt_opt(p.mean_latency_ms, 14, 3),
            p.nominal_expected_drop
        )
        .unwrap();
    }
    let classes = file.scenario.weight_scheme.classes();
    if classes.len() > 1 {
        writeln!(out).unwrap();
        write!(out, "{:<8}{:>8}{:>10}", "solver", "P_jam", "overall").unwrap();
        for w in &classes {
            write!(out, "{:>10}", format!("w={w}")).unwrap();
        }
        writeln!(out).unwrap();
        for &p in &file.scenario.sweep {
            for &solver in &file.scenario.solvers {
                write!(
                    out,
                    "{:<8}{:>8.2}{}",
                    solver.label(),
                    p,
                    fmt_opt(report.overall_unweighted_drop(solver, p), 10, 4)
                )
                .unwrap();
                for &w in &classes {
                    let v = report
                        .bins(solver, p, Axis::Weight)
                        .find(|b| b.bin_low == w)
                        .and_then(|b| b.drop_fraction());
                    write!(out, "{}", fmt_opt(v, 10, 4)).unwrap();
                }
                writeln!(out).unwrap();
            }
        }
    }
    out
}

/// Jamming input for a single-instance file: one probability for every cell
/// or a full users x slots matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JammingInput {
    Uniform(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub frame: FrameConfig,
    pub tasks: Vec<Task>,
    pub jamming: JammingInput,
    /// Optional realized jam pattern, users x slots.
    #[serde(default)]
    pub realization: Option<Vec<Vec<bool>>>,
}

/// 1-based user per slot, 0 for an empty slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    pub assignment: Vec<usize>,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl EvalError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Read { .. } | Self::Parse { .. } => 2,
            Self::Model(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserRow {
    pub user: usize,
    pub slot: usize,
    pub queue_position: usize,
    pub communication_ms: f64,
    pub queue_wait_ms: f64,
    pub total_ms: f64,
    pub deadline_miss: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub users: Vec<UserRow>,
    pub normalized_latency: f64,
    pub expected_weighted_dropped: f64,
    pub expected_drop_ratio: f64,
    pub objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realized: Option<RealizedMetrics>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, EvalError> {
    let text = fs::read_to_string(path).map_err(|source| EvalError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| EvalError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn evaluate_files(schedule_path: &Path, instance_path: &Path) -> Result<EvalReport, EvalError> {
    let schedule: ScheduleFile = read_json(schedule_path)?;
    let instance: InstanceFile = read_json(instance_path)?;
    evaluate_single(&Schedule::from_one_based(&schedule.assignment), &instance)
}

pub fn evaluate_single(schedule: &Schedule, instance: &InstanceFile) -> Result<EvalReport, EvalError> {
    let frame = &instance.frame;
    frame.check()?;
    for t in &instance.tasks {
        t.check()?;
        t.check_consistency(frame.server_speed)?;
    }
    let jamming = match &instance.jamming {
        JammingInput::Uniform(p) => JammingProfile::uniform(frame.active_users, frame.slots_per_frame, *p)?,
        JammingInput::Matrix(m) => JammingProfile::new(m.clone())?,
    };
    let Evaluation {
        latency,
        drops,
        objective,
    } = evaluate(schedule, &instance.tasks, &jamming, frame)?;
    let queue = schedule.derive_queue(frame.active_users);
    let users = (0..frame.active_users)
        .map(|u| UserRow {
            user: u + 1,
            slot: queue.slot_of[u],
            queue_position: queue.queue_position[u],
            communication_ms: latency.communication[u],
            queue_wait_ms: latency.queue_wait[u],
            total_ms: latency.total[u],
            deadline_miss: latency.deadline_miss[u],
        })
        .collect();
    let realized = match &instance.realization {
        Some(r) => Some(realized_metrics(schedule, &instance.tasks, r, frame)?),
        None => None,
    };
    Ok(EvalReport {
        users,
        normalized_latency: latency.normalized,
        expected_weighted_dropped: drops.expected_weighted_dropped,
        expected_drop_ratio: drops.expected_drop_ratio,
        objective,
        realized,
    })
}

pub fn render_eval(report: &EvalReport) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:>5}{:>6}{:>5}{:>10}{:>10}{:>10}{:>4}",
        "user", "slot", "K", "L_c", "L_q", "L", "d"
    )
    .unwrap();
    for r in &report.users {
        writeln!(
            out,
            "{:>5}{:>6}{:>5}{:>10.4}{:>10.4}{:>10.4}{:>4}",
            r.user,
            r.slot,
            r.queue_position,
            r.communication_ms,
            r.queue_wait_ms,
            r.total_ms,
            u8::from(r.deadline_miss)
        )
        .unwrap();
    }
    writeln!(out, "normalized latency   {}", report.normalized_latency).unwrap();
    writeln!(out, "expected dropped     {}", report.expected_weighted_dropped).unwrap();
    writeln!(out, "expected drop ratio  {}", report.expected_drop_ratio).unwrap();
    writeln!(out, "objective            {}", report.objective).unwrap();
    if let Some(r) = &report.realized {
        writeln!(out, "realized drop ratio  {}", r.weighted_drop_ratio).unwrap();
        writeln!(out, "realized latency     {}", fmt_opt(r.mean_latency_completed, 0, 4).trim()).unwrap();
    }
    out
}
