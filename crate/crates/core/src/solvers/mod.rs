//! Schedule producers: the genetic algorithm (jamming-aware and
//! jamming-blind), SJF/SDF baselines, and an exhaustive oracle for tiny
//! instances.

mod ga;
mod heuristics;
mod oracle;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{FrameConfig, JammingProfile, ModelError, Schedule, Task};

pub use ga::{solve_ga, solve_ga_nj, GaConfig};
pub use heuristics::{solve_sdf, solve_sjf};
pub use oracle::{brute_force_oracle, ORACLE_CANDIDATE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxGenerations,
    Stall,
    Tolerance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverResult {
    #[serde(serialize_with = "serialize_schedule")]
    pub schedule: Schedule,
    /// Objective of `schedule` under the true jamming profile.
    pub objective_value: f64,
    pub generations_run: usize,
    pub evaluations: usize,
    /// `None` for solvers that do not iterate.
    pub converged_reason: Option<StopReason>,
    /// Incumbent fitness after initialization and after each generation.
    #[serde(skip)]
    pub incumbent_history: Vec<f64>,
}

fn serialize_schedule<S: serde::Serializer>(s: &Schedule, ser: S) -> Result<S::Ok, S::Error> {
    s.to_one_based().serialize(ser)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no active users in the frame")]
    NoActiveUsers,
    #[error("{users} users cannot each get one of {slots} slots")]
    Infeasible { users: usize, slots: usize },
    #[error("instance has {candidates} candidate assignments, above the oracle limit of {limit}")]
    TooLarge { candidates: f64, limit: f64 },
    #[error("invalid GA setting {field}: {reason}")]
    InvalidGaConfig { field: &'static str, reason: String },
}

/// Solvers selectable from experiment files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SolverKind {
    #[serde(rename = "GA")]
    Ga,
    #[serde(rename = "GA-Nj")]
    GaNj,
    #[serde(rename = "SJF")]
    Sjf,
    #[serde(rename = "SDF")]
    Sdf,
    #[serde(rename = "oracle")]
    Oracle,
}

impl SolverKind {
    pub const PAPER_SET: [SolverKind; 4] = [Self::Ga, Self::GaNj, Self::Sjf, Self::Sdf];

    pub fn label(&self) -> &'static str {
        match self {
            Self::Ga => "GA",
            Self::GaNj => "GA-Nj",
            Self::Sjf => "SJF",
            Self::Sdf => "SDF",
            Self::Oracle => "oracle",
        }
    }

    pub fn solve(
        &self,
        tasks: &[Task],
        jamming: &JammingProfile,
        config: &FrameConfig,
        ga: &GaConfig,
    ) -> Result<SolverResult, SolverError> {
        match self {
            Self::Ga => solve_ga(tasks, jamming, config, ga),
            Self::GaNj => solve_ga_nj(tasks, jamming, config, ga),
            Self::Sjf => solve_sjf(tasks, jamming, config),
            Self::Sdf => solve_sdf(tasks, jamming, config),
            Self::Oracle => brute_force_oracle(tasks, jamming, config),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ga" => Ok(Self::Ga),
            "ga-nj" | "ga_nj" | "ganj" => Ok(Self::GaNj),
            "sjf" => Ok(Self::Sjf),
            "sdf" => Ok(Self::Sdf),
            "oracle" => Ok(Self::Oracle),
            other => Err(format!("unknown solver `{other}`")),
        }
    }
}

fn check_instance(tasks: &[Task], jamming: &JammingProfile, config: &FrameConfig) -> Result<(), SolverError> {
    if tasks.is_empty() {
        return Err(SolverError::NoActiveUsers);
    }
    config.check()?;
    if tasks.len() != config.active_users {
        return Err(ModelError::TaskCount {
            expected: config.active_users,
            actual: tasks.len(),
        }
        .into());
    }
    jamming.check_dimensions(config)?;
    Ok(())
}
