//! Joint task offloading and user scheduling for a jammed mobile-edge uplink.
//!
//! A frame of `S` mini-slots carries at most one upload per slot; each upload
//! is a task that the edge server processes in slot order. An on-off jammer
//! destroys an upload with a known per-user, per-slot probability. The
//! [`objective`] trades expected weighted drops against normalized latency, the
//! [`solvers`] produce schedules, and [`harness`] replays the whole pipeline
//! over random frames and jam realizations.

pub mod experiment;
pub mod harness;
pub mod jammer;
pub mod model;
pub mod objective;
pub mod seeds;
pub mod solvers;

pub use jammer::{build_profile, JammerMode, JammerSpec, MarkovParams};
pub use model::{validate_schedule, FrameConfig, JammingProfile, ModelError, QueueState, Schedule, Task};
pub use objective::{
    evaluate, expected_drop_ratio, jto_us_objective, latency_breakdown, realized_metrics, DropMetrics,
    LatencyAveraging, LatencyBreakdown, RealizedMetrics, TaskOutcome,
};
pub use solvers::{GaConfig, SolverError, SolverKind, SolverResult};
