//! Domain types for one scheduling frame and the queue structure implied by
//! a slot assignment.
//!
//! Users are indexed `0..N_a` internally. Everything that leaves the crate
//! (CSV, JSON, `Display`) uses 1-based user and slot numbers.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const CYCLES_REL_TOL: f64 = 1e-9;

/// One user's offloaded job for the current frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    /// CPU cycles, when the task was specified that way.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycles: Option<f64>,
    /// Server processing time in ms.
    pub processing_time: f64,
    /// Relative deadline in ms, measured from the start of the frame.
    pub deadline: f64,
    /// Importance in (0, 1].
    pub weight: f64,
}

impl Task {
    pub fn new(processing_time: f64, deadline: f64, weight: f64) -> Result<Self, ModelError> {
        let task = Self {
            cycles: None,
            processing_time,
            deadline,
            weight,
        };
        task.check()?;
        Ok(task)
    }

    /// Builds a task from a cycle count; `server_speed` is in cycles per second.
    pub fn from_cycles(cycles: f64, server_speed: f64, deadline: f64, weight: f64) -> Result<Self, ModelError> {
        if !(server_speed > 0.0) {
            return Err(ModelError::InvalidParameter {
                field: "server_speed",
                reason: format!("must be positive, got {server_speed}"),
            });
        }
        let task = Self {
            cycles: Some(cycles),
            processing_time: cycles / server_speed * 1e3,
            deadline,
            weight,
        };
        task.check()?;
        Ok(task)
    }

    pub fn check(&self) -> Result<(), ModelError> {
        let bad = |field: &'static str, v: f64| ModelError::InvalidParameter {
            field,
            reason: format!("must be finite and positive, got {v}"),
        };
        if !(self.processing_time > 0.0 && self.processing_time.is_finite()) {
            return Err(bad("processing_time", self.processing_time));
        }
        if !(self.deadline > 0.0 && self.deadline.is_finite()) {
            return Err(bad("deadline", self.deadline));
        }
        if !(self.weight > 0.0 && self.weight <= 1.0) {
            return Err(ModelError::InvalidParameter {
                field: "weight",
                reason: format!("must lie in (0, 1], got {}", self.weight),
            });
        }
        if let Some(c) = self.cycles {
            if !(c >= 0.0) {
                return Err(ModelError::InvalidParameter {
                    field: "cycles",
                    reason: format!("must be non-negative, got {c}"),
                });
            }
        }
        Ok(())
    }

    /// Checks that `cycles` and `processing_time` agree for the given server.
    pub fn check_consistency(&self, server_speed: f64) -> Result<(), ModelError> {
        let Some(cycles) = self.cycles else {
            return Ok(());
        };
        let expected = cycles / server_speed * 1e3;
        let scale = expected.abs().max(self.processing_time.abs()).max(f64::MIN_POSITIVE);
        if (expected - self.processing_time).abs() / scale > CYCLES_REL_TOL {
            return Err(ModelError::InvalidParameter {
                field: "cycles",
                reason: format!(
                    "{cycles} cycles at {server_speed} cycles/s is {expected} ms, but processing_time is {} ms",
                    self.processing_time
                ),
            });
        }
        Ok(())
    }
}

/// Frame timing, capacity and the objective's latency/drop trade-off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub slots_per_frame: usize,
    /// Frame duration in ms.
    pub frame_duration: f64,
    pub active_users: usize,
    /// Server speed in cycles per second.
    pub server_speed: f64,
    /// Weight of the drop ratio in the objective; latency gets `1 - latency_weight`.
    pub latency_weight: f64,
}

impl FrameConfig {
    pub fn new(
        slots_per_frame: usize,
        frame_duration: f64,
        active_users: usize,
        server_speed: f64,
        latency_weight: f64,
    ) -> Result<Self, ModelError> {
        let config = Self {
            slots_per_frame,
            frame_duration,
            active_users,
            server_speed,
            latency_weight,
        };
        config.check()?;
        Ok(config)
    }

    pub fn check(&self) -> Result<(), ModelError> {
        if self.slots_per_frame == 0 {
            return Err(ModelError::InvalidParameter {
                field: "slots_per_frame",
                reason: "must be at least 1".into(),
            });
        }
        if self.active_users == 0 {
            return Err(ModelError::InvalidParameter {
                field: "active_users",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.frame_duration > 0.0 && self.frame_duration.is_finite()) {
            return Err(ModelError::InvalidParameter {
                field: "frame_duration",
                reason: format!("must be finite and positive, got {}", self.frame_duration),
            });
        }
        if !(self.server_speed > 0.0) {
            return Err(ModelError::InvalidParameter {
                field: "server_speed",
                reason: format!("must be positive, got {}", self.server_speed),
            });
        }
        if !(0.0..=1.0).contains(&self.latency_weight) {
            return Err(ModelError::InvalidParameter {
                field: "latency_weight",
                reason: format!("must lie in [0, 1], got {}", self.latency_weight),
            });
        }
        Ok(())
    }

    /// Mini-slot duration in ms.
    pub fn slot_duration(&self) -> f64 {
        self.frame_duration / self.slots_per_frame as f64
    }

    pub fn with_latency_weight(&self, latency_weight: f64) -> Self {
        Self {
            latency_weight,
            ..self.clone()
        }
    }
}

/// Slot-to-user assignment for one frame. `assignment[j]` is the 0-based user
/// transmitting in mini-slot `j + 1`, or `None` when the slot is left empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Schedule {
    pub assignment: Vec<Option<usize>>,
}

impl Schedule {
    pub fn new(assignment: Vec<Option<usize>>) -> Self {
        Self { assignment }
    }

    pub fn empty(slots: usize) -> Self {
        Self {
            assignment: vec![None; slots],
        }
    }

    /// Parses the 1-based external encoding where `0` marks an empty slot.
    pub fn from_one_based(slots: &[usize]) -> Self {
        Self {
            assignment: slots.iter().map(|&u| u.checked_sub(1)).collect(),
        }
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.assignment.iter().map(|u| u.map_or(0, |u| u + 1)).collect()
    }

    pub fn slots(&self) -> usize {
        self.assignment.len()
    }

    pub fn assigned_count(&self) -> usize {
        self.assignment.iter().filter(|u| u.is_some()).count()
    }

    /// Queue structure for `n_users` users, production form.
    ///
    /// The caller is expected to have validated the schedule; a user appearing
    /// twice keeps its earliest slot.
    pub fn derive_queue(&self, n_users: usize) -> QueueState {
        let mut slot_of = vec![0; n_users];
        let mut queue_position = vec![0; n_users];
        let mut assigned = 0;
        for (j, user) in self.assignment.iter().enumerate() {
            if let Some(u) = *user {
                if u < n_users && slot_of[u] == 0 {
                    assigned += 1;
                    slot_of[u] = j + 1;
                    queue_position[u] = assigned;
                }
            }
        }
        QueueState {
            slot_of,
            queue_position,
            queue_length: assigned,
        }
    }

    /// Users in server-queue order.
    pub fn queue_order(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(j, u)| u.map(|u| (j + 1, u)))
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (j, u) in self.assignment.iter().enumerate() {
            if j > 0 {
                f.write_str(" ")?;
            }
            match u {
                Some(u) => write!(f, "u{}", u + 1)?,
                None => f.write_str("-")?,
            }
        }
        f.write_str("]")
    }
}

/// Per-user slot (`J`) and queue position (`K`), both 1-based with 0 meaning
/// "not assigned", plus the queue length `N_q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueueState {
    pub slot_of: Vec<usize>,
    pub queue_position: Vec<usize>,
    pub queue_length: usize,
}

impl QueueState {
    pub fn is_enqueued(&self, user: usize) -> bool {
        self.queue_position[user] > 0
    }

    /// Users ordered by queue position.
    pub fn order(&self) -> Vec<usize> {
        let mut order = vec![0; self.queue_length];
        for (u, &k) in self.queue_position.iter().enumerate() {
            if k > 0 {
                order[k - 1] = u;
            }
        }
        order
    }
}

/// Binary `X[i][j]`: user `i` transmits in slot `j` (both 0-based here).
pub fn assignment_matrix(schedule: &Schedule, n_users: usize) -> Vec<Vec<u8>> {
    let mut x = vec![vec![0u8; schedule.slots()]; n_users];
    for (j, u) in schedule.assignment.iter().enumerate() {
        if let Some(u) = *u {
            if u < n_users {
                x[u][j] = 1;
            }
        }
    }
    x
}

/// Queue indicator `Y[i][k-1]` built case by case: a user in slot `J` takes the
/// position equal to the number of assigned slots up to and including `J`;
/// an unassigned user gets no position.
pub fn queue_matrix_by_cases(x: &[Vec<u8>]) -> Vec<Vec<u8>> {
    let n_users = x.len();
    let slots = x.first().map_or(0, Vec::len);
    let mut y = vec![vec![0u8; slots]; n_users];
    for i in 0..n_users {
        let Some(slot) = (0..slots).find(|&j| x[i][j] == 1) else {
            continue;
        };
        let k: usize = (0..n_users)
            .map(|r| x[r][..=slot].iter().map(|&v| v as usize).sum::<usize>())
            .sum();
        y[i][k - 1] = 1;
    }
    y
}

/// Same indicator in one-line form, `sign(J) * delta(k - count_up_to(J))`,
/// where `J = sum_j j X[i][j]`.
pub fn queue_matrix_by_sign(x: &[Vec<u8>]) -> Vec<Vec<u8>> {
    let n_users = x.len();
    let slots = x.first().map_or(0, Vec::len);
    let mut y = vec![vec![0u8; slots]; n_users];
    for i in 0..n_users {
        let slot_index: i64 = (0..slots).map(|j| (j as i64 + 1) * x[i][j] as i64).sum();
        let sign = slot_index.signum();
        let upto = slot_index.max(0) as usize;
        let count: i64 = (0..n_users)
            .map(|r| x[r][..upto].iter().map(|&v| v as i64).sum::<i64>())
            .sum();
        for k in 1..=slots as i64 {
            let delta = i64::from(k - count == 0);
            y[i][(k - 1) as usize] = (sign * delta) as u8;
        }
    }
    y
}

/// A broken schedule constraint. User and slot numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintViolation {
    UserOutOfRange { slot: usize, user: usize, active_users: usize },
    DuplicateUser { user: usize, slots: Vec<usize> },
    TooManyAssignments { assigned: usize, active_users: usize },
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UserOutOfRange { slot, user, active_users } => {
                write!(f, "slot {slot}: user u{user} out of range 1..={active_users}")
            }
            Self::DuplicateUser { user, slots } => {
                write!(f, "per-user uniqueness: user u{user} assigned to slots {slots:?}")
            }
            Self::TooManyAssignments { assigned, active_users } => {
                write!(f, "{assigned} assigned slots exceed {active_users} active users")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("schedule has {actual} slots but the frame has {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("{expected} tasks expected for the active users, got {actual}")]
    TaskCount { expected: usize, actual: usize },
    #[error("jamming matrix is {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    JammingShape {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("constraint violated: {}", join_violations(.0))]
    Constraints(Vec<ConstraintViolation>),
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("total task weight is zero; drop ratio undefined")]
    ZeroTotalWeight,
}

fn join_violations(v: &[ConstraintViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Checks slot-exclusivity (by construction), the assignment budget, user
/// range and per-user uniqueness.
pub fn validate_schedule(schedule: &Schedule, config: &FrameConfig) -> Result<(), ModelError> {
    if schedule.slots() != config.slots_per_frame {
        return Err(ModelError::DimensionMismatch {
            expected: config.slots_per_frame,
            actual: schedule.slots(),
        });
    }
    let n = config.active_users;
    let mut violations = Vec::new();
    let mut seen: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (j, user) in schedule.assignment.iter().enumerate() {
        let Some(u) = *user else { continue };
        if u >= n {
            violations.push(ConstraintViolation::UserOutOfRange {
                slot: j + 1,
                user: u + 1,
                active_users: n,
            });
        } else {
            seen[u].push(j + 1);
        }
    }
    for (u, slots) in seen.into_iter().enumerate() {
        if slots.len() > 1 {
            violations.push(ConstraintViolation::DuplicateUser { user: u + 1, slots });
        }
    }
    let assigned = schedule.assigned_count();
    if assigned > n {
        violations.push(ConstraintViolation::TooManyAssignments {
            assigned,
            active_users: n,
        });
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(ModelError::Constraints(violations))
    }
}

/// Per-user, per-slot jamming probabilities with an optional realized pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JammingProfile {
    probabilities: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    realization: Option<Vec<Vec<bool>>>,
}

impl JammingProfile {
    pub fn new(probabilities: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let cols = probabilities.first().map_or(0, Vec::len);
        for row in &probabilities {
            if row.len() != cols {
                return Err(ModelError::JammingShape {
                    rows: probabilities.len(),
                    cols: row.len(),
                    expected_rows: probabilities.len(),
                    expected_cols: cols,
                });
            }
            if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(ModelError::InvalidParameter {
                    field: "jamming probability",
                    reason: format!("must lie in [0, 1], got {p}"),
                });
            }
        }
        Ok(Self {
            probabilities,
            realization: None,
        })
    }

    pub fn uniform(users: usize, slots: usize, p: f64) -> Result<Self, ModelError> {
        Self::new(vec![vec![p; slots]; users])
    }

    pub fn with_realization(mut self, realization: Vec<Vec<bool>>) -> Result<Self, ModelError> {
        let rows = realization.len();
        let bad = rows != self.users() || realization.iter().any(|r| r.len() != self.slots());
        if bad {
            return Err(ModelError::JammingShape {
                rows,
                cols: realization.first().map_or(0, Vec::len),
                expected_rows: self.users(),
                expected_cols: self.slots(),
            });
        }
        self.realization = Some(realization);
        Ok(self)
    }

    pub fn users(&self) -> usize {
        self.probabilities.len()
    }

    pub fn slots(&self) -> usize {
        self.probabilities.first().map_or(0, Vec::len)
    }

    /// Probability that `user`'s transmission in 0-based `slot` is jammed.
    pub fn probability(&self, user: usize, slot: usize) -> f64 {
        self.probabilities[user][slot]
    }

    pub fn probabilities(&self) -> &[Vec<f64>] {
        &self.probabilities
    }

    pub fn realization(&self) -> Option<&[Vec<bool>]> {
        self.realization.as_deref()
    }

    /// Same shape, all probabilities zero.
    pub fn jam_free(&self) -> Self {
        Self {
            probabilities: vec![vec![0.0; self.slots()]; self.users()],
            realization: None,
        }
    }

    pub fn check_dimensions(&self, config: &FrameConfig) -> Result<(), ModelError> {
        if self.users() != config.active_users || self.slots() != config.slots_per_frame {
            return Err(ModelError::JammingShape {
                rows: self.users(),
                cols: self.slots(),
                expected_rows: config.active_users,
                expected_cols: config.slots_per_frame,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(slots: usize, users: usize) -> FrameConfig {
        FrameConfig::new(slots, 10.0, users, 1e9, 0.5).unwrap()
    }

    #[test]
    fn valid_sparse_schedule() {
        let s = Schedule::from_one_based(&[0, 1, 0, 3]);
        assert_eq!(validate_schedule(&s, &frame(4, 3)), Ok(()));
    }

    #[test]
    fn duplicate_user_is_named() {
        let s = Schedule::from_one_based(&[1, 1]);
        match validate_schedule(&s, &frame(2, 2)) {
            Err(ModelError::Constraints(v)) => {
                assert_eq!(v, vec![ConstraintViolation::DuplicateUser { user: 1, slots: vec![1, 2] }]);
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn user_out_of_range() {
        let s = Schedule::from_one_based(&[1, 2, 3]);
        match validate_schedule(&s, &frame(3, 2)) {
            Err(ModelError::Constraints(v)) => assert!(v.iter().any(|c| matches!(
                c,
                ConstraintViolation::UserOutOfRange { slot: 3, user: 3, active_users: 2 }
            ))),
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_structural() {
        let s = Schedule::empty(3);
        assert_eq!(
            validate_schedule(&s, &frame(4, 2)),
            Err(ModelError::DimensionMismatch { expected: 4, actual: 3 })
        );
    }

    #[test]
    fn queue_positions_follow_slot_order() {
        let q = Schedule::from_one_based(&[0, 1, 0, 3]).derive_queue(3);
        assert_eq!(q.queue_position, vec![1, 0, 2]);
        assert_eq!(q.slot_of, vec![2, 0, 4]);
        assert_eq!(q.queue_length, 2);
        assert_eq!(q.order(), vec![0, 2]);
    }

    #[test]
    fn empty_schedule_has_empty_queue() {
        let q = Schedule::empty(5).derive_queue(3);
        assert_eq!(q.queue_position, vec![0, 0, 0]);
        assert_eq!(q.queue_length, 0);
    }

    #[test]
    fn cycles_must_match_processing_time() {
        let t = Task::from_cycles(4e6, 1e9, 20.0, 1.0).unwrap();
        assert!((t.processing_time - 4.0).abs() < 1e-12);
        assert!(t.check_consistency(1e9).is_ok());
        assert!(t.check_consistency(2e9).is_err());
    }

    #[test]
    fn slot_duration_from_frame() {
        let c = FrameConfig::new(30, 10.0, 10, 1e9, 0.5).unwrap();
        assert!((c.slot_duration() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn one_based_round_trip() {
        let s = Schedule::from_one_based(&[0, 2, 1, 0]);
        assert_eq!(s.assignment, vec![None, Some(1), Some(0), None]);
        assert_eq!(s.to_one_based(), vec![0, 2, 1, 0]);
        assert_eq!(s.to_string(), "[- u2 u1 -]");
    }

    #[test]
    fn realization_shape_checked() {
        let p = JammingProfile::uniform(2, 3, 0.4).unwrap();
        assert!(p.clone().with_realization(vec![vec![false; 3]; 2]).is_ok());
        assert!(p.with_realization(vec![vec![false; 2]; 2]).is_err());
        assert!(JammingProfile::new(vec![vec![1.5]]).is_err());
    }
}
