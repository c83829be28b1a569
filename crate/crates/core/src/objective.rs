//! Latency, deadline and drop metrics for a schedule, both in expectation over
//! the jammer and for one realized jam pattern.

use serde::{Deserialize, Serialize};

use crate::model::{FrameConfig, JammingProfile, ModelError, QueueState, Schedule, Task};

/// Per-user latency decomposition (ms) and the normalized weighted latency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyBreakdown {
    pub communication: Vec<f64>,
    pub queue_wait: Vec<f64>,
    pub total: Vec<f64>,
    pub deadline_miss: Vec<bool>,
    pub normalized: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DropMetrics {
    pub expected_weighted_dropped: f64,
    pub expected_drop_ratio: f64,
}

/// Denominator of the normalized latency: every user waiting a whole frame
/// plus the full processing load.
pub fn latency_normalizer(tasks: &[Task], config: &FrameConfig) -> f64 {
    config.active_users as f64 * config.slots_per_frame as f64 * config.slot_duration()
        + tasks.iter().map(|t| t.processing_time).sum::<f64>()
}

fn check_tasks(tasks: &[Task], config: &FrameConfig) -> Result<(), ModelError> {
    if tasks.len() != config.active_users {
        return Err(ModelError::TaskCount {
            expected: config.active_users,
            actual: tasks.len(),
        });
    }
    Ok(())
}

pub fn latency_breakdown(
    queue: &QueueState,
    tasks: &[Task],
    config: &FrameConfig,
) -> Result<LatencyBreakdown, ModelError> {
    check_tasks(tasks, config)?;
    let n = tasks.len();
    let ts = config.slot_duration();
    let mut communication = vec![0.0; n];
    let mut queue_wait = vec![0.0; n];

    let mut cumulative = 0.0;
    for u in queue.order() {
        communication[u] = queue.slot_of[u] as f64 * ts;
        queue_wait[u] = cumulative;
        cumulative += tasks[u].processing_time;
    }

    let total: Vec<f64> = communication.iter().zip(&queue_wait).map(|(c, q)| c + q).collect();
    let deadline_miss: Vec<bool> = tasks
        .iter()
        .zip(&total)
        .map(|(t, l)| l + t.processing_time > t.deadline)
        .collect();

    let numerator: f64 = (0..n)
        .filter(|&u| queue.is_enqueued(u) && !deadline_miss[u])
        .map(|u| tasks[u].weight * (communication[u] + queue_wait[u]))
        .sum();

    Ok(LatencyBreakdown {
        communication,
        queue_wait,
        total,
        deadline_miss,
        normalized: numerator / latency_normalizer(tasks, config),
    })
}

/// Expected weighted drop count and ratio under independent jamming.
/// `deadline_miss` holds the jam-free deadline flags.
pub fn expected_drop_ratio(
    schedule: &Schedule,
    tasks: &[Task],
    jamming: &JammingProfile,
    deadline_miss: &[bool],
) -> Result<DropMetrics, ModelError> {
    let total_weight: f64 = tasks.iter().map(|t| t.weight).sum();
    if !(total_weight > 0.0) {
        return Err(ModelError::ZeroTotalWeight);
    }
    let delivered: f64 = schedule
        .queue_order()
        .filter(|&(_, u)| !deadline_miss[u])
        .map(|(slot, u)| tasks[u].weight * (1.0 - jamming.probability(u, slot - 1)))
        .sum();
    let dropped = total_weight - delivered;
    Ok(DropMetrics {
        expected_weighted_dropped: dropped,
        expected_drop_ratio: dropped / total_weight,
    })
}

/// All nominal metrics for a schedule plus the combined objective.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub latency: LatencyBreakdown,
    pub drops: DropMetrics,
    pub objective: f64,
}

pub fn evaluate(
    schedule: &Schedule,
    tasks: &[Task],
    jamming: &JammingProfile,
    config: &FrameConfig,
) -> Result<Evaluation, ModelError> {
    crate::model::validate_schedule(schedule, config)?;
    check_tasks(tasks, config)?;
    jamming.check_dimensions(config)?;
    let queue = schedule.derive_queue(config.active_users);
    let latency = latency_breakdown(&queue, tasks, config)?;
    let drops = expected_drop_ratio(schedule, tasks, jamming, &latency.deadline_miss)?;
    let lambda = config.latency_weight;
    let objective = lambda * drops.expected_drop_ratio + (1.0 - lambda) * latency.normalized;
    Ok(Evaluation {
        latency,
        drops,
        objective,
    })
}

/// `lambda * E[drop ratio] + (1 - lambda) * normalized latency`.
pub fn jto_us_objective(
    schedule: &Schedule,
    tasks: &[Task],
    jamming: &JammingProfile,
    config: &FrameConfig,
) -> Result<f64, ModelError> {
    evaluate(schedule, tasks, jamming, config).map(|e| e.objective)
}

/// What happened to one user's task in a realized frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TaskOutcome {
    Unassigned,
    Jammed,
    /// Reached the server but finished after its deadline.
    DeadlineMiss { latency: f64 },
    Completed { latency: f64 },
}

impl TaskOutcome {
    pub fn is_dropped(&self) -> bool {
        !matches!(self, Self::Completed { .. })
    }
}

/// Which tasks the realized mean latency averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyAveraging {
    /// Tasks that finish before their deadline.
    #[default]
    Completed,
    /// Every task that reached the server, late or not.
    Enqueued,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizedMetrics {
    pub outcomes: Vec<TaskOutcome>,
    pub weighted_drop_ratio: f64,
    pub unweighted_drop_ratio: f64,
    /// `None` when no task qualifies for the average.
    pub mean_latency_completed: Option<f64>,
    pub mean_latency_enqueued: Option<f64>,
}

impl RealizedMetrics {
    pub fn mean_latency(&self, mode: LatencyAveraging) -> Option<f64> {
        match mode {
            LatencyAveraging::Completed => self.mean_latency_completed,
            LatencyAveraging::Enqueued => self.mean_latency_enqueued,
        }
    }

    pub fn latencies(&self, mode: LatencyAveraging) -> impl Iterator<Item = f64> + '_ {
        self.outcomes.iter().filter_map(move |o| match (*o, mode) {
            (TaskOutcome::Completed { latency }, _) => Some(latency),
            (TaskOutcome::DeadlineMiss { latency }, LatencyAveraging::Enqueued) => Some(latency),
            _ => None,
        })
    }
}

/// Plays one frame against a realized jam pattern. Jammed uploads never reach
/// the server, so the surviving tasks close ranks in slot order before waits
/// and deadlines are computed. Late tasks still occupy the server.
pub fn realized_metrics(
    schedule: &Schedule,
    tasks: &[Task],
    realization: &[Vec<bool>],
    config: &FrameConfig,
) -> Result<RealizedMetrics, ModelError> {
    crate::model::validate_schedule(schedule, config)?;
    check_tasks(tasks, config)?;
    let n = tasks.len();
    if realization.len() != n || realization.iter().any(|r| r.len() != config.slots_per_frame) {
        return Err(ModelError::JammingShape {
            rows: realization.len(),
            cols: realization.first().map_or(0, Vec::len),
            expected_rows: n,
            expected_cols: config.slots_per_frame,
        });
    }
    let ts = config.slot_duration();
    let mut outcomes = vec![TaskOutcome::Unassigned; n];
    let mut cumulative = 0.0;
    for (slot, u) in schedule.queue_order() {
        if realization[u][slot - 1] {
            outcomes[u] = TaskOutcome::Jammed;
            continue;
        }
        let latency = slot as f64 * ts + cumulative;
        cumulative += tasks[u].processing_time;
        outcomes[u] = if latency + tasks[u].processing_time > tasks[u].deadline {
            TaskOutcome::DeadlineMiss { latency }
        } else {
            TaskOutcome::Completed { latency }
        };
    }

    let total_weight: f64 = tasks.iter().map(|t| t.weight).sum();
    if !(total_weight > 0.0) {
        return Err(ModelError::ZeroTotalWeight);
    }
    let dropped_weight: f64 = outcomes
        .iter()
        .zip(tasks)
        .filter(|(o, _)| o.is_dropped())
        .map(|(_, t)| t.weight)
        .sum();
    let dropped = outcomes.iter().filter(|o| o.is_dropped()).count();

    let mut metrics = RealizedMetrics {
        outcomes,
        weighted_drop_ratio: dropped_weight / total_weight,
        unweighted_drop_ratio: dropped as f64 / n as f64,
        mean_latency_completed: None,
        mean_latency_enqueued: None,
    };
    metrics.mean_latency_completed = mean(metrics.latencies(LatencyAveraging::Completed));
    metrics.mean_latency_enqueued = mean(metrics.latencies(LatencyAveraging::Enqueued));
    Ok(metrics)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Fast objective evaluation for solvers: one pass over the slots, no
/// allocation. Must agree with [`jto_us_objective`] on every valid schedule.
#[derive(Debug, Clone)]
pub struct FitnessEvaluator<'a> {
    tasks: &'a [Task],
    survival: Vec<Vec<f64>>,
    slot_duration: f64,
    lambda: f64,
    normalizer: f64,
    total_weight: f64,
}

impl<'a> FitnessEvaluator<'a> {
    pub fn new(tasks: &'a [Task], jamming: &JammingProfile, config: &FrameConfig) -> Result<Self, ModelError> {
        check_tasks(tasks, config)?;
        jamming.check_dimensions(config)?;
        let total_weight: f64 = tasks.iter().map(|t| t.weight).sum();
        if !(total_weight > 0.0) {
            return Err(ModelError::ZeroTotalWeight);
        }
        Ok(Self {
            tasks,
            survival: jamming
                .probabilities()
                .iter()
                .map(|row| row.iter().map(|p| 1.0 - p).collect())
                .collect(),
            slot_duration: config.slot_duration(),
            lambda: config.latency_weight,
            normalizer: latency_normalizer(tasks, config),
            total_weight,
        })
    }

    /// Objective of a feasible assignment.
    pub fn objective(&self, assignment: &[Option<usize>]) -> f64 {
        let mut cumulative = 0.0;
        let mut latency = 0.0;
        let mut delivered = 0.0;
        for (j, user) in assignment.iter().enumerate() {
            let Some(u) = *user else { continue };
            let task = &self.tasks[u];
            let comm = (j + 1) as f64 * self.slot_duration;
            let wait = cumulative;
            cumulative += task.processing_time;
            if comm + wait + task.processing_time > task.deadline {
                continue;
            }
            latency += task.weight * (comm + wait);
            delivered += task.weight * self.survival[u][j];
        }
        let drop_ratio = (self.total_weight - delivered) / self.total_weight;
        self.lambda * drop_ratio + (1.0 - self.lambda) * latency / self.normalizer
    }
}
