use std::cmp::Ordering;

use super::{check_instance, SolverError, SolverResult};
use crate::model::{FrameConfig, JammingProfile, Schedule, Task};
use crate::objective::jto_us_objective;

/// Shortest job first: users in ascending processing time fill slots 1..N_a.
/// The jamming profile only enters the reported objective.
pub fn solve_sjf(tasks: &[Task], jamming: &JammingProfile, config: &FrameConfig) -> Result<SolverResult, SolverError> {
    sorted_fill(tasks, jamming, config, |t| t.processing_time)
}

/// Shortest deadline first.
pub fn solve_sdf(tasks: &[Task], jamming: &JammingProfile, config: &FrameConfig) -> Result<SolverResult, SolverError> {
    sorted_fill(tasks, jamming, config, |t| t.deadline)
}

fn sorted_fill(
    tasks: &[Task],
    jamming: &JammingProfile,
    config: &FrameConfig,
    key: impl Fn(&Task) -> f64,
) -> Result<SolverResult, SolverError> {
    check_instance(tasks, jamming, config)?;
    if tasks.len() > config.slots_per_frame {
        return Err(SolverError::Infeasible {
            users: tasks.len(),
            slots: config.slots_per_frame,
        });
    }
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    // Stable sort keeps user-id order among equal keys.
    order.sort_by(|&a, &b| key(&tasks[a]).partial_cmp(&key(&tasks[b])).unwrap_or(Ordering::Equal));

    let mut schedule = Schedule::empty(config.slots_per_frame);
    for (slot, user) in order.into_iter().enumerate() {
        schedule.assignment[slot] = Some(user);
    }
    let objective_value = jto_us_objective(&schedule, tasks, jamming, config)?;
    Ok(SolverResult {
        schedule,
        objective_value,
        generations_run: 0,
        evaluations: 1,
        converged_reason: None,
        incumbent_history: Vec::new(),
    })
}
