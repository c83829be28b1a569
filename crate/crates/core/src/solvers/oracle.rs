use super::{check_instance, SolverError, SolverResult};
use crate::model::{FrameConfig, JammingProfile, Schedule, Task};
use crate::objective::{jto_us_objective, FitnessEvaluator};

/// Upper bound on `(N_a + 1)^S` accepted by [`brute_force_oracle`].
pub const ORACLE_CANDIDATE_LIMIT: f64 = 1e7;

/// Global optimum by enumerating every feasible assignment vector. Among
/// equal objectives the first in enumeration order wins (empty slot before
/// user 1 before user 2, slot 1 most significant).
pub fn brute_force_oracle(
    tasks: &[Task],
    jamming: &JammingProfile,
    config: &FrameConfig,
) -> Result<SolverResult, SolverError> {
    check_instance(tasks, jamming, config)?;
    let candidates = ((config.active_users + 1) as f64).powi(config.slots_per_frame as i32);
    if candidates > ORACLE_CANDIDATE_LIMIT {
        return Err(SolverError::TooLarge {
            candidates,
            limit: ORACLE_CANDIDATE_LIMIT,
        });
    }
    let fitness = FitnessEvaluator::new(tasks, jamming, config)?;
    let mut search = Search {
        fitness: &fitness,
        current: vec![None; config.slots_per_frame],
        used: vec![false; config.active_users],
        best: None,
        evaluations: 0,
    };
    search.descend(0);
    let (_, best) = search.best.expect("the empty schedule is always feasible");
    let schedule = Schedule::new(best);
    let objective_value = jto_us_objective(&schedule, tasks, jamming, config)?;
    Ok(SolverResult {
        schedule,
        objective_value,
        generations_run: 0,
        evaluations: search.evaluations,
        converged_reason: None,
        incumbent_history: Vec::new(),
    })
}

struct Search<'a, 'b> {
    fitness: &'a FitnessEvaluator<'b>,
    current: Vec<Option<usize>>,
    used: Vec<bool>,
    best: Option<(f64, Vec<Option<usize>>)>,
    evaluations: usize,
}

impl Search<'_, '_> {
    fn descend(&mut self, slot: usize) {
        if slot == self.current.len() {
            self.evaluations += 1;
            let value = self.fitness.objective(&self.current);
            if self.best.as_ref().is_none_or(|(b, _)| value < *b) {
                self.best = Some((value, self.current.clone()));
            }
            return;
        }
        self.current[slot] = None;
        self.descend(slot + 1);
        for u in 0..self.used.len() {
            if self.used[u] {
                continue;
            }
            self.used[u] = true;
            self.current[slot] = Some(u);
            self.descend(slot + 1);
            self.used[u] = false;
        }
        self.current[slot] = None;
    }
}
