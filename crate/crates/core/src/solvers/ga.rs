//! Genetic algorithm over slot-assignment vectors.
//!
//! A chromosome is the schedule itself: one gene per mini-slot holding either
//! no user or a user index. Slot exclusivity holds by construction, and a
//! repair pass after every variation step drops later repeats of a user so the
//! whole population stays feasible.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_instance, SolverError, SolverResult, StopReason};
use crate::model::{FrameConfig, JammingProfile, Schedule, Task};
use crate::objective::{jto_us_objective, FitnessEvaluator};

type Genes = Vec<Option<usize>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population_size: usize,
    pub max_generations: usize,
    /// Share of non-elite offspring produced by crossover; the rest by mutation.
    pub crossover_fraction: f64,
    /// Improvements of the incumbent below this count as stalled generations.
    pub function_tolerance: f64,
    /// Accepted for completeness; every chromosome is feasible, so unused.
    pub constraint_tolerance: f64,
    pub max_stall_generations: usize,
    pub rng_seed: u64,
    pub elite_fraction: f64,
    pub tournament_size: usize,
    /// Per-gene reset probability; `None` means `1 / S`.
    pub mutation_rate: Option<f64>,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 400,
            max_generations: 500,
            crossover_fraction: 0.5,
            function_tolerance: 1e-10,
            constraint_tolerance: 1e-6,
            max_stall_generations: 50,
            rng_seed: 0,
            elite_fraction: 0.05,
            tournament_size: 2,
            mutation_rate: None,
        }
    }
}

impl GaConfig {
    pub fn with_seed(&self, rng_seed: u64) -> Self {
        Self {
            rng_seed,
            ..self.clone()
        }
    }

    pub fn check(&self) -> Result<(), SolverError> {
        let bad = |field: &'static str, reason: String| Err(SolverError::InvalidGaConfig { field, reason });
        if self.population_size < 2 {
            return bad("population_size", format!("must be at least 2, got {}", self.population_size));
        }
        if !(0.0..=1.0).contains(&self.crossover_fraction) {
            return bad("crossover_fraction", format!("must lie in [0, 1], got {}", self.crossover_fraction));
        }
        if !(self.function_tolerance > 0.0) {
            return bad("function_tolerance", format!("must be positive, got {}", self.function_tolerance));
        }
        if !(self.constraint_tolerance > 0.0) {
            return bad("constraint_tolerance", format!("must be positive, got {}", self.constraint_tolerance));
        }
        if !(0.0..1.0).contains(&self.elite_fraction) {
            return bad("elite_fraction", format!("must lie in [0, 1), got {}", self.elite_fraction));
        }
        if self.tournament_size == 0 {
            return bad("tournament_size", "must be at least 1".into());
        }
        if let Some(rate) = self.mutation_rate {
            if !(0.0..=1.0).contains(&rate) {
                return bad("mutation_rate", format!("must lie in [0, 1], got {rate}"));
            }
        }
        Ok(())
    }

    fn elite_count(&self) -> usize {
        ((self.population_size as f64 * self.elite_fraction).ceil() as usize).clamp(1, self.population_size - 1)
    }
}

/// Minimizes the joint drop/latency objective under the given jamming profile.
pub fn solve_ga(
    tasks: &[Task],
    jamming: &JammingProfile,
    config: &FrameConfig,
    ga: &GaConfig,
) -> Result<SolverResult, SolverError> {
    check_instance(tasks, jamming, config)?;
    let fitness = FitnessEvaluator::new(tasks, jamming, config)?;
    finish(evolve(&fitness, config, ga)?, tasks, jamming, config)
}

/// Same search with every jamming probability treated as zero; the result is
/// still scored against the true profile.
pub fn solve_ga_nj(
    tasks: &[Task],
    jamming: &JammingProfile,
    config: &FrameConfig,
    ga: &GaConfig,
) -> Result<SolverResult, SolverError> {
    check_instance(tasks, jamming, config)?;
    let blind = jamming.jam_free();
    let fitness = FitnessEvaluator::new(tasks, &blind, config)?;
    finish(evolve(&fitness, config, ga)?, tasks, jamming, config)
}

fn finish(
    run: Run,
    tasks: &[Task],
    jamming: &JammingProfile,
    config: &FrameConfig,
) -> Result<SolverResult, SolverError> {
    let schedule = Schedule::new(run.best);
    let objective_value = jto_us_objective(&schedule, tasks, jamming, config)?;
    Ok(SolverResult {
        schedule,
        objective_value,
        generations_run: run.generations,
        evaluations: run.evaluations,
        converged_reason: Some(run.reason),
        incumbent_history: run.history,
    })
}

struct Run {
    best: Genes,
    history: Vec<f64>,
    generations: usize,
    evaluations: usize,
    reason: StopReason,
}

struct Operators {
    users: usize,
    mutation_rate: f64,
    tournament_size: usize,
    seen: Vec<bool>,
}

impl Operators {
    fn random_gene<R: Rng>(&self, rng: &mut R) -> Option<usize> {
        let g = rng.gen_range(0..=self.users);
        g.checked_sub(1)
    }

    /// Empties every repeat of a user after its first slot.
    fn repair(&mut self, genes: &mut Genes) {
        self.seen.iter_mut().for_each(|s| *s = false);
        for g in genes.iter_mut() {
            if let Some(u) = *g {
                if std::mem::replace(&mut self.seen[u], true) {
                    *g = None;
                }
            }
        }
    }

    fn tournament<R: Rng>(&self, scores: &[f64], rng: &mut R) -> usize {
        let mut winner = rng.gen_range(0..scores.len());
        for _ in 1..self.tournament_size {
            let challenger = rng.gen_range(0..scores.len());
            if scores[challenger] < scores[winner] {
                winner = challenger;
            }
        }
        winner
    }

    fn crossover<R: Rng>(&self, a: &Genes, b: &Genes, rng: &mut R) -> Genes {
        a.iter().zip(b).map(|(&x, &y)| if rng.gen_bool(0.5) { x } else { y }).collect()
    }

    fn mutate<R: Rng>(&self, genes: &mut Genes, rng: &mut R) {
        for slot in 0..genes.len() {
            if rng.gen_bool(self.mutation_rate) {
                genes[slot] = self.random_gene(rng);
            }
        }
    }
}

fn evolve(fitness: &FitnessEvaluator<'_>, config: &FrameConfig, ga: &GaConfig) -> Result<Run, SolverError> {
    ga.check()?;
    let slots = config.slots_per_frame;
    let mut rng = ChaCha8Rng::seed_from_u64(ga.rng_seed);
    let mut ops = Operators {
        users: config.active_users,
        mutation_rate: ga.mutation_rate.unwrap_or(1.0 / slots as f64),
        tournament_size: ga.tournament_size,
        seen: vec![false; config.active_users],
    };

    let mut population: Vec<Genes> = (0..ga.population_size)
        .map(|_| {
            let mut g: Genes = (0..slots).map(|_| ops.random_gene(&mut rng)).collect();
            ops.repair(&mut g);
            g
        })
        .collect();
    let mut scores: Vec<f64> = population.iter().map(|g| fitness.objective(g)).collect();
    let mut evaluations = population.len();

    let elites = ga.elite_count();
    let children = ga.population_size - elites;
    let crossover_children = (children as f64 * ga.crossover_fraction).round() as usize;

    let mut best = best_index(&scores);
    let mut history = vec![scores[best]];
    let mut stall = 0;
    let mut generations = 0;
    let mut reason = StopReason::MaxGenerations;

    while generations < ga.max_generations {
        if scores[best] <= ga.function_tolerance {
            reason = StopReason::Tolerance;
            break;
        }
        generations += 1;

        let mut ranked: Vec<usize> = (0..population.len()).collect();
        ranked.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));

        let mut next: Vec<Genes> = ranked[..elites].iter().map(|&i| population[i].clone()).collect();
        let mut next_scores: Vec<f64> = ranked[..elites].iter().map(|&i| scores[i]).collect();

        for c in 0..children {
            let mut child = if c < crossover_children {
                let a = ops.tournament(&scores, &mut rng);
                let b = ops.tournament(&scores, &mut rng);
                ops.crossover(&population[a], &population[b], &mut rng)
            } else {
                let mut g = population[ops.tournament(&scores, &mut rng)].clone();
                ops.mutate(&mut g, &mut rng);
                g
            };
            ops.repair(&mut child);
            next_scores.push(fitness.objective(&child));
            next.push(child);
        }
        evaluations += children;

        // Children are shuffled against each other only; elites keep the front.
        let mut order: Vec<usize> = (elites..next.len()).collect();
        order.shuffle(&mut rng);
        let reordered: Vec<usize> = (0..elites).chain(order).collect();
        population = reordered.iter().map(|&i| std::mem::take(&mut next[i])).collect();
        scores = reordered.iter().map(|&i| next_scores[i]).collect();

        // Slot 0 holds the previous incumbent.
        best = best_index(&scores);
        let improvement = scores[0] - scores[best];
        history.push(scores[best]);
        if improvement < ga.function_tolerance {
            stall += 1;
            if stall >= ga.max_stall_generations {
                reason = StopReason::Stall;
                break;
            }
        } else {
            stall = 0;
        }
    }

    Ok(Run {
        best: population.swap_remove(best),
        history,
        generations,
        evaluations,
        reason,
    })
}

fn best_index(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = i;
        }
    }
    best
}
