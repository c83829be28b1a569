//! Monte Carlo driver: random frames, every solver on the same frame and the
//! same jam pattern, aggregated per jamming probability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::jammer::{build_profile, JammerSpec};
use crate::model::{FrameConfig, ModelError, Task};
use crate::objective::{evaluate, realized_metrics, LatencyAveraging};
use crate::seeds;
use crate::solvers::{GaConfig, SolverError, SolverKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightScheme {
    UniformOne,
    TwoPriority { w_low: f64, w_high: f64, p_high: f64 },
}

impl WeightScheme {
    /// Distinct weight values the scheme can produce, ascending.
    pub fn classes(&self) -> Vec<f64> {
        match *self {
            Self::UniformOne => vec![1.0],
            Self::TwoPriority { w_low, w_high, .. } if w_low == w_high => vec![w_low],
            Self::TwoPriority { w_low, w_high, .. } => {
                vec![w_low.min(w_high), w_low.max(w_high)]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Processing time range in ms.
    pub t_p_range: [f64; 2],
    /// Deadline range in ms.
    pub t_d_range: [f64; 2],
    pub active_users: usize,
    pub slots_per_frame: usize,
    /// Frame duration in ms.
    pub frame_duration: f64,
    pub n_sim: usize,
    pub lambda: f64,
    pub weight_scheme: WeightScheme,
    pub sweep: Vec<f64>,
    pub solvers: Vec<SolverKind>,
    pub rng_seed: u64,
    #[serde(default = "default_server_speed")]
    pub server_speed: f64,
    /// When set, each user is active in a frame with this probability instead
    /// of all `active_users` being present.
    #[serde(default)]
    pub activity_probability: Option<f64>,
    #[serde(default)]
    pub latency_averaging: LatencyAveraging,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn default_server_speed() -> f64 {
    1e9
}

fn default_bins() -> usize {
    5
}

impl ScenarioConfig {
    /// Frame and task parameters of the reference setup: 10 users, 30
    /// mini-slots in a 10 ms frame, processing times in [2, 10] ms and
    /// deadlines in [5, 50] ms, 300 frames per point.
    pub fn table1() -> Self {
        Self {
            t_p_range: [2.0, 10.0],
            t_d_range: [5.0, 50.0],
            active_users: 10,
            slots_per_frame: 30,
            frame_duration: 10.0,
            n_sim: 300,
            lambda: 0.99,
            weight_scheme: WeightScheme::UniformOne,
            sweep: (0..=10).map(|i| i as f64 / 10.0).collect(),
            solvers: SolverKind::PAPER_SET.to_vec(),
            rng_seed: 1,
            server_speed: default_server_speed(),
            activity_probability: None,
            latency_averaging: LatencyAveraging::Completed,
            bins: default_bins(),
        }
    }

    pub fn two_priority(p_high: f64) -> WeightScheme {
        WeightScheme::TwoPriority {
            w_low: 0.1,
            w_high: 0.9,
            p_high,
        }
    }

    pub fn check(&self) -> Result<(), HarnessError> {
        let bad = |field: &'static str, reason: String| Err(HarnessError::Config { field, reason });
        for (field, [lo, hi]) in [("t_p_range", self.t_p_range), ("t_d_range", self.t_d_range)] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return bad(field, format!("need 0 < min <= max, got [{lo}, {hi}]"));
            }
        }
        if self.n_sim == 0 {
            return bad("n_sim", "must be at least 1".into());
        }
        if self.bins == 0 {
            return bad("bins", "must be at least 1".into());
        }
        if let Some(p) = self.sweep.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad("sweep", format!("probabilities must lie in [0, 1], got {p}"));
        }
        if self.solvers.is_empty() {
            return bad("solvers", "at least one solver is required".into());
        }
        if let WeightScheme::TwoPriority { w_low, w_high, p_high } = self.weight_scheme {
            for (field, w) in [("weight_scheme.w_low", w_low), ("weight_scheme.w_high", w_high)] {
                if !(w > 0.0 && w <= 1.0) {
                    return bad(field, format!("must lie in (0, 1], got {w}"));
                }
            }
            if !(0.0..=1.0).contains(&p_high) {
                return bad("weight_scheme.p_high", format!("must lie in [0, 1], got {p_high}"));
            }
        }
        if let Some(q) = self.activity_probability {
            if !(0.0..=1.0).contains(&q) {
                return bad("activity_probability", format!("must lie in [0, 1], got {q}"));
            }
        }
        self.frame_config(self.active_users)?;
        Ok(())
    }

    pub fn frame_config(&self, active_users: usize) -> Result<FrameConfig, ModelError> {
        FrameConfig::new(
            self.slots_per_frame,
            self.frame_duration,
            active_users,
            self.server_speed,
            self.lambda,
        )
    }
}

/// Draws the tasks of one frame. All `active_users` users are present unless
/// an activity probability is configured.
pub fn generate_frame(scenario: &ScenarioConfig, frame_seed: u64) -> Vec<Task> {
    let mut rng = ChaCha8Rng::seed_from_u64(frame_seed);
    let [tp_lo, tp_hi] = scenario.t_p_range;
    let [td_lo, td_hi] = scenario.t_d_range;
    let mut tasks = Vec::with_capacity(scenario.active_users);
    for _ in 0..scenario.active_users {
        let active = scenario.activity_probability.is_none_or(|q| rng.gen_bool(q));
        let processing_time = uniform(&mut rng, tp_lo, tp_hi);
        let deadline = uniform(&mut rng, td_lo, td_hi);
        let weight = match scenario.weight_scheme {
            WeightScheme::UniformOne => 1.0,
            WeightScheme::TwoPriority { w_low, w_high, p_high } => {
                if rng.gen_bool(p_high) {
                    w_high
                } else {
                    w_low
                }
            }
        };
        if active {
            tasks.push(Task {
                cycles: Some(processing_time * 1e-3 * scenario.server_speed),
                processing_time,
                deadline,
                weight,
            });
        }
    }
    tasks
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario {field}: {reason}")]
    Config { field: &'static str, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{solver} failed at jam probability {jam_prob}, replicate {replicate} (frame seed {frame_seed}, jam seed {jam_seed}, solver seed {solver_seed}): {source}")]
    Replicate {
        solver: SolverKind,
        jam_prob: f64,
        replicate: usize,
        frame_seed: u64,
        jam_seed: u64,
        solver_seed: u64,
        source: SolverError,
    },
}

/// One task's fate in one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaskRecord {
    pub weight: f64,
    pub deadline: f64,
    pub processing_time: f64,
    pub dropped: bool,
}

/// One solver on one frame at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub solver: SolverKind,
    pub point: usize,
    pub jam_prob: f64,
    pub replicate: usize,
    pub frame_seed: u64,
    pub jam_seed: u64,
    pub solver_seed: u64,
    pub weighted_drop_ratio: f64,
    pub unweighted_drop_ratio: f64,
    pub nominal_expected_drop: f64,
    pub objective: f64,
    pub latency_sum: f64,
    pub latency_count: usize,
    pub tasks: Vec<TaskRecord>,
}

impl ReplicateRecord {
    pub fn mean_latency(&self) -> Option<f64> {
        (self.latency_count > 0).then(|| self.latency_sum / self.latency_count as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub solver: SolverKind,
    pub jam_prob: f64,
    /// Mean over replicates of the weighted realized drop ratio.
    pub mean_drop_ratio: f64,
    pub mean_unweighted_drop_ratio: f64,
    /// Pooled over every task counted by the latency averaging mode.
    pub mean_latency_ms: Option<f64>,
    pub nominal_expected_drop: f64,
    pub n_sim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Overall,
    Weight,
    Deadline,
    ProcessingTime,
}

impl Axis {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Overall => "overall",
            Self::Weight => "weight",
            Self::Deadline => "deadline",
            Self::ProcessingTime => "processing_time",
        }
    }
}

/// Unweighted drop fraction of the tasks falling into one bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionBin {
    pub solver: SolverKind,
    pub jam_prob: f64,
    pub axis: Axis,
    pub bin_low: f64,
    pub bin_high: f64,
    pub count: usize,
    pub dropped: usize,
}

impl DistributionBin {
    /// `None` for an empty bin.
    pub fn drop_fraction(&self) -> Option<f64> {
        (self.count > 0).then(|| self.dropped as f64 / self.count as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub rng_seed: u64,
    pub n_sim: usize,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub points: Vec<PointSummary>,
    pub distributions: Vec<DistributionBin>,
    pub replicates: Vec<ReplicateRecord>,
    pub metadata: RunMetadata,
}

impl MetricsReport {
    pub fn point(&self, solver: SolverKind, jam_prob: f64) -> Option<&PointSummary> {
        self.points.iter().find(|p| p.solver == solver && p.jam_prob == jam_prob)
    }

    pub fn bins(&self, solver: SolverKind, jam_prob: f64, axis: Axis) -> impl Iterator<Item = &DistributionBin> {
        self.distributions
            .iter()
            .filter(move |b| b.solver == solver && b.jam_prob == jam_prob && b.axis == axis)
    }

    pub fn weight_class_drop(&self, solver: SolverKind, jam_prob: f64, weight: f64) -> Option<f64> {
        self.bins(solver, jam_prob, Axis::Weight)
            .find(|b| b.bin_low == weight)
            .and_then(DistributionBin::drop_fraction)
    }

    pub fn overall_unweighted_drop(&self, solver: SolverKind, jam_prob: f64) -> Option<f64> {
        self.bins(solver, jam_prob, Axis::Overall)
            .next()
            .and_then(DistributionBin::drop_fraction)
    }
}

/// Hash of the inputs that fully determine a run.
pub fn config_hash(scenario: &ScenarioConfig, jammer: &JammerSpec, ga: &GaConfig) -> String {
    let bytes = serde_json::to_vec(&(scenario, jammer, ga)).expect("configs serialize");
    hex::encode(Sha256::digest(&bytes))
}

/// Runs every sweep point and replicate. The jammer spec is a template whose
/// marginal probability is retargeted to each sweep value.
pub fn run_sweep(scenario: &ScenarioConfig, jammer: &JammerSpec, ga: &GaConfig) -> Result<MetricsReport, HarnessError> {
    scenario.check()?;
    jammer.check()?;
    ga.check()?;
    let specs = scenario
        .sweep
        .iter()
        .map(|&p| jammer.at_probability(p))
        .collect::<Result<Vec<_>, _>>()?;

    let jobs: Vec<(usize, usize)> = (0..scenario.sweep.len())
        .flat_map(|k| (0..scenario.n_sim).map(move |r| (k, r)))
        .collect();
    let per_job = jobs
        .par_iter()
        .map(|&(k, r)| run_replicate(scenario, &specs[k], ga, k, r))
        .collect::<Result<Vec<_>, _>>()?;
    let replicates: Vec<ReplicateRecord> = per_job.into_iter().flatten().collect();

    let mut points = Vec::new();
    for (k, &p) in scenario.sweep.iter().enumerate() {
        for &solver in &scenario.solvers {
            let recs: Vec<&ReplicateRecord> = replicates
                .iter()
                .filter(|r| r.point == k && r.solver == solver)
                .collect();
            points.push(summarize(solver, p, &recs));
        }
    }

    Ok(MetricsReport {
        points,
        distributions: drop_distributions(scenario, &replicates),
        metadata: RunMetadata {
            rng_seed: scenario.rng_seed,
            n_sim: scenario.n_sim,
            config_hash: config_hash(scenario, jammer, ga),
        },
        replicates,
    })
}

fn summarize(solver: SolverKind, jam_prob: f64, recs: &[&ReplicateRecord]) -> PointSummary {
    let n = recs.len().max(1) as f64;
    let latency_sum: f64 = recs.iter().map(|r| r.latency_sum).sum();
    let latency_count: usize = recs.iter().map(|r| r.latency_count).sum();
    PointSummary {
        solver,
        jam_prob,
        mean_drop_ratio: recs.iter().map(|r| r.weighted_drop_ratio).sum::<f64>() / n,
        mean_unweighted_drop_ratio: recs.iter().map(|r| r.unweighted_drop_ratio).sum::<f64>() / n,
        mean_latency_ms: (latency_count > 0).then(|| latency_sum / latency_count as f64),
        nominal_expected_drop: recs.iter().map(|r| r.nominal_expected_drop).sum::<f64>() / n,
        n_sim: recs.len(),
    }
}

fn run_replicate(
    scenario: &ScenarioConfig,
    jammer: &JammerSpec,
    ga: &GaConfig,
    point: usize,
    replicate: usize,
) -> Result<Vec<ReplicateRecord>, HarnessError> {
    let root = scenario.rng_seed;
    let frame_seed = seeds::derive(root, &[seeds::FRAME, replicate as u64]);
    let jam_seed = seeds::derive(root, &[seeds::JAM, point as u64, replicate as u64]);
    let solver_seed = seeds::derive(root, &[seeds::SOLVER, point as u64, replicate as u64]);
    let jam_prob = scenario.sweep[point];

    let tasks = generate_frame(scenario, frame_seed);
    if tasks.is_empty() {
        return Ok(Vec::new());
    }
    let config = scenario.frame_config(tasks.len())?;
    let profile = build_profile(jammer, &config)?;
    let realization = jammer.realize(&config, jam_seed)?;
    let ga = ga.with_seed(solver_seed);

    let mut out = Vec::with_capacity(scenario.solvers.len());
    for &solver in &scenario.solvers {
        let fail = |source: SolverError| HarnessError::Replicate {
            solver,
            jam_prob,
            replicate,
            frame_seed,
            jam_seed,
            solver_seed,
            source,
        };
        let result = solver.solve(&tasks, &profile, &config, &ga).map_err(fail)?;
        let nominal = evaluate(&result.schedule, &tasks, &profile, &config).map_err(|e| fail(e.into()))?;
        let realized = realized_metrics(&result.schedule, &tasks, &realization, &config).map_err(|e| fail(e.into()))?;
        let (latency_sum, latency_count) = realized
            .latencies(scenario.latency_averaging)
            .fold((0.0, 0), |(s, c), l| (s + l, c + 1));
        out.push(ReplicateRecord {
            solver,
            point,
            jam_prob,
            replicate,
            frame_seed,
            jam_seed,
            solver_seed,
            weighted_drop_ratio: realized.weighted_drop_ratio,
            unweighted_drop_ratio: realized.unweighted_drop_ratio,
            nominal_expected_drop: nominal.drops.expected_drop_ratio,
            objective: result.objective_value,
            latency_sum,
            latency_count,
            tasks: tasks
                .iter()
                .zip(&realized.outcomes)
                .map(|(t, o)| TaskRecord {
                    weight: t.weight,
                    deadline: t.deadline,
                    processing_time: t.processing_time,
                    dropped: o.is_dropped(),
                })
                .collect(),
        });
    }
    Ok(out)
}

/// Equal-width bins over `[lo, hi]`; the last bin is closed on the right.
fn bin_index(x: f64, lo: f64, hi: f64, bins: usize) -> usize {
    if hi <= lo {
        return 0;
    }
    (((x - lo) / (hi - lo) * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

fn edges(lo: f64, hi: f64, bins: usize) -> Vec<(f64, f64)> {
    let width = (hi - lo) / bins as f64;
    (0..bins)
        .map(|b| {
            let high = if b + 1 == bins { hi } else { lo + width * (b + 1) as f64 };
            (lo + width * b as f64, high)
        })
        .collect()
}

/// Unweighted drop fractions per solver and sweep point: overall, by weight
/// class, by deadline bin and by processing-time bin. Empty bins are kept
/// with a zero count so callers can tell them apart from zero drops.
pub fn drop_distributions(scenario: &ScenarioConfig, replicates: &[ReplicateRecord]) -> Vec<DistributionBin> {
    let classes = scenario.weight_scheme.classes();
    let [d_lo, d_hi] = scenario.t_d_range;
    let [p_lo, p_hi] = scenario.t_p_range;
    let d_edges = edges(d_lo, d_hi, scenario.bins);
    let p_edges = edges(p_lo, p_hi, scenario.bins);

    let mut out = Vec::new();
    for (k, &jam_prob) in scenario.sweep.iter().enumerate() {
        for &solver in &scenario.solvers {
            let mut overall = (0, 0);
            let mut by_weight = vec![(0, 0); classes.len()];
            let mut by_deadline = vec![(0, 0); scenario.bins];
            let mut by_processing = vec![(0, 0); scenario.bins];
            let tasks = replicates
                .iter()
                .filter(|r| r.point == k && r.solver == solver)
                .flat_map(|r| &r.tasks);
            for t in tasks {
                let d = usize::from(t.dropped);
                let bump = |cell: &mut (usize, usize)| {
                    cell.0 += 1;
                    cell.1 += d;
                };
                bump(&mut overall);
                if let Some(c) = classes.iter().position(|&w| w == t.weight) {
                    bump(&mut by_weight[c]);
                }
                bump(&mut by_deadline[bin_index(t.deadline, d_lo, d_hi, scenario.bins)]);
                bump(&mut by_processing[bin_index(t.processing_time, p_lo, p_hi, scenario.bins)]);
            }
            let row = |axis, (bin_low, bin_high), (count, dropped)| DistributionBin {
                solver,
                jam_prob,
                axis,
                bin_low,
                bin_high,
                count,
                dropped,
            };
            out.push(row(Axis::Overall, (0.0, 1.0), overall));
            out.extend(classes.iter().zip(by_weight).map(|(&w, c)| row(Axis::Weight, (w, w), c)));
            out.extend(d_edges.iter().zip(by_deadline).map(|(&e, c)| row(Axis::Deadline, e, c)));
            out.extend(p_edges.iter().zip(by_processing).map(|(&e, c)| row(Axis::ProcessingTime, e, c)));
        }
    }
    out
}
