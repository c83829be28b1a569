mod common;

use common::{close, dedupe, instance_strategy, Instance};
use jamsched::harness::{generate_frame, ScenarioConfig};
use jamsched::objective::{evaluate, latency_normalizer, realized_metrics, FitnessEvaluator};
use jamsched::solvers::{brute_force_oracle, solve_ga, solve_ga_nj, solve_sdf, solve_sjf};
use jamsched::{jammer, jto_us_objective, validate_schedule, FrameConfig, GaConfig, JammingProfile, Schedule, Task};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sort_and_rank(assignment: &[usize], n: usize) -> Vec<usize> {
    let mut assigned: Vec<(usize, usize)> = assignment
        .iter()
        .enumerate()
        .filter(|(_, &u)| u > 0)
        .map(|(j, &u)| (j, u))
        .collect();
    assigned.sort();
    let mut k = vec![0; n];
    for (rank, (_, u)) in assigned.into_iter().enumerate() {
        k[u - 1] = rank + 1;
    }
    k
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn queue_matches_sort_and_rank(n in 1usize..=10, raw in prop::collection::vec(0usize..=10, 1..=30)) {
        let raw: Vec<usize> = raw.into_iter().map(|u| u % (n + 1)).collect();
        let assignment = dedupe(raw);
        let q = Schedule::from_one_based(&assignment).derive_queue(n);
        prop_assert_eq!(&q.queue_position, &sort_and_rank(&assignment, n));

        let mut positions: Vec<usize> = q.queue_position.iter().copied().filter(|&k| k > 0).collect();
        positions.sort();
        prop_assert_eq!(positions, (1..=q.queue_length).collect::<Vec<_>>());
        prop_assert_eq!(q.queue_length, assignment.iter().filter(|&&u| u > 0).count());
        for u in 0..n {
            prop_assert!(q.queue_position[u] <= q.slot_of[u]);
            prop_assert_eq!(q.queue_position[u] == 0, q.slot_of[u] == 0);
        }
    }

    #[test]
    fn metrics_match_reference(inst in instance_strategy(10, 30)) {
        let e = evaluate(&inst.schedule, &inst.tasks, &inst.jamming, &inst.config).unwrap();
        let r = inst.reference();
        prop_assert!(close(e.latency.normalized, r.latency, 1e-12));
        prop_assert!(close(e.drops.expected_drop_ratio, r.drop_ratio, 1e-12));
        prop_assert!(close(e.drops.expected_weighted_dropped, r.expected_dropped, 1e-12));
        prop_assert!(close(e.objective, r.objective, 1e-12));
        prop_assert_eq!(&e.latency.deadline_miss, &r.miss);
        prop_assert_eq!(&inst.schedule.derive_queue(inst.tasks.len()).queue_position, &r.k);

        let fast = FitnessEvaluator::new(&inst.tasks, &inst.jamming, &inst.config).unwrap();
        prop_assert!(close(fast.objective(&inst.schedule.assignment), e.objective, 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn metric_ranges(inst in instance_strategy(10, 30)) {
        let e = evaluate(&inst.schedule, &inst.tasks, &inst.jamming, &inst.config).unwrap();
        prop_assert!((0.0..=1.0).contains(&e.drops.expected_drop_ratio));
        prop_assert!(e.latency.normalized >= 0.0);
        // Every counted task met its deadline, so its latency is below t_d - t_p.
        let slack: f64 = inst.tasks.iter().map(|t| t.weight * (t.deadline - t.processing_time).max(0.0)).sum();
        prop_assert!(e.latency.normalized <= slack / latency_normalizer(&inst.tasks, &inst.config) + 1e-12);
        for (u, t) in inst.tasks.iter().enumerate() {
            prop_assert_eq!(e.latency.deadline_miss[u], e.latency.total[u] + t.processing_time > t.deadline);
        }
    }

    #[test]
    fn permuting_users_changes_nothing(inst in instance_strategy(8, 20), seed in any::<u64>()) {
        let n = inst.tasks.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        // perm[old] = new
        let mut tasks = inst.tasks.clone();
        let mut probs = inst.jamming.probabilities().to_vec();
        for old in 0..n {
            tasks[perm[old]] = inst.tasks[old].clone();
            probs[perm[old]] = inst.jamming.probabilities()[old].clone();
        }
        let schedule = Schedule::new(inst.schedule.assignment.iter().map(|u| u.map(|u| perm[u])).collect());
        let jam = JammingProfile::new(probs).unwrap();
        let a = evaluate(&inst.schedule, &inst.tasks, &inst.jamming, &inst.config).unwrap();
        let b = evaluate(&schedule, &tasks, &jam, &inst.config).unwrap();
        prop_assert!(close(a.latency.normalized, b.latency.normalized, 1e-12));
        prop_assert!(close(a.drops.expected_drop_ratio, b.drops.expected_drop_ratio, 1e-12));
        prop_assert!(close(a.objective, b.objective, 1e-12));
    }

    #[test]
    fn raising_jamming_never_lowers_drops(inst in instance_strategy(8, 20), bump in 0.0f64..=1.0) {
        let base = evaluate(&inst.schedule, &inst.tasks, &inst.jamming, &inst.config).unwrap();
        for (slot, user) in inst.schedule.queue_order() {
            let mut probs = inst.jamming.probabilities().to_vec();
            let cell = &mut probs[user][slot - 1];
            *cell = (*cell + bump).min(1.0);
            let jam = JammingProfile::new(probs).unwrap();
            let raised = evaluate(&inst.schedule, &inst.tasks, &jam, &inst.config).unwrap();
            prop_assert!(raised.drops.expected_drop_ratio >= base.drops.expected_drop_ratio - 1e-15);
        }
    }

    #[test]
    fn pure_derivation(inst in instance_strategy(10, 30)) {
        let n = inst.tasks.len();
        prop_assert_eq!(inst.schedule.derive_queue(n), inst.schedule.derive_queue(n));
        let a = jto_us_objective(&inst.schedule, &inst.tasks, &inst.jamming, &inst.config).unwrap();
        let b = jto_us_objective(&inst.schedule, &inst.tasks, &inst.jamming, &inst.config).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn one_more_user_lowers_expected_drops_by_its_survival() {
    let config = FrameConfig::new(6, 10.0, 3, 1e9, 0.5).unwrap();
    let tasks = vec![Task::new(2.0, 500.0, 1.0).unwrap(); 3];
    let jam = JammingProfile::new(vec![
        vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
        vec![0.6, 0.5, 0.4, 0.3, 0.2, 0.1],
        vec![0.35; 6],
    ])
    .unwrap();
    let before = Schedule::from_one_based(&[1, 0, 2, 0, 0, 0]);
    let after = Schedule::from_one_based(&[1, 0, 2, 0, 3, 0]);
    let a = evaluate(&before, &tasks, &jam, &config).unwrap();
    let b = evaluate(&after, &tasks, &jam, &config).unwrap();
    assert!(a.latency.deadline_miss.iter().chain(&b.latency.deadline_miss).all(|d| !d));
    let drop = a.drops.expected_weighted_dropped - b.drops.expected_weighted_dropped;
    assert!((drop - (1.0 - 0.35)).abs() < 1e-14);
}

#[test]
fn realized_average_converges_to_expectation() {
    // Generous deadlines, so nothing misses in either view.
    let config = FrameConfig::new(8, 10.0, 4, 1e9, 0.5).unwrap();
    let tasks: Vec<Task> = [(3.0, 0.2), (5.0, 1.0), (2.0, 0.6), (4.0, 0.9)]
        .iter()
        .map(|&(tp, w)| Task::new(tp, 500.0, w).unwrap())
        .collect();
    let probs: Vec<Vec<f64>> = (0..4)
        .map(|i| (0..8).map(|j| ((i * 8 + j) as f64 * 0.037) % 1.0).collect())
        .collect();
    let jam = JammingProfile::new(probs).unwrap();
    let schedule = Schedule::from_one_based(&[0, 3, 1, 0, 0, 4, 0, 2]);
    let nominal = evaluate(&schedule, &tasks, &jam, &config).unwrap();
    assert!(nominal.latency.deadline_miss.iter().all(|d| !d));

    let m = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut samples = Vec::with_capacity(m);
    for _ in 0..m {
        let pattern = jammer::realize_profile(&jam, &mut rng);
        samples.push(realized_metrics(&schedule, &tasks, &pattern, &config).unwrap().weighted_drop_ratio);
    }
    let mean = samples.iter().sum::<f64>() / m as f64;
    // Variance of a weighted sum of independent Bernoullis, over the total weight.
    let total: f64 = tasks.iter().map(|t| t.weight).sum();
    let var: f64 = schedule
        .queue_order()
        .map(|(slot, u)| {
            let p = jam.probability(u, slot - 1);
            tasks[u].weight.powi(2) * p * (1.0 - p)
        })
        .sum::<f64>()
        / total.powi(2);
    let sigma = (var / m as f64).sqrt();
    assert!(
        (mean - nominal.drops.expected_drop_ratio).abs() <= 3.0 * sigma,
        "mean {mean} vs expected {} (sigma {sigma})",
        nominal.drops.expected_drop_ratio
    );
}

fn random_small(seed: u64) -> (Vec<Task>, JammingProfile, FrameConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tasks = (0..3)
        .map(|_| {
            Task::new(
                rng.gen_range(2.0..=10.0),
                rng.gen_range(5.0..=50.0),
                rng.gen_range(0.1..=1.0),
            )
            .unwrap()
        })
        .collect();
    let jam = JammingProfile::new((0..3).map(|_| (0..4).map(|_| rng.gen_range(0.0..=1.0)).collect()).collect()).unwrap();
    (tasks, jam, FrameConfig::new(4, 10.0, 3, 1e9, 0.5).unwrap())
}

#[test]
fn solvers_return_valid_schedules_and_honest_objectives() {
    let ga = GaConfig {
        population_size: 80,
        max_generations: 60,
        ..GaConfig::default()
    };
    for seed in 0..20 {
        let (t, j, c) = random_small(seed);
        let results = [
            solve_ga(&t, &j, &c, &ga.with_seed(seed)).unwrap(),
            solve_ga_nj(&t, &j, &c, &ga.with_seed(seed)).unwrap(),
            solve_sjf(&t, &j, &c).unwrap(),
            solve_sdf(&t, &j, &c).unwrap(),
            brute_force_oracle(&t, &j, &c).unwrap(),
        ];
        let best = results[4].objective_value;
        for r in &results {
            assert!(validate_schedule(&r.schedule, &c).is_ok());
            assert_eq!(r.objective_value, jto_us_objective(&r.schedule, &t, &j, &c).unwrap());
            assert!(r.objective_value >= best - 1e-12);
        }
    }
}

#[test]
fn incumbent_never_worsens() {
    let scenario = ScenarioConfig::table1();
    let tasks = generate_frame(&scenario, 99);
    let config = scenario.frame_config(10).unwrap();
    let jam = JammingProfile::uniform(10, 30, 0.4).unwrap();
    let r = solve_ga(&tasks, &jam, &config, &GaConfig::default().with_seed(3)).unwrap();
    assert_eq!(r.incumbent_history.len(), r.generations_run + 1);
    assert!(r.incumbent_history.windows(2).all(|w| w[1] <= w[0]));
    let fast = FitnessEvaluator::new(&tasks, &jam, &config).unwrap();
    assert_eq!(*r.incumbent_history.last().unwrap(), fast.objective(&r.schedule.assignment));
}

#[test]
fn seeded_ga_repeats_on_reference_frame() {
    let scenario = ScenarioConfig::table1();
    let tasks = generate_frame(&scenario, 5);
    let config = scenario.frame_config(10).unwrap();
    let jam = JammingProfile::uniform(10, 30, 0.3).unwrap();
    let ga = GaConfig::default().with_seed(77);
    assert_eq!(solve_ga(&tasks, &jam, &config, &ga).unwrap(), solve_ga(&tasks, &jam, &config, &ga).unwrap());
}

#[test]
fn ga_and_blind_ga_agree_without_jamming() {
    let scenario = ScenarioConfig::table1();
    let config = scenario.frame_config(10).unwrap();
    let jam = JammingProfile::uniform(10, 30, 0.0).unwrap();
    for seed in 0..3 {
        let tasks = generate_frame(&scenario, seed);
        let ga = GaConfig::default().with_seed(seed);
        assert_eq!(solve_ga(&tasks, &jam, &config, &ga).unwrap(), solve_ga_nj(&tasks, &jam, &config, &ga).unwrap());
    }
}

#[test]
fn ga_reaches_oracle_on_small_example() {
    let (t, j, c) = random_small(1234);
    let ga = solve_ga(&t, &j, &c, &GaConfig::default().with_seed(1)).unwrap();
    let oracle = brute_force_oracle(&t, &j, &c).unwrap();
    assert!(close(ga.objective_value, oracle.objective_value, 1e-12));
}

#[test]
fn frame_processing_time_mean() {
    let scenario = ScenarioConfig::table1();
    let samples: Vec<f64> = (0..10_000u64)
        .flat_map(|seed| generate_frame(&scenario, seed))
        .map(|t| t.processing_time)
        .collect();
    assert_eq!(samples.len(), 100_000);
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let sigma = 8.0 / 12f64.sqrt() / (samples.len() as f64).sqrt();
    assert!((mean - 6.0).abs() <= 3.0 * sigma, "mean {mean}, sigma {sigma}");
}

#[test]
fn jam_frequency_concentrates() {
    let config = FrameConfig::new(100, 10.0, 100, 1e9, 0.5).unwrap();
    let spec = jamsched::JammerSpec::uniform(0.3, 0);
    let cells: usize = 1_000_000;
    let mut hits = 0usize;
    for seed in 0..(cells / 10_000) as u64 {
        hits += spec.realize(&config, seed).unwrap().iter().flatten().filter(|&&b| b).count();
    }
    let freq = hits as f64 / cells as f64;
    let sigma = (0.3f64 * 0.7 / cells as f64).sqrt();
    assert!((freq - 0.3).abs() <= 3.0 * sigma, "freq {freq}");
}

#[test]
fn oracle_dominates_heuristics() {
    for seed in 100..130 {
        let (t, j, c) = random_small(seed);
        let best = brute_force_oracle(&t, &j, &c).unwrap().objective_value;
        assert!(solve_sjf(&t, &j, &c).unwrap().objective_value >= best - 1e-12);
        assert!(solve_sdf(&t, &j, &c).unwrap().objective_value >= best - 1e-12);
    }
}

#[test]
fn instance_helpers_are_consistent() {
    let inst = Instance {
        tasks: vec![Task::new(2.0, 10.0, 1.0).unwrap()],
        jamming: JammingProfile::uniform(1, 3, 0.5).unwrap(),
        config: FrameConfig::new(3, 9.0, 1, 1e9, 1.0).unwrap(),
        schedule: Schedule::from_one_based(&[0, 1, 0]),
    };
    let r = inst.reference();
    assert_eq!(r.k, vec![1]);
    assert!((r.comm[0] - 6.0).abs() < 1e-12);
    assert!((r.drop_ratio - 0.5).abs() < 1e-15);
}
