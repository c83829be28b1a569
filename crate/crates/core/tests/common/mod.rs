//! Test-only reference evaluation. Builds the binary X and Y matrices and
//! evaluates every sum term by term from plain arrays; it shares no code
//! with the library's evaluation path.

#![allow(dead_code)]

use jamsched::{FrameConfig, JammingProfile, Schedule, Task};
use proptest::prelude::*;

pub struct Reference {
    pub comm: Vec<f64>,
    pub wait: Vec<f64>,
    pub miss: Vec<bool>,
    pub k: Vec<usize>,
    pub latency: f64,
    pub expected_dropped: f64,
    pub drop_ratio: f64,
    pub objective: f64,
}

/// `assignment[j]` is the 1-based user in slot `j + 1`, 0 for empty.
pub fn reference(
    assignment: &[usize],
    tp: &[f64],
    td: &[f64],
    w: &[f64],
    p: &[Vec<f64>],
    frame_ms: f64,
    lambda: f64,
) -> Reference {
    let n = tp.len();
    let s = assignment.len();
    let ts = frame_ms / s as f64;

    let mut x = vec![vec![0.0f64; s + 1]; n + 1];
    for j in 1..=s {
        if assignment[j - 1] > 0 {
            x[assignment[j - 1]][j] = 1.0;
        }
    }
    // Y[i][k]: k-th in the server queue.
    let mut y = vec![vec![0.0f64; s + 1]; n + 1];
    for i in 1..=n {
        let assigned: f64 = (1..=s).map(|j| x[i][j]).sum();
        if assigned == 0.0 {
            continue;
        }
        let big_j = (1..=s).find(|&j| x[i][j] == 1.0).unwrap();
        let mut k = 0.0;
        for ii in 1..=n {
            for j in 1..=big_j {
                k += x[ii][j];
            }
        }
        y[i][k as usize] = 1.0;
    }
    let nq: f64 = (1..=n).map(|i| (1..=s).map(|j| x[i][j]).sum::<f64>()).sum();
    let nq = nq as usize;

    let mut k_pos = vec![0usize; n + 1];
    for i in 1..=n {
        let assigned: f64 = (1..=s).map(|j| x[i][j]).sum();
        let pos: f64 = (1..=nq).map(|k| k as f64 * y[i][k]).sum();
        k_pos[i] = (assigned * pos) as usize;
    }

    let mut comm = vec![0.0; n + 1];
    let mut wait = vec![0.0; n + 1];
    let mut miss = vec![false; n + 1];
    for i in 1..=n {
        comm[i] = (1..=s).map(|j| j as f64 * ts * x[i][j]).sum();
        let mut q = 0.0;
        if k_pos[i] > 1 {
            for k in 1..k_pos[i] {
                for big_i in 1..=n {
                    q += tp[big_i - 1] * y[big_i][k];
                }
            }
        }
        wait[i] = q;
        miss[i] = comm[i] + wait[i] + tp[i - 1] > td[i - 1];
    }

    let mut num_c = 0.0;
    let mut num_q = 0.0;
    for i in 1..=n {
        if k_pos[i] == 0 {
            continue;
        }
        let keep = if miss[i] { 0.0 } else { 1.0 };
        num_c += keep * w[i - 1] * (1..=s).map(|j| j as f64 * ts * x[i][j]).sum::<f64>();
        num_q += keep * w[i - 1] * wait[i];
    }
    let denom = n as f64 * s as f64 * ts + tp.iter().sum::<f64>();
    let latency = (num_c + num_q) / denom;

    let total_w: f64 = w.iter().sum();
    let mut delivered = 0.0;
    for j in 1..=s {
        for i in 1..=n {
            let keep = if miss[i] { 0.0 } else { 1.0 };
            delivered += w[i - 1] * x[i][j] * (1.0 - p[i - 1][j - 1]) * keep;
        }
    }
    let expected_dropped = total_w - delivered;
    let drop_ratio = expected_dropped / total_w;

    Reference {
        comm: comm[1..].to_vec(),
        wait: wait[1..].to_vec(),
        miss: miss[1..].to_vec(),
        k: k_pos[1..].to_vec(),
        latency,
        expected_dropped,
        drop_ratio,
        objective: lambda * drop_ratio + (1.0 - lambda) * latency,
    }
}

/// Random instance with a valid schedule.
#[derive(Debug, Clone)]
pub struct Instance {
    pub tasks: Vec<Task>,
    pub jamming: JammingProfile,
    pub config: FrameConfig,
    pub schedule: Schedule,
}

impl Instance {
    pub fn tp(&self) -> Vec<f64> {
        self.tasks.iter().map(|t| t.processing_time).collect()
    }
    pub fn td(&self) -> Vec<f64> {
        self.tasks.iter().map(|t| t.deadline).collect()
    }
    pub fn w(&self) -> Vec<f64> {
        self.tasks.iter().map(|t| t.weight).collect()
    }
    pub fn reference(&self) -> Reference {
        reference(
            &self.schedule.to_one_based(),
            &self.tp(),
            &self.td(),
            &self.w(),
            self.jamming.probabilities(),
            self.config.frame_duration,
            self.config.latency_weight,
        )
    }
}

/// Keeps the first occurrence of each user.
pub fn dedupe(raw: Vec<usize>) -> Vec<usize> {
    let mut seen = std::collections::HashSet::new();
    raw.into_iter()
        .map(|u| if u > 0 && !seen.insert(u) { 0 } else { u })
        .collect()
}

pub fn instance_strategy(max_users: usize, max_slots: usize) -> impl Strategy<Value = Instance> {
    (1..=max_users, 1..=max_slots).prop_flat_map(|(n, s)| {
        (
            prop::collection::vec((2.0f64..10.0, 5.0f64..50.0, 0.05f64..=1.0), n),
            prop::collection::vec(prop::collection::vec(0.0f64..=1.0, s), n),
            prop::collection::vec(0..=n, s),
            0.0f64..=1.0,
            5.0f64..20.0,
        )
            .prop_map(move |(tasks, p, raw, lambda, frame)| Instance {
                tasks: tasks
                    .into_iter()
                    .map(|(tp, td, w)| Task::new(tp, td, w).unwrap())
                    .collect(),
                jamming: JammingProfile::new(p).unwrap(),
                config: FrameConfig::new(s, frame, n, 1e9, lambda).unwrap(),
                schedule: Schedule::from_one_based(&dedupe(raw)),
            })
    })
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-3)
}
