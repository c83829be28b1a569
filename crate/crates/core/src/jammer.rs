//! On-off jammer: probability profiles for the scheduler and sampled jam
//! patterns for simulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{FrameConfig, JammingProfile, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JammerMode {
    UniformIid,
    PerUserIid,
    TwoStateMarkov,
}

/// Transition probabilities of the two-state jammer chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovParams {
    pub p_on_to_off: f64,
    pub p_off_to_on: f64,
}

impl MarkovParams {
    /// Long-run fraction of slots in the jamming state.
    pub fn stationary_on(&self) -> f64 {
        let total = self.p_on_to_off + self.p_off_to_on;
        if total == 0.0 {
            // Frozen chain; treat the initial state as a fair coin.
            0.5
        } else {
            self.p_off_to_on / total
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JammerSpec {
    pub mode: JammerMode,
    #[serde(default)]
    pub jam_probability: Option<f64>,
    #[serde(default)]
    pub per_user_probabilities: Option<Vec<f64>>,
    #[serde(default)]
    pub markov: Option<MarkovParams>,
    #[serde(default)]
    pub rng_seed: u64,
}

fn unit_interval(field: &'static str, p: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            field,
            reason: format!("must lie in [0, 1], got {p}"),
        })
    }
}

fn missing(field: &'static str, mode: &str) -> ModelError {
    ModelError::InvalidParameter {
        field,
        reason: format!("required for {mode} mode"),
    }
}

impl JammerSpec {
    pub fn uniform(p: f64, rng_seed: u64) -> Self {
        Self {
            mode: JammerMode::UniformIid,
            jam_probability: Some(p),
            per_user_probabilities: None,
            markov: None,
            rng_seed,
        }
    }

    pub fn per_user(probabilities: Vec<f64>, rng_seed: u64) -> Self {
        Self {
            mode: JammerMode::PerUserIid,
            jam_probability: None,
            per_user_probabilities: Some(probabilities),
            markov: None,
            rng_seed,
        }
    }

    pub fn markov(p_on_to_off: f64, p_off_to_on: f64, rng_seed: u64) -> Self {
        Self {
            mode: JammerMode::TwoStateMarkov,
            jam_probability: None,
            per_user_probabilities: None,
            markov: Some(MarkovParams { p_on_to_off, p_off_to_on }),
            rng_seed,
        }
    }

    pub fn check(&self) -> Result<(), ModelError> {
        match self.mode {
            JammerMode::UniformIid => {
                let p = self.jam_probability.ok_or_else(|| missing("jam_probability", "uniform_iid"))?;
                unit_interval("jam_probability", p)
            }
            JammerMode::PerUserIid => {
                let ps = self
                    .per_user_probabilities
                    .as_ref()
                    .ok_or_else(|| missing("per_user_probabilities", "per_user_iid"))?;
                ps.iter().try_for_each(|&p| unit_interval("per_user_probabilities", p))
            }
            JammerMode::TwoStateMarkov => {
                let m = self.markov.ok_or_else(|| missing("markov", "two_state_markov"))?;
                unit_interval("markov.p_on_to_off", m.p_on_to_off)?;
                unit_interval("markov.p_off_to_on", m.p_off_to_on)
            }
        }
    }

    /// Per-slot marginal jamming probability of each user's row.
    fn row_probabilities(&self, users: usize) -> Result<Vec<f64>, ModelError> {
        self.check()?;
        Ok(match self.mode {
            JammerMode::UniformIid => vec![self.jam_probability.unwrap_or_default(); users],
            JammerMode::PerUserIid => {
                let ps = self.per_user_probabilities.as_deref().unwrap_or_default();
                if ps.len() != users {
                    return Err(ModelError::InvalidParameter {
                        field: "per_user_probabilities",
                        reason: format!("{} entries for {users} users", ps.len()),
                    });
                }
                ps.to_vec()
            }
            JammerMode::TwoStateMarkov => {
                vec![self.markov.map(|m| m.stationary_on()).unwrap_or_default(); users]
            }
        })
    }

    /// Copy of this spec whose per-slot marginal jamming probability is `p`.
    ///
    /// Uniform mode takes `p` directly. Per-user mode scales each user's value
    /// by `p` (clamped to 1). Markov mode keeps `p_on_to_off` and solves for
    /// `p_off_to_on`; this fails when no valid chain has that marginal.
    pub fn at_probability(&self, p: f64) -> Result<Self, ModelError> {
        unit_interval("sweep probability", p)?;
        let mut spec = self.clone();
        match self.mode {
            JammerMode::UniformIid => spec.jam_probability = Some(p),
            JammerMode::PerUserIid => {
                let ps = self
                    .per_user_probabilities
                    .as_ref()
                    .ok_or_else(|| missing("per_user_probabilities", "per_user_iid"))?;
                spec.per_user_probabilities = Some(ps.iter().map(|r| (r * p).min(1.0)).collect());
            }
            JammerMode::TwoStateMarkov => {
                let m = self.markov.ok_or_else(|| missing("markov", "two_state_markov"))?;
                spec.markov = Some(markov_with_marginal(m.p_on_to_off, p)?);
            }
        }
        Ok(spec)
    }

    /// Samples a users x slots jam pattern.
    pub fn realize(&self, config: &FrameConfig, seed: u64) -> Result<Vec<Vec<bool>>, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if self.mode != JammerMode::TwoStateMarkov {
            let profile = build_profile(self, config)?;
            return Ok(realize_profile(&profile, &mut rng));
        }
        self.check()?;
        let m = self.markov.ok_or_else(|| missing("markov", "two_state_markov"))?;
        let pi_on = m.stationary_on();
        Ok((0..config.active_users)
            .map(|_| {
                let mut on = rng.gen_bool(pi_on);
                (0..config.slots_per_frame)
                    .map(|j| {
                        if j > 0 {
                            let flip = if on { m.p_on_to_off } else { m.p_off_to_on };
                            if rng.gen_bool(flip) {
                                on = !on;
                            }
                        }
                        on
                    })
                    .collect()
            })
            .collect())
    }
}

fn markov_with_marginal(p_on_to_off: f64, p: f64) -> Result<MarkovParams, ModelError> {
    if p == 1.0 {
        return Ok(MarkovParams {
            p_on_to_off: 0.0,
            p_off_to_on: 1.0,
        });
    }
    if p == 0.0 {
        return Ok(MarkovParams {
            p_on_to_off: 1.0,
            p_off_to_on: 0.0,
        });
    }
    // pi = a / (b + a)  =>  a = pi * b / (1 - pi)
    let p_off_to_on = p * p_on_to_off / (1.0 - p);
    if p_off_to_on > 1.0 || (p > 0.0 && p_on_to_off == 0.0) {
        return Err(ModelError::InvalidParameter {
            field: "markov.p_on_to_off",
            reason: format!("no chain with p_on_to_off = {p_on_to_off} has stationary jam probability {p}"),
        });
    }
    Ok(MarkovParams {
        p_on_to_off,
        p_off_to_on,
    })
}

/// Probability matrix the scheduler optimizes against.
pub fn build_profile(spec: &JammerSpec, config: &FrameConfig) -> Result<JammingProfile, ModelError> {
    let rows = spec.row_probabilities(config.active_users)?;
    JammingProfile::new(rows.into_iter().map(|p| vec![p; config.slots_per_frame]).collect())
}

/// Independent Bernoulli draw per (user, slot) cell.
pub fn realize_profile<R: Rng>(profile: &JammingProfile, rng: &mut R) -> Vec<Vec<bool>> {
    profile
        .probabilities()
        .iter()
        .map(|row| row.iter().map(|&p| rng.gen_bool(p)).collect())
        .collect()
}
