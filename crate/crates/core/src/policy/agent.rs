//! Tabular Q-learning machinery: the Q-table, Boltzmann action selection,
//! the composite shaped reward, and the replay buffer.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::causal::{ParentSet, CAUSAL_FEATURES};
use crate::config::AgentConfig;
use crate::error::{Error, Result};

use super::{N_ACTIONS, N_STATES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub q: Vec<f64>,
    pub visits: Vec<u32>,
}

impl Default for QTable {
    fn default() -> Self {
        Self::new()
    }
}

impl QTable {
    pub fn new() -> Self {
        Self {
            q: vec![0.0; N_STATES * N_ACTIONS],
            visits: vec![0; N_STATES * N_ACTIONS],
        }
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.q[state * N_ACTIONS..(state + 1) * N_ACTIONS]
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.q[state * N_ACTIONS + action]
    }

    pub fn max_q(&self, state: usize) -> f64 {
        self.row(state).iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action, ties broken by the lower action index.
    pub fn argmax(&self, state: usize) -> usize {
        let row = self.row(state);
        let mut best = 0;
        for a in 1..N_ACTIONS {
            if row[a] > row[best] {
                best = a;
            }
        }
        best
    }
}

/// One-step Q-learning update:
/// Q(s,a) += lr * (r + gamma * max_a' Q(s',a') - Q(s,a)).
/// A terminal transition bootstraps zero.
pub fn q_update(
    table: &mut QTable,
    state: usize,
    action: usize,
    reward: f64,
    next_state: Option<usize>,
    lr: f64,
    gamma: f64,
) {
    let idx = state * N_ACTIONS + action;
    let bootstrap = next_state.map_or(0.0, |s| table.max_q(s));
    let target = reward + gamma * bootstrap;
    table.q[idx] += lr * (target - table.q[idx]);
}

/// Boltzmann (softmax) selection over a Q row with max-subtraction.
pub fn boltzmann_select(q_row: &[f64], temperature: f64, r: &mut ChaCha8Rng) -> Result<usize> {
    if temperature <= 0.0 {
        return Err(Error::NonPositiveTemperature(temperature));
    }
    let max = q_row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = q_row.iter().map(|&q| ((q - max) / temperature).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut target = r.random::<f64>() * total;
    for (a, &w) in weights.iter().enumerate() {
        if target < w {
            return Ok(a);
        }
        target -= w;
    }
    Ok(weights.len() - 1)
}

/// Reward weighting, including ablation switches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    /// 1.0 normally; 0.0 for the engagement-off ablation.
    pub eng_weight: f64,
    pub eta: f64,
    pub alpha_emo: f64,
    pub beta: f64,
    pub amplification: f64,
}

impl RewardWeights {
    pub fn from_config(cfg: &AgentConfig) -> Self {
        Self {
            eng_weight: 1.0,
            eta: cfg.eta,
            alpha_emo: cfg.alpha_emo,
            beta: cfg.beta,
            amplification: cfg.amplification,
        }
    }
}

/// The three shaped-reward components and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_eng: f64,
    /// 0 or eta.
    pub r_emo: f64,
    pub r_cause: f64,
    pub beta_effective: f64,
    pub total: f64,
}

/// Combine the components: total = w_eng * r_eng + alpha * r_emo +
/// beta_effective * r_cause, where beta is amplified while the user is
/// vulnerable. `emotion_improved` means a negative-to-positive transition of
/// the dominant emotion.
pub fn combine_reward(
    r_eng: f64,
    emotion_improved: bool,
    r_cause: f64,
    vulnerable: bool,
    w: &RewardWeights,
) -> RewardBreakdown {
    let r_emo = if emotion_improved { w.eta } else { 0.0 };
    let beta_effective = if vulnerable {
        w.beta * w.amplification
    } else {
        w.beta
    };
    RewardBreakdown {
        r_eng,
        r_emo,
        r_cause,
        beta_effective,
        total: w.eng_weight * r_eng + w.alpha_emo * r_emo + beta_effective * r_cause,
    }
}

/// Causal shaping vector: the signed, normalized parent weights of the
/// shaping target, restricted to behavioral day-features and renormalized.
/// Deltas are scaled by each feature's standard deviation so improvements
/// are commensurable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapingVector {
    pub target: String,
    pub entries: Vec<ShapingEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapingEntry {
    pub feature: String,
    pub lambda: f64,
    pub std: f64,
}

impl ShapingVector {
    pub fn from_parent_set(parents: &ParentSet) -> Self {
        let kept: Vec<&crate::causal::Parent> = parents
            .parents
            .iter()
            .filter(|p| CAUSAL_FEATURES.contains(&p.feature.as_str()))
            .collect();
        let total: f64 = kept.iter().map(|p| p.weight.abs()).sum();
        let entries = kept
            .iter()
            .map(|p| ShapingEntry {
                feature: p.feature.clone(),
                lambda: if total > 0.0 { p.weight / total } else { 0.0 },
                std: p.feature_std.max(1e-9),
            })
            .collect();
        Self {
            target: parents.target.clone(),
            entries,
        }
    }

    /// Weighted improvement sum over the parent features:
    /// sum_f lambda_f * (f_now - f_prev) / std_f.
    pub fn causal_reward(&self, now: &[f64], prev: &[f64]) -> f64 {
        debug_assert_eq!(now.len(), self.entries.len());
        debug_assert_eq!(prev.len(), self.entries.len());
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| e.lambda * (now[i] - prev[i]) / e.std)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    /// None marks an episode-terminal transition.
    pub next_state: Option<usize>,
}

/// FIFO ring buffer of transitions with uniform without-replacement batches.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    buf: Vec<Transition>,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            buf: Vec::new(),
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn contains(&self, t: &Transition) -> bool {
        self.buf.contains(t)
    }

    pub fn push(&mut self, t: Transition) {
        if self.buf.len() < self.capacity {
            self.buf.push(t);
        } else {
            self.buf[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    pub fn sample(&self, batch: usize, r: &mut ChaCha8Rng) -> Vec<Transition> {
        let k = batch.min(self.buf.len());
        rand::seq::index::sample(r, self.buf.len(), k)
            .into_iter()
            .map(|i| self.buf[i])
            .collect()
    }
}
