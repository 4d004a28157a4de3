//! Hybrid recommendation controller.
//!
//! An engagement scorer ranks candidates during stable periods; a tabular
//! Q-learning agent with a causally shaped reward takes over once a user
//! has spent three or more consecutive days in negative affect. State is a
//! small discretization of the trailing window; actions are abstract
//! (category, video-emotion) keys resolved to concrete videos by pool rank.

pub mod agent;
pub mod env;
pub mod scorer;

use serde::{Deserialize, Serialize};

use crate::affect::UserEmotion;
use crate::catalog::{Category, VideoEmotion};

pub use agent::{
    boltzmann_select, combine_reward, q_update, QTable, ReplayBuffer, RewardBreakdown,
    RewardWeights, ShapingVector, Transition,
};
pub use env::{
    evaluate_policy, train_agent, EpochStats, EvalOutcome, PolicyMode, PolicyWorld, StepLog,
};
pub use scorer::{train_scorer, GbdtModel, ScorerDataset};

pub const N_ACTIONS: usize = 32;
pub const N_STATES: usize = 6 * 3 * 3 * 5;

/// Abstract action: one of 32 (category, video-emotion) keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionKey {
    pub category: Category,
    pub emotion: VideoEmotion,
}

impl ActionKey {
    pub fn from_index(idx: usize) -> ActionKey {
        debug_assert!(idx < N_ACTIONS);
        ActionKey {
            category: Category::ALL[idx / 8],
            emotion: VideoEmotion::ALL[idx % 8],
        }
    }

    pub fn index(self) -> usize {
        self.category.index() * 8 + self.emotion.index()
    }

    pub fn name(self) -> String {
        format!("{}:{}", self.category, self.emotion)
    }
}

/// Discrete policy state: dominant emotion x negative-streak bucket x
/// engagement tertile x last recommended category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyState {
    pub emotion: UserEmotion,
    /// 0: none, 1: one or two days, 2: three or more.
    pub streak_bucket: u8,
    /// 0: low, 1: mid, 2: high.
    pub tertile: u8,
    pub last_category: Option<Category>,
}

impl PolicyState {
    pub fn index(self) -> usize {
        let cat = self.last_category.map_or(0, |c| 1 + c.index());
        ((self.emotion.index() * 3 + usize::from(self.streak_bucket)) * 3
            + usize::from(self.tertile))
            * 5
            + cat
    }

    pub fn name(self) -> String {
        let cat = self
            .last_category
            .map_or("none".to_string(), |c| c.to_string());
        format!(
            "{}|s{}|t{}|{}",
            self.emotion, self.streak_bucket, self.tertile, cat
        )
    }
}

/// Maps the trailing window onto the discrete state space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateEncoder {
    /// 33rd/66th percentile of active-day engagement from the offline run.
    pub e_tertiles: [f64; 2],
}

impl StateEncoder {
    pub fn encode(
        &self,
        labels: &[UserEmotion],
        prev_engagement: f64,
        last_category: Option<Category>,
    ) -> PolicyState {
        let emotion = labels.last().copied().unwrap_or(UserEmotion::Happy);
        let streak = negative_streak(labels);
        let streak_bucket = match streak {
            0 => 0,
            1..=2 => 1,
            _ => 2,
        };
        let tertile = if prev_engagement < self.e_tertiles[0] {
            0
        } else if prev_engagement < self.e_tertiles[1] {
            1
        } else {
            2
        };
        PolicyState {
            emotion,
            streak_bucket,
            tertile,
            last_category,
        }
    }
}

/// Length of the trailing run of negative dominant emotions. Churned days
/// break the streak.
pub fn negative_streak(labels: &[UserEmotion]) -> usize {
    labels
        .iter()
        .rev()
        .take_while(|e| e.is_negative())
        .count()
}

/// A user is vulnerable after `threshold` or more consecutive negative days.
pub fn is_vulnerable(labels: &[UserEmotion], threshold: usize) -> bool {
    negative_streak(labels) >= threshold
}

/// Which controller serves the next recommendation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyChoice {
    Scorer,
    Agent,
}

impl PolicyChoice {
    pub fn name(self) -> &'static str {
        match self {
            PolicyChoice::Scorer => "scorer",
            PolicyChoice::Agent => "agent",
        }
    }
}

/// The daily trigger: the agent takes over exactly while the user is
/// vulnerable; the trigger is re-evaluated from labels every day.
pub fn select_policy(labels: &[UserEmotion], threshold: usize) -> PolicyChoice {
    if is_vulnerable(labels, threshold) {
        PolicyChoice::Agent
    } else {
        PolicyChoice::Scorer
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use UserEmotion::*;

    #[test]
    fn action_key_roundtrip_covers_all_32() {
        for idx in 0..N_ACTIONS {
            let key = ActionKey::from_index(idx);
            assert_eq!(key.index(), idx);
        }
    }

    #[test]
    fn vulnerability_trigger_cases() {
        assert!(is_vulnerable(&[Stressed, Stressed, Stressed], 3));
        assert!(!is_vulnerable(&[Stressed, Happy, Stressed], 3));
        assert!(!is_vulnerable(&[Stressed, Stressed], 3));
        assert!(is_vulnerable(&[Happy, Frustrated, Disappointed, Stressed], 3));
        // Churned days break the streak.
        assert!(!is_vulnerable(&[Stressed, Stressed, Churned, Stressed], 3));
        assert!(!is_vulnerable(&[], 3));
    }

    #[test]
    fn policy_reverts_to_scorer_when_streak_ends() {
        assert_eq!(select_policy(&[], 3), PolicyChoice::Scorer);
        assert_eq!(
            select_policy(&[Stressed, Stressed, Stressed], 3),
            PolicyChoice::Agent
        );
        assert_eq!(
            select_policy(&[Stressed, Stressed, Stressed, Happy], 3),
            PolicyChoice::Scorer
        );
    }

    #[test]
    fn state_indices_are_unique_and_bounded() {
        let enc = StateEncoder {
            e_tertiles: [0.3, 0.6],
        };
        let mut seen = std::collections::HashSet::new();
        for &e in &UserEmotion::ALL {
            for streak in [0usize, 2, 5] {
                for eng in [0.1, 0.45, 0.9] {
                    for cat in [None, Some(Category::News), Some(Category::Educational)] {
                        let labels: Vec<UserEmotion> = match streak {
                            0 => vec![e],
                            n => {
                                let mut l = vec![Stressed; n];
                                *l.last_mut().unwrap() = e;
                                l
                            }
                        };
                        let s = enc.encode(&labels, eng, cat);
                        let idx = s.index();
                        assert!(idx < N_STATES);
                        seen.insert(idx);
                    }
                }
            }
        }
        assert!(seen.len() > 50);
    }

    #[test]
    fn day_one_state_defaults_to_happy_no_streak() {
        let enc = StateEncoder {
            e_tertiles: [0.3, 0.6],
        };
        let s = enc.encode(&[], 0.0, None);
        assert_eq!(s.emotion, Happy);
        assert_eq!(s.streak_bucket, 0);
        assert_eq!(s.tertile, 0);
        assert_eq!(s.last_category, None);
    }
}
