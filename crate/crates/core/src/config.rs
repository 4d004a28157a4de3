//! Run configuration.
//!
//! A run is fully described by a TOML document with one section per pipeline
//! stage. Every key has a documented default; unknown keys are rejected. The
//! hash of the canonical serialization is stamped into every artifact so a
//! run directory can always be traced back to its exact configuration.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every random draw in every stage derives from it.
    pub seed: u64,
    /// Parent directory for run directories.
    pub output_dir: String,
    pub catalog: CatalogConfig,
    pub population: PopulationConfig,
    pub journal: JournalConfig,
    pub affect: AffectConfig,
    pub causal: CausalConfig,
    pub policy: PolicyConfig,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            output_dir: "runs".to_string(),
            catalog: CatalogConfig::default(),
            population: PopulationConfig::default(),
            journal: JournalConfig::default(),
            affect: AffectConfig::default(),
            causal: CausalConfig::default(),
            policy: PolicyConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Short hash of the canonical serialization; stamped into artifacts.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        let mut s = String::with_capacity(12);
        for b in &digest[..6] {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }

    /// Reduced scale for CI smoke runs: 50 users, 100 videos, 10 days.
    pub fn apply_smoke(&mut self) {
        self.population.n_users = 50;
        self.population.days = 10;
        self.catalog.n_videos = 100;
        self.affect.classifier.min_class_rows = 0;
        self.policy.agent.epochs = 3;
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.catalog;
        if c.n_videos == 0 {
            return Err(Error::Config("catalog.n_videos must be >= 1".into()));
        }
        let psum: f64 = c.emotion_probs.as_array().iter().sum();
        if (psum - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "catalog.emotion_probs must sum to 1, got {psum}"
            )));
        }
        if c.emotion_probs.as_array().iter().any(|&p| p < 0.0) {
            return Err(Error::Config("catalog.emotion_probs must be >= 0".into()));
        }
        if c.duration_min_s >= c.duration_max_s {
            return Err(Error::Config("catalog duration bounds inverted".into()));
        }
        let p = &self.population;
        if p.n_users == 0 {
            return Err(Error::Config("population.n_users must be >= 1".into()));
        }
        if p.days == 0 {
            return Err(Error::Config("population.days must be >= 1".into()));
        }
        let tsum = p.tier_proportions.casual
            + p.tier_proportions.engaged
            + p.tier_proportions.highly_active;
        if (tsum - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "population.tier_proportions must sum to 1, got {tsum}"
            )));
        }
        for (name, t) in [
            ("casual", &p.casual),
            ("engaged", &p.engaged),
            ("highly_active", &p.highly_active),
        ] {
            if t.gamma_shape <= 0.0 || t.gamma_scale_s <= 0.0 {
                return Err(Error::Config(format!(
                    "population.{name}: gamma parameters must be positive"
                )));
            }
            if t.watch_min_s >= t.watch_max_s {
                return Err(Error::Config(format!(
                    "population.{name}: watch bounds inverted"
                )));
            }
            if !(0.0..=1.0).contains(&t.churn_propensity_min)
                || !(0.0..=1.0).contains(&t.churn_propensity_max)
                || t.churn_propensity_min > t.churn_propensity_max
            {
                return Err(Error::Config(format!(
                    "population.{name}: churn propensity range must lie in [0,1]"
                )));
            }
            if t.dirichlet_base <= 0.0 || t.dirichlet_focus <= 0.0 {
                return Err(Error::Config(format!(
                    "population.{name}: dirichlet concentrations must be positive"
                )));
            }
        }
        if !(0.0..=1.0).contains(&p.reengage_prob) {
            return Err(Error::Config("population.reengage_prob must be in [0,1]".into()));
        }
        let j = &self.journal;
        if j.avg_video_s <= 0.0 {
            return Err(Error::Config("journal.avg_video_s must be positive".into()));
        }
        if !(0.0..=1.0).contains(&j.skip_fraction) {
            return Err(Error::Config("journal.skip_fraction must be in [0,1]".into()));
        }
        if !(0.0..1.0).contains(&j.top_fraction) && j.top_fraction != 1.0 {
            return Err(Error::Config("journal.top_fraction must be in [0,1]".into()));
        }
        if j.partial_min >= j.partial_max {
            return Err(Error::Config("journal partial-watch bounds inverted".into()));
        }
        let a = &self.affect;
        if a.k < 2 {
            return Err(Error::Config("affect.k must be >= 2".into()));
        }
        if a.elbow_k_min < 2 || a.elbow_k_max < a.elbow_k_min {
            return Err(Error::Config("affect elbow range invalid".into()));
        }
        let g = &self.policy.agent;
        if !(0.0 < g.learning_rate && g.learning_rate <= 1.0) {
            return Err(Error::Config("policy.agent.learning_rate must be in (0,1]".into()));
        }
        if !(0.0..1.0).contains(&g.discount) {
            return Err(Error::Config("policy.agent.discount must be in [0,1)".into()));
        }
        if g.temp_initial <= 0.0 || g.temp_decay <= 0.0 || g.temp_decay >= 1.0 {
            return Err(Error::Config(
                "policy.agent temperature schedule must have temp_initial > 0 and temp_decay in (0,1)".into(),
            ));
        }
        if self.bench.ablation_seeds == 0 {
            return Err(Error::Config("bench.ablation_seeds must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-emotion sampling probabilities for the video catalog. Imbalanced on
/// purpose: arousing emotions are over-represented in feed content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmotionProbs {
    pub happy: f64,
    pub excited: f64,
    pub anxious: f64,
    pub stressed: f64,
    pub disappointed: f64,
    pub angry: f64,
    pub sad: f64,
    pub calm: f64,
}

impl Default for EmotionProbs {
    fn default() -> Self {
        Self {
            excited: 0.20,
            happy: 0.18,
            anxious: 0.16,
            stressed: 0.12,
            disappointed: 0.10,
            angry: 0.10,
            sad: 0.08,
            calm: 0.06,
        }
    }
}

impl EmotionProbs {
    /// Probabilities in canonical `VideoEmotion` order.
    pub fn as_array(&self) -> [f64; 8] {
        [
            self.happy,
            self.excited,
            self.anxious,
            self.stressed,
            self.disappointed,
            self.angry,
            self.sad,
            self.calm,
        ]
    }
}

/// Base engagement level per content category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CategoryBase {
    pub educational: f64,
    pub entertainment: f64,
    pub news: f64,
    pub inspirational: f64,
}

impl Default for CategoryBase {
    fn default() -> Self {
        Self {
            educational: 0.8,
            entertainment: 1.2,
            news: 0.9,
            inspirational: 1.0,
        }
    }
}

impl CategoryBase {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.educational,
            self.entertainment,
            self.news,
            self.inspirational,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatalogConfig {
    pub n_videos: usize,
    pub emotion_probs: EmotionProbs,
    pub base_engagement: CategoryBase,
    /// Duration draw: Gaussian(mu, sigma) clipped to [min, max] seconds.
    pub duration_mu_s: f64,
    pub duration_sigma_s: f64,
    pub duration_min_s: f64,
    pub duration_max_s: f64,
    /// Intensity Gaussians by arousal band; rounded and clipped to 1..=10.
    pub intensity_mu_high: f64,
    pub intensity_mu_mid: f64,
    pub intensity_mu_low: f64,
    pub intensity_sigma: f64,
    /// Short videos get a flat engagement bonus.
    pub short_cutoff_s: f64,
    pub short_bonus: f64,
    /// Virality multiplier: Uniform(base) with `viral_prob` chance of Uniform(viral).
    pub viral_prob: f64,
    pub virality_base_min: f64,
    pub virality_base_max: f64,
    pub virality_viral_min: f64,
    pub virality_viral_max: f64,
}

impl Default for CatalogConfig {
    fn default() -> Self {
        Self {
            n_videos: 1000,
            emotion_probs: EmotionProbs::default(),
            base_engagement: CategoryBase::default(),
            duration_mu_s: 30.0,
            duration_sigma_s: 15.0,
            duration_min_s: 10.0,
            duration_max_s: 90.0,
            intensity_mu_high: 7.0,
            intensity_mu_mid: 5.0,
            intensity_mu_low: 3.0,
            intensity_sigma: 1.5,
            short_cutoff_s: 45.0,
            short_bonus: 0.2,
            viral_prob: 0.05,
            virality_base_min: 1.0,
            virality_base_max: 1.5,
            virality_viral_min: 2.0,
            virality_viral_max: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TierProportions {
    pub casual: f64,
    pub engaged: f64,
    pub highly_active: f64,
}

impl Default for TierProportions {
    fn default() -> Self {
        Self {
            casual: 0.50,
            engaged: 0.35,
            highly_active: 0.15,
        }
    }
}

/// Behavioral parameters for one user tier. All calibration constants.
/// Overriding a tier in the config file replaces the whole table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierParams {
    /// Daily scrolling seconds ~ Gamma(shape, scale).
    pub gamma_shape: f64,
    pub gamma_scale_s: f64,
    /// Daily watch budget ~ Uniform(min, max) seconds, times the day multiplier.
    pub watch_min_s: f64,
    pub watch_max_s: f64,
    /// Base churn propensity range, sampled per user.
    pub churn_propensity_min: f64,
    pub churn_propensity_max: f64,
    /// Daily logins ~ Poisson(lambda).
    pub logins_lambda: f64,
    /// Posts ~ negative binomial (Gamma-Poisson) with this mean and dispersion.
    pub posts_mean: f64,
    pub posts_dispersion: f64,
    /// Like volume scale (lognormal mean before content-quality factors).
    pub likes_rate: f64,
    /// Dirichlet concentration: `focus` on one favored category, `base` elsewhere.
    pub dirichlet_base: f64,
    pub dirichlet_focus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationConfig {
    pub n_users: usize,
    /// Simulation horizon in days.
    pub days: u32,
    pub tier_proportions: TierProportions,
    pub casual: TierParams,
    pub engaged: TierParams,
    pub highly_active: TierParams,
    /// High-engagement spike days sampled per user, without replacement.
    pub spike_days_per_user: u32,
    /// Churn logit: sigmoid(propensity + churn_bias + churn_sensitivity * delta_e).
    /// Negative sensitivity: an improving engagement trend lowers churn risk.
    pub churn_sensitivity: f64,
    /// Baseline shift keeping daily churn probabilities realistic.
    pub churn_bias: f64,
    /// Probability a churned user returns on any given day.
    pub reengage_prob: f64,
    /// Smoothed engagement signal at day zero (new users arrive engaged).
    pub init_delta_e: f64,
    /// Comments/shares thinned from likes.
    pub comment_rate: f64,
    pub share_rate: f64,
    /// Lognormal sigma for the like draw.
    pub likes_sigma: f64,
    /// Like-propensity bonus for positive-valence content.
    pub like_valence_bonus: f64,
    /// Floor of the per-video quality factor feeding the like rate.
    pub like_quality_floor: f64,
    /// Post burst multiplier on spike days.
    pub spike_post_mult: f64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            n_users: 1000,
            days: 30,
            tier_proportions: TierProportions::default(),
            casual: TierParams {
                gamma_shape: 2.0,
                gamma_scale_s: 480.0,
                watch_min_s: 120.0,
                watch_max_s: 600.0,
                churn_propensity_min: 0.4,
                churn_propensity_max: 0.8,
                logins_lambda: 2.0,
                posts_mean: 0.3,
                posts_dispersion: 1.0,
                likes_rate: 3.0,
                dirichlet_base: 1.5,
                dirichlet_focus: 1.5,
            },
            engaged: TierParams {
                gamma_shape: 3.0,
                gamma_scale_s: 720.0,
                watch_min_s: 300.0,
                watch_max_s: 1500.0,
                churn_propensity_min: 0.2,
                churn_propensity_max: 0.5,
                logins_lambda: 5.0,
                posts_mean: 1.0,
                posts_dispersion: 1.5,
                likes_rate: 8.0,
                dirichlet_base: 1.0,
                dirichlet_focus: 5.0,
            },
            highly_active: TierParams {
                gamma_shape: 4.0,
                gamma_scale_s: 1080.0,
                watch_min_s: 900.0,
                watch_max_s: 3600.0,
                churn_propensity_min: 0.05,
                churn_propensity_max: 0.3,
                logins_lambda: 9.0,
                posts_mean: 2.5,
                posts_dispersion: 2.0,
                likes_rate: 15.0,
                dirichlet_base: 1.5,
                dirichlet_focus: 8.0,
            },
            spike_days_per_user: 2,
            churn_sensitivity: -1.5,
            churn_bias: -3.5,
            reengage_prob: 0.1,
            init_delta_e: 1.0,
            comment_rate: 0.15,
            share_rate: 0.07,
            likes_sigma: 0.5,
            like_valence_bonus: 0.25,
            like_quality_floor: 0.4,
            spike_post_mult: 2.0,
        }
    }
}

/// Weights of the composite daily engagement score. Strictly linear so the
/// score doubles when every input doubles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngagementWeights {
    pub watch: f64,
    pub watch_norm_s: f64,
    pub scroll: f64,
    pub scroll_norm_s: f64,
    pub interactions: f64,
    pub interactions_norm: f64,
    /// Relative weights of the five interaction counts inside the
    /// interaction term: likes, comments, shares, posts, logins.
    pub w_likes: f64,
    pub w_comments: f64,
    pub w_shares: f64,
    pub w_posts: f64,
    pub w_logins: f64,
}

impl Default for EngagementWeights {
    fn default() -> Self {
        Self {
            watch: 0.4,
            watch_norm_s: 1800.0,
            scroll: 0.2,
            scroll_norm_s: 3600.0,
            interactions: 0.4,
            interactions_norm: 25.0,
            w_likes: 1.0,
            w_comments: 2.0,
            w_shares: 3.0,
            w_posts: 0.5,
            w_logins: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JournalConfig {
    /// Nominal average video length used by the aggregate skip model and the
    /// per-category candidate count.
    pub avg_video_s: f64,
    /// Fraction of encountered videos skipped in the aggregate model.
    pub skip_fraction: f64,
    /// Partial-watch fraction bounds for skipped videos.
    pub partial_min: f64,
    pub partial_max: f64,
    /// Candidate selection: this fraction from the top-engagement stratum,
    /// the remainder sampled uniformly from the rest.
    pub top_fraction: f64,
    /// A video assigned in the previous N days is filtered out.
    pub recency_days: u32,
    /// Per-video skip probability clamp.
    pub skip_prob_min: f64,
    pub skip_prob_max: f64,
    pub engagement: EngagementWeights,
}

impl Default for JournalConfig {
    fn default() -> Self {
        Self {
            avg_video_s: 45.0,
            skip_fraction: 0.4,
            partial_min: 0.2,
            partial_max: 0.7,
            top_fraction: 0.7,
            recency_days: 5,
            skip_prob_min: 0.05,
            skip_prob_max: 0.95,
            engagement: EngagementWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    /// Hidden layer width; 0 trains a plain softmax regression.
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Held-out fraction for accuracy reporting.
    pub holdout: f64,
    /// Minimum training rows required per class (0 disables the check).
    pub min_class_rows: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            hidden_units: 32,
            learning_rate: 0.05,
            l2: 1e-4,
            epochs: 80,
            batch_size: 256,
            holdout: 0.2,
            min_class_rows: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AffectConfig {
    /// Cluster count for the emotion mapping.
    pub k: usize,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    /// Inertia is reported for this k range as the elbow diagnostic.
    pub elbow_k_min: usize,
    pub elbow_k_max: usize,
    /// A one-day drop of the smoothed engagement signal below this value
    /// overrides the label to stressed.
    pub stress_drop: f64,
    /// Oscillation rule: stressed on at least `frustration_min_stressed` of
    /// the last `frustration_window` days while the current cluster label is
    /// positive overrides to frustrated.
    pub frustration_window: usize,
    pub frustration_min_stressed: usize,
    pub classifier: ClassifierConfig,
}

impl Default for AffectConfig {
    fn default() -> Self {
        Self {
            k: 5,
            kmeans_max_iter: 300,
            kmeans_tol: 1e-6,
            elbow_k_min: 2,
            elbow_k_max: 10,
            stress_drop: -0.3,
            frustration_window: 3,
            frustration_min_stressed: 2,
            classifier: ClassifierConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CausalConfig {
    /// Edges with |weight| below this (on standardized data) are pruned to zero.
    pub prune_threshold: f64,
    /// Subsample cap for discovery; 0 uses every pair row.
    pub max_samples: usize,
}

impl Default for CausalConfig {
    fn default() -> Self {
        Self {
            prune_threshold: 0.05,
            max_samples: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerConfig {
    pub max_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_child_rows: usize,
    pub l2: f64,
    /// Early stopping: halt when validation AUC fails to improve this many rounds.
    pub patience: usize,
    pub holdout: f64,
    pub max_bins: usize,
    /// Training row cap (seeded subsample); 0 keeps all rows.
    pub max_rows: usize,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self {
            max_rounds: 200,
            learning_rate: 0.1,
            max_depth: 5,
            min_child_rows: 20,
            l2: 1.0,
            patience: 20,
            holdout: 0.2,
            max_bins: 256,
            max_rows: 150_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub learning_rate: f64,
    pub discount: f64,
    /// Fixed bonus for a negative-to-positive emotion transition.
    pub eta: f64,
    /// Weight of the emotion bonus in the total reward.
    pub alpha_emo: f64,
    /// Weight of the causal shaping term.
    pub beta: f64,
    /// Multiplier applied to beta while the user is vulnerable.
    pub amplification: f64,
    pub epochs: usize,
    pub replay_capacity: usize,
    pub replay_batch: usize,
    /// Boltzmann temperature schedule: temp_initial * temp_decay^epoch.
    pub temp_initial: f64,
    pub temp_decay: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            discount: 0.95,
            eta: 1.0,
            alpha_emo: 1.0,
            beta: 0.5,
            amplification: 2.0,
            epochs: 10,
            replay_capacity: 10_000,
            replay_batch: 64,
            temp_initial: 1.0,
            temp_decay: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub scorer: ScorerConfig,
    pub agent: AgentConfig,
    /// Negative streak length that flips the controller to the RL agent.
    pub vulnerable_after: usize,
    /// Videos injected into the top of the feed by the active policy.
    pub slate_size: usize,
    /// Engagement-score prefilter size for scorer ranking.
    pub scorer_pool: usize,
    /// Causal parent set used for reward shaping.
    pub shaping_target: String,
    /// r_eng = tanh(E / (eng_scale_mult * global engagement threshold)).
    pub eng_scale_mult: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            scorer: ScorerConfig::default(),
            agent: AgentConfig::default(),
            vulnerable_after: 3,
            slate_size: 3,
            scorer_pool: 128,
            shaping_target: "next_day_happy".to_string(),
            eng_scale_mult: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Paired seeds for the ablation grid (seed, seed+1, ...).
    pub ablation_seeds: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { ablation_seeds: 5 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roundtrips_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml("definitely_not_a_key = 1").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = RunConfig::from_toml("[catalog]\nn_videos = 10\ntypo_key = 2").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("typo_key"), "diagnostic should name the key: {msg}");
    }

    #[test]
    fn partial_override_keeps_other_defaults() {
        let cfg = RunConfig::from_toml("seed = 7\n[catalog]\nn_videos = 10").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.catalog.n_videos, 10);
        assert_eq!(cfg.population.n_users, 1000);
    }

    #[test]
    fn validation_catches_bad_probability_mass() {
        let mut cfg = RunConfig::default();
        cfg.catalog.emotion_probs.happy = 0.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        b.seed = 43;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn smoke_scale_is_fifty_hundred_ten() {
        let mut cfg = RunConfig::default();
        cfg.apply_smoke();
        assert_eq!(cfg.population.n_users, 50);
        assert_eq!(cfg.catalog.n_videos, 100);
        assert_eq!(cfg.population.days, 10);
    }
}
