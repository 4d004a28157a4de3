//! User population: behavioral tiers, per-user parameters, and the
//! day-level stochastic draws (sessions, temporal spikes, skipping,
//! churn smoothing, preferences, interaction counts).

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Dirichlet, Distribution, Gamma, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::config::{PopulationConfig, TierParams};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UserId(pub u32);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{:04}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserTier {
    Casual,
    Engaged,
    HighlyActive,
}

impl UserTier {
    pub const ALL: [UserTier; 3] = [UserTier::Casual, UserTier::Engaged, UserTier::HighlyActive];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&t| t == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            UserTier::Casual => "casual",
            UserTier::Engaged => "engaged",
            UserTier::HighlyActive => "highly_active",
        }
    }
}

impl fmt::Display for UserTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub id: UserId,
    pub tier: UserTier,
    /// Scrolling seconds ~ Gamma(shape, scale).
    pub gamma_shape: f64,
    pub gamma_scale_s: f64,
    /// Watch budget ~ Uniform(min, max) * day multiplier.
    pub watch_min_s: f64,
    pub watch_max_s: f64,
    /// Base churn propensity in [0, 1].
    pub churn_propensity: f64,
    /// Dirichlet concentration over the four content categories.
    pub dirichlet_alpha: [f64; 4],
    /// High-engagement days for this user, sorted, within 1..=days.
    pub spike_days: Vec<u32>,
}

/// One day's session draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionDraw {
    pub scroll_s: f64,
    pub watch_budget_s: f64,
    pub multiplier: f64,
}

/// Aggregate skip model outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipOutcome {
    pub encountered: u32,
    pub watched: u32,
    pub skipped: u32,
    pub adjusted_s: f64,
    pub partials: Vec<f64>,
}

/// Churn draw for one day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChurnState {
    pub delta_e: f64,
    pub churned: bool,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Interactions {
    pub logins: u32,
    pub posts: u32,
    pub likes: u32,
    pub comments: u32,
    pub shares: u32,
}

impl Interactions {
    pub fn zero() -> Self {
        Self::default()
    }
}

/// Day-context inputs to the interaction draws. Content quality feeds the
/// like rate, which is what couples recommendations to interaction volume.
#[derive(Debug, Clone, Copy)]
pub struct InteractionContext {
    pub multiplier: f64,
    pub is_spike: bool,
    /// Fraction of the watch budget converted into actual watching.
    pub watch_efficiency: f64,
    /// Mean quality factor of watched videos (about 1.0 for average content).
    pub content_quality: f64,
    pub any_watched: bool,
}

pub fn tier_params(cfg: &PopulationConfig, tier: UserTier) -> &TierParams {
    match tier {
        UserTier::Casual => &cfg.casual,
        UserTier::Engaged => &cfg.engaged,
        UserTier::HighlyActive => &cfg.highly_active,
    }
}

/// Generate `n` user profiles deterministically from `seed`.
pub fn generate_users(cfg: &PopulationConfig, seed: u64) -> Result<Vec<UserProfile>> {
    if cfg.n_users == 0 {
        return Err(Error::Config("population.n_users must be >= 1".into()));
    }
    let mut r = rng::stream(seed, &[rng::DOMAIN_USERS]);
    let weights = WeightedIndex::new([
        cfg.tier_proportions.casual,
        cfg.tier_proportions.engaged,
        cfg.tier_proportions.highly_active,
    ])
    .map_err(|e| Error::Config(format!("population.tier_proportions: {e}")))?;

    let mut users = Vec::with_capacity(cfg.n_users);
    for i in 0..cfg.n_users {
        let tier = UserTier::ALL[weights.sample(&mut r)];
        let p = tier_params(cfg, tier);
        let churn_propensity = if p.churn_propensity_max > p.churn_propensity_min {
            r.random_range(p.churn_propensity_min..p.churn_propensity_max)
        } else {
            p.churn_propensity_min
        };
        let favorite = r.random_range(0..4usize);
        let mut alpha = [p.dirichlet_base; 4];
        alpha[favorite] = p.dirichlet_focus;
        let spike_days = sample_spike_days(cfg, &mut r);
        users.push(UserProfile {
            id: UserId(i as u32),
            tier,
            gamma_shape: p.gamma_shape,
            gamma_scale_s: p.gamma_scale_s,
            watch_min_s: p.watch_min_s,
            watch_max_s: p.watch_max_s,
            churn_propensity,
            dirichlet_alpha: alpha,
            spike_days,
        });
    }
    Ok(users)
}

fn sample_spike_days(cfg: &PopulationConfig, r: &mut ChaCha8Rng) -> Vec<u32> {
    let want = (cfg.spike_days_per_user as usize).min(cfg.days as usize);
    let mut days: Vec<u32> = Vec::with_capacity(want);
    while days.len() < want {
        let d = r.random_range(1..=cfg.days);
        if !days.contains(&d) {
            days.push(d);
        }
    }
    days.sort_unstable();
    days
}

/// Day index 1 is a Monday; weekends are Saturday/Sunday.
pub fn is_weekend(day: u32) -> bool {
    matches!(day % 7, 6 | 0)
}

/// Session multiplier: spike days override weekends; plain weekdays are 1.0.
pub fn temporal_multiplier(
    day: u32,
    horizon: u32,
    profile: &UserProfile,
    r: &mut ChaCha8Rng,
) -> Result<f64> {
    if day == 0 || day > horizon {
        return Err(Error::DayOutOfRange(day, horizon));
    }
    if profile.spike_days.contains(&day) {
        Ok(r.random_range(1.2..1.8))
    } else if is_weekend(day) {
        Ok(1.2)
    } else {
        Ok(1.0)
    }
}

/// Scrolling ~ Gamma(shape, scale); watch budget ~ Uniform(min, max) * M(day).
pub fn sample_session(
    profile: &UserProfile,
    day: u32,
    horizon: u32,
    r: &mut ChaCha8Rng,
) -> Result<SessionDraw> {
    let multiplier = temporal_multiplier(day, horizon, profile, r)?;
    let gamma = Gamma::new(profile.gamma_shape, profile.gamma_scale_s)
        .map_err(|e| Error::Config(format!("gamma params: {e}")))?;
    let scroll_s = gamma.sample(r);
    let base = r.random_range(profile.watch_min_s..profile.watch_max_s);
    Ok(SessionDraw {
        scroll_s,
        watch_budget_s: base * multiplier,
        multiplier,
    })
}

/// Aggregate skip model: of n = floor(V / avg) encountered videos, 40% are
/// skipped and retain only a Uniform(0.2, 0.7) fraction of the average
/// duration. Counterpart of the per-item skip sampling in the journal.
pub fn apply_skipping(
    watch_budget_s: f64,
    avg_video_s: f64,
    skip_fraction: f64,
    partial_min: f64,
    partial_max: f64,
    r: &mut ChaCha8Rng,
) -> SkipOutcome {
    let n = (watch_budget_s / avg_video_s).floor().max(0.0) as u32;
    let skipped = (skip_fraction * n as f64).floor() as u32;
    let watched = n - skipped;
    let mut partials = Vec::with_capacity(skipped as usize);
    let mut adjusted = avg_video_s * watched as f64;
    for _ in 0..skipped {
        let g = r.random_range(partial_min..partial_max);
        partials.push(g);
        adjusted += g * avg_video_s;
    }
    SkipOutcome {
        encountered: n,
        watched,
        skipped,
        adjusted_s: adjusted,
        partials,
    }
}

/// Smoothed engagement signal: 0.8 * prev + 0.2 * sign(e - tau).
/// Stays in [-1, 1] whenever prev does.
pub fn update_churn_signal(prev_delta_e: f64, engagement: f64, tau: f64) -> f64 {
    0.8 * prev_delta_e + 0.2 * (engagement - tau).signum_or_zero()
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    fn signum_or_zero(self) -> f64 {
        if self > 0.0 {
            1.0
        } else if self < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Daily churn draw: phi = sigmoid(propensity_logit + sensitivity * delta_e).
/// Callers shift the profile propensity by the configured churn bias before
/// passing it in; with a zero logit and zero signal phi is exactly 0.5.
pub fn churn_step(
    propensity_logit: f64,
    delta_e: f64,
    sensitivity: f64,
    r: &mut ChaCha8Rng,
) -> ChurnState {
    let probability = sigmoid(propensity_logit + sensitivity * delta_e);
    ChurnState {
        delta_e,
        churned: r.random::<f64>() < probability,
        probability,
    }
}

/// Content preference vector ~ Dirichlet(alpha); sums to one.
pub fn sample_preferences(profile: &UserProfile, r: &mut ChaCha8Rng) -> [f64; 4] {
    let dirichlet =
        Dirichlet::new(profile.dirichlet_alpha).expect("positive concentration parameters");
    dirichlet.sample(r)
}

/// Interaction counts for one day.
///
/// Logins ~ Poisson(lambda_tier); posts ~ Gamma-Poisson (negative binomial)
/// with a burst multiplier on spike days; likes ~ rounded lognormal whose
/// mean scales with watch efficiency and content quality; comments and
/// shares thin the like count binomially.
pub fn sample_interactions(
    tier: &TierParams,
    cfg: &PopulationConfig,
    ctx: &InteractionContext,
    r: &mut ChaCha8Rng,
) -> Interactions {
    let logins = sample_poisson(tier.logins_lambda, r);

    let burst = if ctx.is_spike { cfg.spike_post_mult } else { 1.0 };
    let posts_mean = tier.posts_mean * burst;
    let posts = if posts_mean > 0.0 {
        let shape = tier.posts_dispersion;
        let gamma = Gamma::new(shape, posts_mean / shape).expect("valid gamma");
        sample_poisson(gamma.sample(r), r)
    } else {
        0
    };

    let likes = if ctx.any_watched {
        let mean = tier.likes_rate
            * ctx.multiplier
            * (0.3 + 0.7 * ctx.watch_efficiency.clamp(0.0, 1.5))
            * ctx.content_quality.max(0.0);
        if mean > 1e-9 {
            let sigma = cfg.likes_sigma;
            let mu = mean.ln() - sigma * sigma / 2.0;
            let lognormal = LogNormal::new(mu, sigma).expect("valid lognormal");
            lognormal.sample(r).round().max(0.0) as u32
        } else {
            0
        }
    } else {
        0
    };

    let comments = binomial_thin(likes, cfg.comment_rate, r);
    let shares = binomial_thin(likes, cfg.share_rate, r);

    Interactions {
        logins,
        posts,
        likes,
        comments,
        shares,
    }
}

fn sample_poisson(lambda: f64, r: &mut ChaCha8Rng) -> u32 {
    if lambda <= 0.0 {
        return 0;
    }
    let poisson = Poisson::new(lambda).expect("positive lambda");
    poisson.sample(r) as u32
}

fn binomial_thin(n: u32, p: f64, r: &mut ChaCha8Rng) -> u32 {
    let mut hits = 0;
    for _ in 0..n {
        if r.random::<f64>() < p {
            hits += 1;
        }
    }
    hits
}

/// Per-video quality factor feeding the like rate: high-scoring content and
/// positive-valence content are more likeable.
pub fn video_quality_factor(
    cfg: &PopulationConfig,
    score_normalized: f64,
    valence: f64,
) -> f64 {
    let floor = cfg.like_quality_floor;
    let base = floor + (1.0 - floor) * score_normalized.clamp(0.0, 1.0);
    let bonus = if valence > 0.0 {
        1.0 + cfg.like_valence_bonus
    } else {
        1.0
    };
    base * bonus
}
