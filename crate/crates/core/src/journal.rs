//! Daily record generation and feature engineering.
//!
//! [`UserSim`] replays one user's timeline day by day: churn state machine,
//! session draws, preference-driven candidate retrieval with 70-30 sampling
//! and a recency filter, per-video skip sampling under a time budget, and
//! interaction draws. The same simulator backs both the offline dataset
//! build (no injection) and policy evaluation (a slate is injected at the
//! top of the feed).

use serde::{Deserialize, Serialize};

use crate::affect::UserEmotion;
use crate::catalog::{ordered, CatalogIndex, Category, VideoId};
use crate::config::{EngagementWeights, JournalConfig, PopulationConfig};
use crate::error::{Error, Result};
use crate::population::{
    self, churn_step, sample_interactions, sample_preferences, sample_session,
    update_churn_signal, InteractionContext, Interactions, UserProfile, UserTier,
};
use crate::rng;
use crate::stats;

/// Continuous feature columns, in canonical order.
pub const CONTINUOUS_FEATURES: [&str; 27] = [
    "scroll_s",
    "watch_s",
    "watch_budget_s",
    "logins",
    "posts",
    "likes",
    "comments",
    "shares",
    "engagement",
    "delta_e",
    "rho",
    "assigned_count",
    "skipped_count",
    "skip_rate",
    "cat_time_educational",
    "cat_time_entertainment",
    "cat_time_news",
    "cat_time_inspirational",
    "mean_intensity",
    "max_intensity",
    "mean_valence",
    "mean_score",
    "multiplier",
    "e_ma3",
    "e_delta_1d",
    "delta_e_change_1d",
    "churn_flag",
];

/// Categorical feature columns, in canonical order.
pub const CATEGORICAL_FEATURES: [&str; 4] =
    ["tier", "dominant_category", "prev_day_emotion", "day_of_week"];

pub const N_CONT: usize = CONTINUOUS_FEATURES.len();

pub fn feature_index(name: &str) -> usize {
    CONTINUOUS_FEATURES
        .iter()
        .position(|&f| f == name)
        .unwrap_or_else(|| panic!("unknown feature {name}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssignedVideo {
    pub video: VideoId,
    /// Minutes since midnight; decoration only.
    pub minute_of_day: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub user: population::UserId,
    pub day: u32,
    pub churned: bool,
    pub assigned: Vec<AssignedVideo>,
    pub skipped: Vec<VideoId>,
    pub scroll_s: f64,
    /// Watch budget for the day (uniform draw times the day multiplier).
    pub watch_budget_s: f64,
    /// Actual watch time: full durations of assigned videos plus partial
    /// durations of skipped ones.
    pub watch_s: f64,
    pub multiplier: f64,
    pub engagement: f64,
    pub delta_e: f64,
    /// Scroll-to-watch ratio, guarded by a one-second floor on watch time.
    pub rho: f64,
    /// Seconds of fully-watched content per category; sums to the assigned
    /// watch time.
    pub category_time_s: [f64; 4],
    pub interactions: Interactions,
    /// Filled by the labeling stage.
    pub dominant_emotion: Option<UserEmotion>,
}

impl DailyRecord {
    fn churned_row(user: population::UserId, day: u32) -> Self {
        Self {
            user,
            day,
            churned: true,
            assigned: Vec::new(),
            skipped: Vec::new(),
            scroll_s: 0.0,
            watch_budget_s: 0.0,
            watch_s: 0.0,
            multiplier: 0.0,
            engagement: 0.0,
            delta_e: 0.0,
            rho: 0.0,
            category_time_s: [0.0; 4],
            interactions: Interactions::zero(),
            dominant_emotion: None,
        }
    }

    /// Seconds of fully-watched (assigned) content.
    pub fn assigned_watch_s(&self) -> f64 {
        self.category_time_s.iter().sum()
    }
}

/// One engineered row per user-day: fixed-order continuous block plus four
/// categorical fields. Churned days are explicit zero rows with the churn
/// flag set. `prev_day_emotion` is `None` until labels exist; the labeling
/// stage joins it in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub user: population::UserId,
    pub day: u32,
    pub continuous: Vec<f64>,
    pub tier: UserTier,
    pub dominant_category: Option<Category>,
    pub prev_day_emotion: Option<UserEmotion>,
    /// 1 = Monday ... 7 = Sunday.
    pub day_of_week: u8,
}

pub fn day_of_week(day: u32) -> u8 {
    (((day - 1) % 7) + 1) as u8
}

/// Composite daily engagement: weighted sum of normalized watch time,
/// scrolling time, and interaction volume. Linear by construction.
pub fn composite_engagement(
    watch_s: f64,
    scroll_s: f64,
    inter: &Interactions,
    w: &EngagementWeights,
) -> f64 {
    let volume = w.w_likes * f64::from(inter.likes)
        + w.w_comments * f64::from(inter.comments)
        + w.w_shares * f64::from(inter.shares)
        + w.w_posts * f64::from(inter.posts)
        + w.w_logins * f64::from(inter.logins);
    w.watch * (watch_s / w.watch_norm_s)
        + w.scroll * (scroll_s / w.scroll_norm_s)
        + w.interactions * (volume / w.interactions_norm)
}

/// 70-30 candidate selection over a pool sorted by descending engagement:
/// ceil(top_fraction * m) from the top of the pool, the remainder sampled
/// uniformly from the rest.
pub fn select_candidates_70_30(
    pool: &[usize],
    m: usize,
    top_fraction: f64,
    r: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<usize>> {
    if m > pool.len() {
        return Err(Error::PoolExhausted {
            requested: m,
            available: pool.len(),
        });
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let n_top = ((top_fraction * m as f64).ceil() as usize).min(m);
    let mut picked: Vec<usize> = pool[..n_top].to_vec();
    let rest = &pool[n_top..];
    let n_rand = m - n_top;
    if n_rand > 0 {
        for idx in rand::seq::index::sample(r, rest.len(), n_rand) {
            picked.push(rest[idx]);
        }
    }
    Ok(picked)
}

/// Mutable per-user state carried across days.
#[derive(Debug, Clone)]
pub struct SimState {
    pub churned: bool,
    pub delta_e: f64,
    pub prev_engagement: f64,
    pub engagement_history: Vec<f64>,
    /// (day, assigned ids) within the recency window.
    pub recent: Vec<(u32, Vec<VideoId>)>,
}

impl SimState {
    fn new(init_delta_e: f64) -> Self {
        Self {
            churned: false,
            delta_e: init_delta_e,
            prev_engagement: 0.0,
            engagement_history: Vec::new(),
            recent: Vec::new(),
        }
    }
}

/// Per-tier activity windows for timestamps, minutes since midnight.
fn activity_windows(tier: UserTier) -> [(u32, u32); 2] {
    match tier {
        UserTier::Casual => [(480, 570), (1200, 1380)],
        UserTier::Engaged => [(720, 840), (1140, 1380)],
        UserTier::HighlyActive => [(420, 600), (1020, 1380)],
    }
}

fn timestamp_minute(tier: UserTier, u: f64) -> u32 {
    let [a, b] = activity_windows(tier);
    let len_a = a.1 - a.0;
    let len_b = b.1 - b.0;
    let total = len_a + len_b;
    let offset = (u * f64::from(total)) as u32;
    if offset < len_a {
        a.0 + offset
    } else {
        b.0 + (offset - len_a).min(len_b.saturating_sub(1))
    }
}

/// Replays one user's daily loop against a fixed catalog.
pub struct UserSim<'a> {
    pub profile: &'a UserProfile,
    index: &'a CatalogIndex,
    pop: &'a PopulationConfig,
    journal: &'a JournalConfig,
    seed: u64,
    domain: u64,
    tau: f64,
    churn_enabled: bool,
    pub state: SimState,
}

impl<'a> UserSim<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        profile: &'a UserProfile,
        index: &'a CatalogIndex,
        pop: &'a PopulationConfig,
        journal: &'a JournalConfig,
        seed: u64,
        domain: u64,
        tau: f64,
        churn_enabled: bool,
    ) -> Self {
        Self {
            profile,
            index,
            pop,
            journal,
            seed,
            domain,
            tau,
            churn_enabled,
            state: SimState::new(pop.init_delta_e),
        }
    }

    /// Video ids assigned within the recency window before `day`, sorted.
    pub fn recent_ids(&self, day: u32) -> Vec<VideoId> {
        let horizon = day.saturating_sub(self.journal.recency_days);
        let mut ids: Vec<VideoId> = self
            .state
            .recent
            .iter()
            .filter(|(d, _)| *d >= horizon && *d < day)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Simulate one day. `slate` is injected at the top of the feed by a
    /// recommendation policy; the offline dataset build passes none.
    pub fn step_day(&mut self, day: u32, slate: &[VideoId]) -> Result<(DailyRecord, FeatureRow)> {
        let uid = self.profile.id;
        let horizon = self.pop.days;
        if day == 0 || day > horizon {
            return Err(Error::DayOutOfRange(day, horizon));
        }
        let mut r = rng::stream(
            self.seed,
            &[
                rng::DOMAIN_DAY,
                self.domain,
                u64::from(uid.0),
                u64::from(day),
            ],
        );

        if self.state.churned {
            use rand::Rng;
            let back = r.random::<f64>() < self.pop.reengage_prob;
            if !back {
                self.state.engagement_history.push(0.0);
                let record = DailyRecord::churned_row(uid, day);
                let features = self.churned_features(day);
                return Ok((record, features));
            }
            self.state.churned = false;
        }

        let session = sample_session(self.profile, day, horizon, &mut r)?;
        let prefs = sample_preferences(self.profile, &mut r);
        let is_spike = self.profile.spike_days.contains(&day);

        // Categories in descending preference order; candidates per category
        // come score-ordered, with the recency filter applied after selection.
        let mut cat_order: Vec<usize> = (0..4).collect();
        cat_order.sort_by_key(|&k| (std::cmp::Reverse(ordered(prefs[k])), k));

        let recent = self.recent_ids(day);
        let mut feed: Vec<usize> = Vec::new();
        let mut seen_today: Vec<VideoId> = Vec::new();
        for &vid in slate {
            if recent.binary_search(&vid).is_ok() || seen_today.contains(&vid) {
                continue;
            }
            seen_today.push(vid);
            feed.push(vid.0 as usize);
        }
        for &k in &cat_order {
            let pool = &self.index.by_category[k];
            if pool.is_empty() {
                continue;
            }
            let want =
                (prefs[k] * session.watch_budget_s / self.journal.avg_video_s).round() as usize;
            let m = want.min(pool.len());
            let picked = select_candidates_70_30(pool, m, self.journal.top_fraction, &mut r)?;
            for idx in picked {
                let vid = self.index.items[idx].id;
                if recent.binary_search(&vid).is_ok() || seen_today.contains(&vid) {
                    continue;
                }
                seen_today.push(vid);
                feed.push(idx);
            }
        }

        let max_score = feed
            .iter()
            .map(|&i| self.index.items[i].engagement_score)
            .fold(0.0_f64, f64::max);

        let mut assigned: Vec<AssignedVideo> = Vec::new();
        let mut skipped: Vec<VideoId> = Vec::new();
        let mut category_time_s = [0.0f64; 4];
        let mut time_used = 0.0;
        let mut quality_sum = 0.0;
        for &idx in &feed {
            let item = &self.index.items[idx];
            let p_skip = (1.0 - item.engagement_score / max_score)
                .clamp(self.journal.skip_prob_min, self.journal.skip_prob_max);
            let d = self.domain;
            let u_tag = u64::from(uid.0);
            let d_tag = u64::from(day);
            let v_tag = u64::from(item.id.0);
            let u = rng::unit_f64(self.seed, &[rng::DOMAIN_SKIP, d, u_tag, d_tag, v_tag]);
            if u < p_skip {
                let g = rng::unit_f64(self.seed, &[rng::DOMAIN_PARTIAL, d, u_tag, d_tag, v_tag]);
                let partial = self.journal.partial_min
                    + (self.journal.partial_max - self.journal.partial_min) * g;
                time_used += partial * item.duration_s;
                skipped.push(item.id);
            } else {
                let ts = rng::unit_f64(self.seed, &[rng::DOMAIN_TIMESTAMP, d, u_tag, d_tag, v_tag]);
                time_used += item.duration_s;
                category_time_s[item.category.index()] += item.duration_s;
                quality_sum += population::video_quality_factor(
                    self.pop,
                    item.engagement_score / self.index.max_score,
                    item.emotion.valence(),
                );
                assigned.push(AssignedVideo {
                    video: item.id,
                    minute_of_day: timestamp_minute(self.profile.tier, ts),
                });
            }
            if time_used > session.watch_budget_s {
                break;
            }
        }

        let n_assigned = assigned.len();
        let watch_s = time_used;
        let watch_efficiency = if session.watch_budget_s > 0.0 {
            watch_s / session.watch_budget_s
        } else {
            0.0
        };
        let content_quality = if n_assigned > 0 {
            quality_sum / n_assigned as f64
        } else {
            0.0
        };
        let ctx = InteractionContext {
            multiplier: session.multiplier,
            is_spike,
            watch_efficiency,
            content_quality,
            any_watched: n_assigned > 0,
        };
        let tier = population::tier_params(self.pop, self.profile.tier);
        let interactions = sample_interactions(tier, self.pop, &ctx, &mut r);

        let engagement = composite_engagement(
            watch_s,
            session.scroll_s,
            &interactions,
            &self.journal.engagement,
        );
        let prev_delta_e = self.state.delta_e;
        let delta_e = update_churn_signal(prev_delta_e, engagement, self.tau);
        let rho = session.scroll_s / watch_s.max(1.0);

        if self.churn_enabled {
            let churn = churn_step(
                self.profile.churn_propensity + self.pop.churn_bias,
                delta_e,
                self.pop.churn_sensitivity,
                &mut r,
            );
            self.state.churned = churn.churned;
        }

        let record = DailyRecord {
            user: uid,
            day,
            churned: false,
            assigned: assigned.clone(),
            skipped,
            scroll_s: session.scroll_s,
            watch_budget_s: session.watch_budget_s,
            watch_s,
            multiplier: session.multiplier,
            engagement,
            delta_e,
            rho,
            category_time_s,
            interactions,
            dominant_emotion: None,
        };

        let features = self.active_features(&record, prev_delta_e);

        self.state.delta_e = delta_e;
        self.state.prev_engagement = engagement;
        self.state.engagement_history.push(engagement);
        let assigned_ids: Vec<VideoId> = assigned.iter().map(|a| a.video).collect();
        self.state.recent.push((day, assigned_ids));
        let keep_from = day.saturating_sub(self.journal.recency_days);
        self.state.recent.retain(|(d, _)| *d >= keep_from);

        Ok((record, features))
    }

    fn churned_features(&self, day: u32) -> FeatureRow {
        let mut continuous = vec![0.0; N_CONT];
        continuous[feature_index("churn_flag")] = 1.0;
        FeatureRow {
            user: self.profile.id,
            day,
            continuous,
            tier: self.profile.tier,
            dominant_category: None,
            prev_day_emotion: None,
            day_of_week: day_of_week(day),
        }
    }

    fn active_features(&self, rec: &DailyRecord, prev_delta_e: f64) -> FeatureRow {
        let hist = &self.state.engagement_history;
        let mut window: Vec<f64> = hist.iter().rev().take(2).copied().collect();
        window.push(rec.engagement);
        let e_ma3 = stats::mean(&window);
        let e_delta_1d = if hist.is_empty() {
            0.0
        } else {
            rec.engagement - self.state.prev_engagement
        };
        let delta_e_change = rec.delta_e - prev_delta_e;

        let n_assigned = rec.assigned.len() as f64;
        let n_skipped = rec.skipped.len() as f64;
        let encountered = n_assigned + n_skipped;
        let skip_rate = if encountered > 0.0 {
            n_skipped / encountered
        } else {
            0.0
        };

        let (mean_intensity, max_intensity, mean_valence, mean_score) = if n_assigned > 0.0 {
            let mut isum = 0.0;
            let mut imax = 0.0f64;
            let mut vsum = 0.0;
            let mut ssum = 0.0;
            for a in &rec.assigned {
                let item = self.index.get(a.video);
                isum += f64::from(item.intensity);
                imax = imax.max(f64::from(item.intensity));
                vsum += item.emotion.valence();
                ssum += item.engagement_score;
            }
            (
                isum / n_assigned,
                imax,
                vsum / n_assigned,
                ssum / n_assigned,
            )
        } else {
            (0.0, 0.0, 0.0, 0.0)
        };

        let dominant_category = if rec.assigned_watch_s() > 0.0 {
            let mut best = 0;
            for k in 1..4 {
                if rec.category_time_s[k] > rec.category_time_s[best] {
                    best = k;
                }
            }
            Some(Category::ALL[best])
        } else {
            None
        };

        let i = &rec.interactions;
        let continuous = vec![
            rec.scroll_s,
            rec.watch_s,
            rec.watch_budget_s,
            f64::from(i.logins),
            f64::from(i.posts),
            f64::from(i.likes),
            f64::from(i.comments),
            f64::from(i.shares),
            rec.engagement,
            rec.delta_e,
            rec.rho,
            n_assigned,
            n_skipped,
            skip_rate,
            rec.category_time_s[0],
            rec.category_time_s[1],
            rec.category_time_s[2],
            rec.category_time_s[3],
            mean_intensity,
            max_intensity,
            mean_valence,
            mean_score,
            rec.multiplier,
            e_ma3,
            e_delta_1d,
            delta_e_change,
            0.0,
        ];
        debug_assert_eq!(continuous.len(), N_CONT);

        FeatureRow {
            user: rec.user,
            day: rec.day,
            continuous,
            tier: self.profile.tier,
            dominant_category,
            prev_day_emotion: None,
            day_of_week: day_of_week(rec.day),
        }
    }
}

/// Summary statistics of a simulated dataset, reused downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    /// Global engagement threshold: median composite engagement over a
    /// churn-free warm-up pass.
    pub tau: f64,
    pub mean_engagement: f64,
    /// 33rd/66th percentile of active-day engagement.
    pub e_tertiles: [f64; 2],
    pub catalog_max_score: f64,
}

#[derive(Debug)]
pub struct Dataset {
    pub records: Vec<DailyRecord>,
    pub features: Vec<FeatureRow>,
    pub stats: SimStats,
}

/// Build the full user-day dataset: a churn-free warm-up pass fixes the
/// engagement threshold at the population median, then the real pass runs
/// with churn enabled. Exactly `users * days` rows, churned days included
/// as zero rows.
pub fn build_dataset(
    users: &[UserProfile],
    index: &CatalogIndex,
    pop: &PopulationConfig,
    journal: &JournalConfig,
    seed: u64,
) -> Result<Dataset> {
    let mut warm_engagement = Vec::with_capacity(users.len() * pop.days as usize);
    for profile in users {
        let mut sim = UserSim::new(
            profile,
            index,
            pop,
            journal,
            seed,
            rng::DOMAIN_WARMUP,
            0.0,
            false,
        );
        for day in 1..=pop.days {
            let (record, _) = sim.step_day(day, &[])?;
            warm_engagement.push(record.engagement);
        }
    }
    let tau = stats::median(&warm_engagement);

    let mut records = Vec::with_capacity(users.len() * pop.days as usize);
    let mut features = Vec::with_capacity(users.len() * pop.days as usize);
    for profile in users {
        let mut sim = UserSim::new(profile, index, pop, journal, seed, 0, tau, true);
        for day in 1..=pop.days {
            let (record, row) = sim.step_day(day, &[])?;
            records.push(record);
            features.push(row);
        }
    }

    let active_e: Vec<f64> = records
        .iter()
        .filter(|r| !r.churned)
        .map(|r| r.engagement)
        .collect();
    let stats = SimStats {
        tau,
        mean_engagement: stats::mean(&active_e),
        e_tertiles: [
            stats::percentile(&active_e, 1.0 / 3.0),
            stats::percentile(&active_e, 2.0 / 3.0),
        ],
        catalog_max_score: index.max_score,
    };
    Ok(Dataset {
        records,
        features,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{generate_catalog, CatalogIndex};
    use crate::config::RunConfig;
    use crate::population::generate_users;

    fn small_setup(
        n_users: usize,
        n_videos: usize,
    ) -> (RunConfig, Vec<UserProfile>, CatalogIndex) {
        let mut cfg = RunConfig::default();
        cfg.population.n_users = n_users;
        cfg.catalog.n_videos = n_videos;
        let users = generate_users(&cfg.population, cfg.seed).unwrap();
        let index = CatalogIndex::new(generate_catalog(&cfg.catalog, cfg.seed).unwrap()).unwrap();
        (cfg, users, index)
    }

    #[test]
    fn dataset_has_users_times_days_rows() {
        let (cfg, users, index) = small_setup(10, 120);
        let ds = build_dataset(&users, &index, &cfg.population, &cfg.journal, 42).unwrap();
        assert_eq!(ds.records.len(), 10 * 30);
        assert_eq!(ds.features.len(), 10 * 30);
    }

    #[test]
    fn single_user_thirty_rows() {
        let (cfg, users, index) = small_setup(1, 60);
        let ds = build_dataset(&users, &index, &cfg.population, &cfg.journal, 7).unwrap();
        assert_eq!(ds.records.len(), 30);
    }

    #[test]
    fn dataset_build_is_deterministic() {
        let (cfg, users, index) = small_setup(8, 80);
        let a = build_dataset(&users, &index, &cfg.population, &cfg.journal, 42).unwrap();
        let b = build_dataset(&users, &index, &cfg.population, &cfg.journal, 42).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.features, b.features);
        assert_eq!(a.stats, b.stats);
        let c = build_dataset(&users, &index, &cfg.population, &cfg.journal, 43).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn churned_rows_are_all_zero() {
        let (mut cfg, users, index) = small_setup(30, 80);
        // Aggressive churn so the test definitely sees churned rows.
        cfg.population.churn_bias = 1.0;
        let ds = build_dataset(&users, &index, &cfg.population, &cfg.journal, 5).unwrap();
        let churned: Vec<_> = ds.records.iter().filter(|r| r.churned).collect();
        assert!(!churned.is_empty(), "expected churned rows in this setup");
        for r in &churned {
            assert!(r.assigned.is_empty() && r.skipped.is_empty());
            assert_eq!(r.engagement, 0.0);
            assert_eq!(r.watch_s, 0.0);
            assert_eq!(r.scroll_s, 0.0);
            assert_eq!(r.delta_e, 0.0);
            assert_eq!(r.interactions, Interactions::zero());
        }
        for (r, f) in ds.records.iter().zip(ds.features.iter()) {
            if !r.churned {
                continue;
            }
            assert_eq!(f.continuous[feature_index("churn_flag")], 1.0);
            let sum: f64 = f
                .continuous
                .iter()
                .take(N_CONT - 1)
                .map(|x| x.abs())
                .sum();
            assert_eq!(sum, 0.0);
        }
    }

    #[test]
    fn no_video_repeats_within_recency_window() {
        let (cfg, users, index) = small_setup(12, 60);
        let ds = build_dataset(&users, &index, &cfg.population, &cfg.journal, 11).unwrap();
        for u in &users {
            let days: Vec<&DailyRecord> = ds.records.iter().filter(|r| r.user == u.id).collect();
            for r in &days {
                for prev in days
                    .iter()
                    .filter(|p| p.day < r.day && p.day + cfg.journal.recency_days >= r.day)
                {
                    for a in &r.assigned {
                        assert!(
                            !prev.assigned.iter().any(|b| b.video == a.video),
                            "user {} repeated video {} within {} days",
                            u.id,
                            a.video,
                            cfg.journal.recency_days
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn watch_time_respects_budget_plus_one_video() {
        let (cfg, users, index) = small_setup(15, 100);
        let ds = build_dataset(&users, &index, &cfg.population, &cfg.journal, 3).unwrap();
        for r in ds.records.iter().filter(|r| !r.churned) {
            assert!(
                r.watch_s <= r.watch_budget_s + cfg.catalog.duration_max_s,
                "watch {} budget {}",
                r.watch_s,
                r.watch_budget_s
            );
        }
    }

    #[test]
    fn category_time_sums_to_assigned_watch_time() {
        let (cfg, users, index) = small_setup(10, 100);
        let ds = build_dataset(&users, &index, &cfg.population, &cfg.journal, 9).unwrap();
        for r in ds.records.iter().filter(|r| !r.churned) {
            let total: f64 = r.category_time_s.iter().sum();
            let expect: f64 = r
                .assigned
                .iter()
                .map(|a| index.get(a.video).duration_s)
                .sum();
            assert!((total - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn seventy_thirty_split_counts() {
        let mut r = rng::stream(1, &[99]);
        let pool: Vec<usize> = (0..100).collect();
        let picked = select_candidates_70_30(&pool, 10, 0.7, &mut r).unwrap();
        assert_eq!(picked.len(), 10);
        // First ceil(0.7*10) = 7 come from the top of the pool, in order.
        assert_eq!(&picked[..7], &[0, 1, 2, 3, 4, 5, 6]);
        assert!(picked[7..].iter().all(|&i| i >= 7));
        let mut sorted = picked.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
    }

    #[test]
    fn seventy_thirty_single_pick_takes_the_top() {
        let mut r = rng::stream(2, &[99]);
        let pool: Vec<usize> = (0..5).collect();
        let picked = select_candidates_70_30(&pool, 1, 0.7, &mut r).unwrap();
        assert_eq!(picked, vec![0]);
    }

    #[test]
    fn seventy_thirty_full_pool_is_a_permutation() {
        let mut r = rng::stream(3, &[99]);
        let pool: Vec<usize> = (0..10).collect();
        let mut picked = select_candidates_70_30(&pool, 10, 0.7, &mut r).unwrap();
        picked.sort_unstable();
        assert_eq!(picked, pool);
    }

    #[test]
    fn seventy_thirty_rejects_oversized_requests() {
        let mut r = rng::stream(4, &[99]);
        let pool: Vec<usize> = (0..5).collect();
        assert!(matches!(
            select_candidates_70_30(&pool, 6, 0.7, &mut r),
            Err(Error::PoolExhausted {
                requested: 6,
                available: 5
            })
        ));
    }

    #[test]
    fn top_stratum_fraction_converges_to_seventy_percent() {
        let mut r = rng::stream(5, &[99]);
        let pool: Vec<usize> = (0..60).collect();
        let mut top = 0usize;
        let mut total = 0usize;
        for _ in 0..1000 {
            for m in [10usize, 20, 30] {
                let n_top = (0.7 * m as f64).ceil() as usize;
                let picked = select_candidates_70_30(&pool, m, 0.7, &mut r).unwrap();
                top += picked.iter().filter(|&&i| i < n_top).count();
                total += m;
            }
        }
        let frac = top as f64 / total as f64;
        assert!((frac - 0.7).abs() < 0.02, "fraction {frac}");
    }

    #[test]
    fn composite_engagement_is_linear() {
        let w = EngagementWeights::default();
        let i = Interactions {
            logins: 2,
            posts: 1,
            likes: 10,
            comments: 3,
            shares: 1,
        };
        let doubled = Interactions {
            logins: 4,
            posts: 2,
            likes: 20,
            comments: 6,
            shares: 2,
        };
        let e1 = composite_engagement(600.0, 1200.0, &i, &w);
        let e2 = composite_engagement(1200.0, 2400.0, &doubled, &w);
        assert!((e2 - 2.0 * e1).abs() < 1e-12);
        assert_eq!(
            composite_engagement(0.0, 0.0, &Interactions::zero(), &w),
            0.0
        );
    }

    #[test]
    fn day_out_of_range_is_rejected() {
        let (cfg, users, index) = small_setup(1, 50);
        let mut sim = UserSim::new(
            &users[0],
            &index,
            &cfg.population,
            &cfg.journal,
            1,
            0,
            0.3,
            true,
        );
        assert!(matches!(
            sim.step_day(31, &[]),
            Err(Error::DayOutOfRange(31, 30))
        ));
    }

    #[test]
    fn injected_slate_lands_on_top_of_the_feed() {
        let (cfg, users, index) = small_setup(1, 80);
        let mut sim = UserSim::new(
            &users[0],
            &index,
            &cfg.population,
            &cfg.journal,
            21,
            0,
            0.3,
            false,
        );
        let best = index.by_category[0][0];
        let vid = index.items[best].id;
        let (record, _) = sim.step_day(1, &[vid]).unwrap();
        let touched =
            record.assigned.iter().any(|a| a.video == vid) || record.skipped.contains(&vid);
        assert!(touched, "injected video must be encountered");
    }

    #[test]
    fn feature_row_has_expected_shape() {
        let (cfg, users, index) = small_setup(3, 80);
        let ds = build_dataset(&users, &index, &cfg.population, &cfg.journal, 13).unwrap();
        for f in &ds.features {
            assert_eq!(f.continuous.len(), 27);
            assert!((1..=7).contains(&f.day_of_week));
            assert!(f.continuous.iter().all(|x| x.is_finite()));
        }
        assert!(N_CONT >= 25);
        assert_eq!(CATEGORICAL_FEATURES.len(), 4);
    }

    #[test]
    fn rho_uses_guarded_watch_time() {
        let (cfg, users, index) = small_setup(6, 80);
        let ds = build_dataset(&users, &index, &cfg.population, &cfg.journal, 17).unwrap();
        for r in ds.records.iter().filter(|r| !r.churned) {
            let expect = r.scroll_s / r.watch_s.max(1.0);
            assert!((r.rho - expect).abs() < 1e-9);
            assert!(r.rho >= 0.0);
        }
    }
}
