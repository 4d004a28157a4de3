//! Simulated video corpus: categories, themes, emotion labels, durations,
//! intensities, and the composite engagement score used everywhere downstream.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::CatalogConfig;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Educational,
    Entertainment,
    News,
    Inspirational,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Educational,
        Category::Entertainment,
        Category::News,
        Category::Inspirational,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Educational => "educational",
            Category::Entertainment => "entertainment",
            Category::News => "news",
            Category::Inspirational => "inspirational",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theme {
    MentalHealth,
    Politics,
    Motivation,
    Relationships,
}

impl Theme {
    pub const ALL: [Theme; 4] = [
        Theme::MentalHealth,
        Theme::Politics,
        Theme::Motivation,
        Theme::Relationships,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Theme::MentalHealth => "mental_health",
            Theme::Politics => "politics",
            Theme::Motivation => "motivation",
            Theme::Relationships => "relationships",
        }
    }
}

impl fmt::Display for Theme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Eight video affect labels covering all four valence-arousal quadrants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VideoEmotion {
    Happy,
    Excited,
    Anxious,
    Stressed,
    Disappointed,
    Angry,
    Sad,
    Calm,
}

impl VideoEmotion {
    pub const ALL: [VideoEmotion; 8] = [
        VideoEmotion::Happy,
        VideoEmotion::Excited,
        VideoEmotion::Anxious,
        VideoEmotion::Stressed,
        VideoEmotion::Disappointed,
        VideoEmotion::Angry,
        VideoEmotion::Sad,
        VideoEmotion::Calm,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&e| e == self).unwrap()
    }

    /// Fixed valence sign: positive-affect content +1, negative-affect -1.
    pub fn valence(self) -> f64 {
        match self {
            VideoEmotion::Happy | VideoEmotion::Excited | VideoEmotion::Calm => 1.0,
            _ => -1.0,
        }
    }

    /// High-arousal emotions draw intensity from the high band, calm from the
    /// low band, the rest from the middle.
    pub fn arousal_band(self) -> ArousalBand {
        match self {
            VideoEmotion::Excited
            | VideoEmotion::Angry
            | VideoEmotion::Anxious
            | VideoEmotion::Stressed => ArousalBand::High,
            VideoEmotion::Calm => ArousalBand::Low,
            _ => ArousalBand::Mid,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VideoEmotion::Happy => "happy",
            VideoEmotion::Excited => "excited",
            VideoEmotion::Anxious => "anxious",
            VideoEmotion::Stressed => "stressed",
            VideoEmotion::Disappointed => "disappointed",
            VideoEmotion::Angry => "angry",
            VideoEmotion::Sad => "sad",
            VideoEmotion::Calm => "calm",
        }
    }
}

impl fmt::Display for VideoEmotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArousalBand {
    High,
    Mid,
    Low,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct VideoId(pub u32);

impl fmt::Display for VideoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{:04}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoItem {
    pub id: VideoId,
    pub category: Category,
    pub theme: Theme,
    pub duration_s: f64,
    pub emotion: VideoEmotion,
    pub intensity: u8,
    pub virality: f64,
    pub engagement_score: f64,
}

/// Duration draw: Gaussian(mu, sigma) clipped to the configured bounds.
pub fn sample_duration(cfg: &CatalogConfig, rng: &mut ChaCha8Rng) -> f64 {
    let normal = Normal::new(cfg.duration_mu_s, cfg.duration_sigma_s).expect("valid sigma");
    clip_duration(cfg, normal.sample(rng))
}

pub fn clip_duration(cfg: &CatalogConfig, raw: f64) -> f64 {
    raw.clamp(cfg.duration_min_s, cfg.duration_max_s)
}

/// Intensity draw from the emotion's arousal band, rounded and clipped to 1..=10.
pub fn sample_intensity(cfg: &CatalogConfig, emotion: VideoEmotion, rng: &mut ChaCha8Rng) -> u8 {
    let mu = intensity_mu(cfg, emotion);
    let normal = Normal::new(mu, cfg.intensity_sigma).expect("valid sigma");
    round_intensity(normal.sample(rng))
}

pub fn intensity_mu(cfg: &CatalogConfig, emotion: VideoEmotion) -> f64 {
    match emotion.arousal_band() {
        ArousalBand::High => cfg.intensity_mu_high,
        ArousalBand::Mid => cfg.intensity_mu_mid,
        ArousalBand::Low => cfg.intensity_mu_low,
    }
}

pub fn round_intensity(raw: f64) -> u8 {
    raw.round().clamp(1.0, 10.0) as u8
}

/// Composite engagement score:
/// base(category) * (0.5 + intensity/10) * (1 + short_bonus if short) * virality.
/// Deterministic in the item fields and monotone in intensity and virality.
pub fn engagement_score(cfg: &CatalogConfig, item: &VideoItem) -> f64 {
    score_parts(
        cfg,
        item.category,
        item.intensity,
        item.duration_s,
        item.virality,
    )
}

pub fn score_parts(
    cfg: &CatalogConfig,
    category: Category,
    intensity: u8,
    duration_s: f64,
    virality: f64,
) -> f64 {
    let base = cfg.base_engagement.as_array()[category.index()];
    let intensity_factor = 0.5 + f64::from(intensity) / 10.0;
    let duration_factor = if duration_s <= cfg.short_cutoff_s {
        1.0 + cfg.short_bonus
    } else {
        1.0
    };
    base * intensity_factor * duration_factor * virality
}

fn sample_virality(cfg: &CatalogConfig, rng: &mut ChaCha8Rng) -> f64 {
    if rng.random::<f64>() < cfg.viral_prob {
        rng.random_range(cfg.virality_viral_min..cfg.virality_viral_max)
    } else {
        rng.random_range(cfg.virality_base_min..cfg.virality_base_max)
    }
}

/// Generate `n` videos deterministically from `seed`.
///
/// For n >= 32 every (category, emotion) pair is guaranteed at least one
/// video: the tail of the catalog is patched with any missing pair, which
/// perturbs the emotion marginals by at most 32/n.
pub fn generate_catalog(cfg: &CatalogConfig, seed: u64) -> Result<Vec<VideoItem>> {
    let n = cfg.n_videos;
    if n == 0 {
        return Err(Error::EmptyCatalog);
    }
    let mut r = rng::stream(seed, &[rng::DOMAIN_CATALOG]);
    let weights = WeightedIndex::new(cfg.emotion_probs.as_array())
        .map_err(|e| Error::Config(format!("catalog.emotion_probs: {e}")))?;

    let mut items = Vec::with_capacity(n);
    for i in 0..n {
        let emotion = VideoEmotion::ALL[weights.sample(&mut r)];
        let category = Category::ALL[r.random_range(0..4)];
        let theme = Theme::ALL[r.random_range(0..4)];
        let duration_s = sample_duration(cfg, &mut r);
        let intensity = sample_intensity(cfg, emotion, &mut r);
        let virality = sample_virality(cfg, &mut r);
        let mut item = VideoItem {
            id: VideoId(i as u32),
            category,
            theme,
            duration_s,
            emotion,
            intensity,
            virality,
            engagement_score: 0.0,
        };
        item.engagement_score = engagement_score(cfg, &item);
        items.push(item);
    }

    if n >= Category::ALL.len() * VideoEmotion::ALL.len() {
        patch_coverage(cfg, seed, &mut items);
    }
    Ok(items)
}

/// Rewrite tail items so every (category, emotion) pair is represented.
fn patch_coverage(cfg: &CatalogConfig, seed: u64, items: &mut [VideoItem]) {
    let mut present = [[false; 8]; 4];
    for item in items.iter() {
        present[item.category.index()][item.emotion.index()] = true;
    }
    let mut r = rng::stream(seed, &[rng::DOMAIN_CATALOG, 0xc0fe]);
    let mut tail = items.len();
    for category in Category::ALL {
        for emotion in VideoEmotion::ALL {
            if present[category.index()][emotion.index()] {
                continue;
            }
            tail -= 1;
            let item = &mut items[tail];
            present[item.category.index()][item.emotion.index()] = false;
            item.category = category;
            item.emotion = emotion;
            item.intensity = sample_intensity(cfg, emotion, &mut r);
            item.engagement_score = engagement_score(cfg, item);
            present[category.index()][emotion.index()] = true;
        }
    }
}

/// Per-category and per-(category, emotion) pools, sorted by descending
/// engagement score with ids breaking ties. Built once per run.
pub struct CatalogIndex {
    pub items: Vec<VideoItem>,
    pub by_category: [Vec<usize>; 4],
    pub by_category_emotion: [[Vec<usize>; 8]; 4],
    /// Whole catalog sorted by descending engagement score.
    pub by_score: Vec<usize>,
    pub max_score: f64,
}

impl CatalogIndex {
    pub fn new(items: Vec<VideoItem>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyCatalog);
        }
        let mut by_category: [Vec<usize>; 4] = Default::default();
        let mut by_category_emotion: [[Vec<usize>; 8]; 4] = Default::default();
        for (idx, item) in items.iter().enumerate() {
            by_category[item.category.index()].push(idx);
            by_category_emotion[item.category.index()][item.emotion.index()].push(idx);
        }
        let sort_key = |items: &[VideoItem], &idx: &usize| {
            let it = &items[idx];
            (std::cmp::Reverse(ordered(it.engagement_score)), it.id)
        };
        for pool in by_category.iter_mut() {
            pool.sort_by_key(|i| sort_key(&items, i));
        }
        for row in by_category_emotion.iter_mut() {
            for pool in row.iter_mut() {
                pool.sort_by_key(|i| sort_key(&items, i));
            }
        }
        let mut by_score: Vec<usize> = (0..items.len()).collect();
        by_score.sort_by_key(|i| sort_key(&items, i));
        let max_score = items
            .iter()
            .map(|v| v.engagement_score)
            .fold(0.0_f64, f64::max);
        Ok(Self {
            items,
            by_category,
            by_category_emotion,
            by_score,
            max_score,
        })
    }

    pub fn get(&self, id: VideoId) -> &VideoItem {
        &self.items[id.0 as usize]
    }
}

/// Total order on finite scores for deterministic sorting.
pub(crate) fn ordered(x: f64) -> u64 {
    let bits = x.to_bits();
    if x >= 0.0 {
        bits ^ (1 << 63)
    } else {
        !bits
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CatalogConfig;

    fn cfg_with(n: usize) -> CatalogConfig {
        CatalogConfig {
            n_videos: n,
            ..CatalogConfig::default()
        }
    }

    #[test]
    fn rejects_empty_catalog_request() {
        assert!(matches!(
            generate_catalog(&cfg_with(0), 1),
            Err(Error::EmptyCatalog)
        ));
    }

    #[test]
    fn singleton_catalog_holds_invariants() {
        let items = generate_catalog(&cfg_with(1), 99).unwrap();
        assert_eq!(items.len(), 1);
        let v = &items[0];
        assert!(v.duration_s >= 10.0 && v.duration_s <= 90.0);
        assert!((1..=10).contains(&v.intensity));
        assert!(v.virality >= 1.0);
        assert!(v.engagement_score > 0.0);
    }

    #[test]
    fn seed_42_catalog_is_in_bounds_and_reproducible() {
        let cfg = cfg_with(1000);
        let a = generate_catalog(&cfg, 42).unwrap();
        let b = generate_catalog(&cfg, 42).unwrap();
        assert_eq!(a.len(), 1000);
        assert_eq!(a, b);
        for v in &a {
            assert!(v.duration_s >= 10.0 && v.duration_s <= 90.0);
            assert!((1..=10).contains(&v.intensity));
            assert!(v.engagement_score > 0.0);
        }
    }

    #[test]
    fn emotion_marginals_match_configured_probabilities() {
        let cfg = cfg_with(10_000);
        let items = generate_catalog(&cfg, 7).unwrap();
        let probs = cfg.emotion_probs.as_array();
        let mut counts = [0usize; 8];
        for v in &items {
            counts[v.emotion.index()] += 1;
        }
        // Per-class frequency within +/-2% absolute of the configured mass.
        for (i, &c) in counts.iter().enumerate() {
            let freq = c as f64 / items.len() as f64;
            assert!(
                (freq - probs[i]).abs() < 0.02,
                "emotion {:?}: freq {freq} vs p {}",
                VideoEmotion::ALL[i],
                probs[i]
            );
        }
        // Chi-square goodness of fit, dof = 7, alpha = 0.01 critical 18.475.
        let chi2: f64 = counts
            .iter()
            .zip(probs.iter())
            .map(|(&c, &p)| {
                let expected = p * items.len() as f64;
                (c as f64 - expected).powi(2) / expected
            })
            .sum();
        assert!(chi2 < 18.475, "chi-square too large: {chi2}");
    }

    #[test]
    fn duration_clips_to_bounds() {
        let cfg = cfg_with(1);
        assert_eq!(clip_duration(&cfg, 30.0), 30.0);
        assert_eq!(clip_duration(&cfg, -5.0), 10.0);
        assert_eq!(clip_duration(&cfg, 200.0), 90.0);
    }

    #[test]
    fn intensity_rounds_and_clips() {
        assert_eq!(round_intensity(4.4), 4);
        assert_eq!(round_intensity(12.3), 10);
        assert_eq!(round_intensity(-3.0), 1);
    }

    #[test]
    fn intensity_mean_tracks_configured_mu() {
        let cfg = cfg_with(1);
        let mut r = rng::stream(5, &[rng::DOMAIN_CATALOG, 77]);
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|_| f64::from(sample_intensity(&cfg, VideoEmotion::Excited, &mut r)))
            .sum::<f64>()
            / n as f64;
        assert!(
            (mean - cfg.intensity_mu_high).abs() < 0.3,
            "mean {mean} vs mu {}",
            cfg.intensity_mu_high
        );
    }

    #[test]
    fn score_reduces_to_base_with_identity_factors() {
        let cfg = cfg_with(1);
        // intensity 5 -> factor 1.0; duration above cutoff -> factor 1.0.
        let score = score_parts(&cfg, Category::News, 5, 60.0, 1.0);
        assert!((score - cfg.base_engagement.news).abs() < 1e-12);
    }

    #[test]
    fn score_is_multiplicative_in_virality() {
        let cfg = cfg_with(1);
        let s1 = score_parts(&cfg, Category::Entertainment, 7, 30.0, 1.3);
        let s2 = score_parts(&cfg, Category::Entertainment, 7, 30.0, 2.6);
        assert!((s2 - 2.0 * s1).abs() < 1e-12);
    }

    #[test]
    fn score_is_monotone_in_intensity() {
        let cfg = cfg_with(1);
        let mut last = 0.0;
        for i in 1..=10 {
            let s = score_parts(&cfg, Category::News, i, 60.0, 1.0);
            assert!(s >= last);
            last = s;
        }
    }

    #[test]
    fn excited_scores_dominate_disappointed_in_mean_and_variance() {
        let cfg = cfg_with(1000);
        let items = generate_catalog(&cfg, 42).unwrap();
        let collect = |e: VideoEmotion| -> Vec<f64> {
            items
                .iter()
                .filter(|v| v.emotion == e)
                .map(|v| v.engagement_score)
                .collect()
        };
        let excited = collect(VideoEmotion::Excited);
        let disappointed = collect(VideoEmotion::Disappointed);
        assert!(excited.len() > 30 && disappointed.len() > 30);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64]| {
            let m = mean(v);
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
        };
        assert!(mean(&excited) > mean(&disappointed));
        assert!(var(&excited) > var(&disappointed));
    }

    #[test]
    fn catalog_covers_every_category_emotion_pair() {
        let cfg = cfg_with(100);
        let items = generate_catalog(&cfg, 3).unwrap();
        let index = CatalogIndex::new(items).unwrap();
        for c in 0..4 {
            for e in 0..8 {
                assert!(
                    !index.by_category_emotion[c][e].is_empty(),
                    "missing pool ({c},{e})"
                );
            }
        }
    }

    #[test]
    fn index_pools_are_sorted_by_descending_score() {
        let cfg = cfg_with(200);
        let items = generate_catalog(&cfg, 11).unwrap();
        let index = CatalogIndex::new(items).unwrap();
        for pool in &index.by_category {
            for w in pool.windows(2) {
                let a = index.items[w[0]].engagement_score;
                let b = index.items[w[1]].engagement_score;
                assert!(a >= b);
            }
        }
    }
}
