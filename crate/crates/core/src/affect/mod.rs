//! Daily user-emotion labeling.
//!
//! Training targets come from k-means clusters over a behavioral feature
//! subset, mapped to emotions by centroid traits, then refined by rule
//! overrides (inactivity, sharp engagement drops, stress-relief
//! oscillation). A supervised classifier learns the same labels and serves
//! the six-class probability contract downstream.

pub mod classifier;
pub mod kmeans;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use classifier::{train as train_classifier, EmotionClassifier, TrainReport, N_CLASSES};

use crate::config::AffectConfig;
use crate::error::{Error, Result};
use crate::journal::{feature_index, DailyRecord, FeatureRow};
use crate::population::UserId;
use crate::rng;

/// Six user-emotion classes. `Churned` carries zero valence and is excluded
/// from valence averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserEmotion {
    Happy,
    Excited,
    Frustrated,
    Disappointed,
    Stressed,
    Churned,
}

impl UserEmotion {
    pub const ALL: [UserEmotion; 6] = [
        UserEmotion::Happy,
        UserEmotion::Excited,
        UserEmotion::Frustrated,
        UserEmotion::Disappointed,
        UserEmotion::Stressed,
        UserEmotion::Churned,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&e| e == self).unwrap()
    }

    pub fn valence(self) -> f64 {
        match self {
            UserEmotion::Happy | UserEmotion::Excited => 1.0,
            UserEmotion::Churned => 0.0,
            _ => -1.0,
        }
    }

    pub fn is_negative(self) -> bool {
        self.valence() < 0.0
    }

    pub fn is_positive(self) -> bool {
        self.valence() > 0.0
    }

    pub fn name(self) -> &'static str {
        match self {
            UserEmotion::Happy => "happy",
            UserEmotion::Excited => "excited",
            UserEmotion::Frustrated => "frustrated",
            UserEmotion::Disappointed => "disappointed",
            UserEmotion::Stressed => "stressed",
            UserEmotion::Churned => "churned",
        }
    }

    pub fn parse(s: &str) -> Option<UserEmotion> {
        Self::ALL.iter().copied().find(|e| e.name() == s)
    }
}

impl fmt::Display for UserEmotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Behavioral feature subset the clusters are fit on. Chosen to expose the
/// engagement traits the cluster-emotion mapping keys on.
pub const CLUSTER_FEATURES: [&str; 11] = [
    "scroll_s",
    "watch_s",
    "logins",
    "posts",
    "likes",
    "comments",
    "shares",
    "engagement",
    "delta_e",
    "rho",
    "assigned_count",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub version: u32,
    pub k: usize,
    /// Standardizer over the cluster feature subset.
    pub standardizer: kmeans::Standardizer,
    /// Centroids in standardized space.
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia per k over the configured elbow range.
    pub elbow: Vec<(usize, f64)>,
    /// Cluster index -> emotion label (bijective onto five labels).
    pub mapping: Vec<UserEmotion>,
}

impl ClusterModel {
    fn subset(row: &FeatureRow) -> Vec<f64> {
        CLUSTER_FEATURES
            .iter()
            .map(|name| row.continuous[feature_index(name)])
            .collect()
    }

    pub fn assign(&self, row: &FeatureRow) -> usize {
        let z = self.standardizer.transform(&Self::subset(row));
        let mut best = 0;
        let mut best_d = f64::MAX;
        for (i, c) in self.centroids.iter().enumerate() {
            let d: f64 = z.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Fit the cluster model on every user-day row and compute the elbow curve.
pub fn fit_kmeans(rows: &[FeatureRow], cfg: &AffectConfig, seed: u64) -> Result<ClusterModel> {
    let raw: Vec<Vec<f64>> = rows.iter().map(ClusterModel::subset).collect();
    let standardizer = kmeans::Standardizer::fit(&raw);
    let z: Vec<Vec<f64>> = raw.iter().map(|r| standardizer.transform(r)).collect();

    let mut r = rng::stream(seed, &[rng::DOMAIN_KMEANS]);
    let fit = kmeans::fit(&z, cfg.k, cfg.kmeans_max_iter, cfg.kmeans_tol, &mut r)?;
    let mut re = rng::stream(seed, &[rng::DOMAIN_KMEANS, 2]);
    let elbow = kmeans::elbow_curve(
        &z,
        cfg.elbow_k_min,
        cfg.elbow_k_max,
        cfg.kmeans_max_iter,
        cfg.kmeans_tol,
        &mut re,
    )?;

    let mut model = ClusterModel {
        version: 1,
        k: cfg.k,
        standardizer,
        centroids: fit.centroids,
        inertia: fit.inertia,
        elbow,
        mapping: Vec::new(),
    };
    model.mapping = map_clusters(&model)?;
    Ok(model)
}

fn cluster_feature_pos(name: &str) -> usize {
    CLUSTER_FEATURES
        .iter()
        .position(|&f| f == name)
        .expect("cluster feature")
}

/// Map each cluster to an emotion by its centroid traits:
/// no activity -> churned; high scroll with low watch -> stressed; a burst
/// of likes and shares -> excited; high interaction with consistent viewing
/// -> happy; the remaining passive low-engagement cluster -> disappointed.
///
/// Labels are carved out sequentially (each claims the best remaining
/// cluster), which makes the mapping a bijection; exact score ties are
/// reported as ambiguous.
pub fn map_clusters(model: &ClusterModel) -> Result<Vec<UserEmotion>> {
    if model.centroids.len() != 5 {
        return Err(Error::AmbiguousMapping(format!(
            "trait mapping expects k = 5, got {}",
            model.centroids.len()
        )));
    }
    let std = &model.standardizer;
    let zero = std.zero_point();
    let pos = |name: &str| -> Option<usize> {
        let raw = cluster_feature_pos(name);
        std.kept.iter().position(|&j| j == raw)
    };
    let get = |c: &[f64], name: &str| -> f64 { pos(name).map_or(0.0, |j| c[j]) };

    let churn_score = |c: &[f64]| -> f64 {
        let d: f64 = c.iter().zip(&zero).map(|(a, b)| (a - b) * (a - b)).sum();
        -d
    };
    let stressed_score = |c: &[f64]| get(c, "scroll_s") - get(c, "watch_s") + get(c, "rho");
    let excited_score = |c: &[f64]| get(c, "likes") + 2.0 * get(c, "shares");
    let happy_score = |c: &[f64]| {
        get(c, "likes") + get(c, "comments") + get(c, "logins") + get(c, "watch_s")
            - get(c, "rho")
    };

    let mut remaining: Vec<usize> = (0..5).collect();
    let mut mapping = vec![UserEmotion::Churned; 5];
    let stages: [(&str, UserEmotion, Box<dyn Fn(&[f64]) -> f64>); 4] = [
        ("churned", UserEmotion::Churned, Box::new(churn_score)),
        ("stressed", UserEmotion::Stressed, Box::new(stressed_score)),
        ("excited", UserEmotion::Excited, Box::new(excited_score)),
        ("happy", UserEmotion::Happy, Box::new(happy_score)),
    ];
    for (name, emotion, score) in stages {
        let mut scored: Vec<(usize, f64)> = remaining
            .iter()
            .map(|&c| (c, score(&model.centroids[c])))
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        if scored.len() > 1 && (scored[0].1 - scored[1].1).abs() < 1e-9 {
            return Err(Error::AmbiguousMapping(format!(
                "clusters {} and {} tie on the `{name}` trait (score {:.6})",
                scored[0].0, scored[1].0, scored[0].1
            )));
        }
        let chosen = scored[0].0;
        mapping[chosen] = emotion;
        remaining.retain(|&c| c != chosen);
    }
    mapping[remaining[0]] = UserEmotion::Disappointed;
    Ok(mapping)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverrideKind {
    ChurnedInactivity,
    StressDrop,
    FrustrationOscillation,
}

impl OverrideKind {
    pub fn name(self) -> &'static str {
        match self {
            OverrideKind::ChurnedInactivity => "churned_inactivity",
            OverrideKind::StressDrop => "stress_drop",
            OverrideKind::FrustrationOscillation => "frustration_oscillation",
        }
    }
}

/// Rule overrides on top of the cluster label, in priority order:
/// complete inactivity, sharp engagement-signal drop, stress-relief
/// oscillation. `delta_e_change` is today's smoothed signal minus
/// yesterday's; `recent` holds the final labels of the preceding days,
/// most recent last.
pub fn apply_rule_overrides(
    cluster_label: UserEmotion,
    inactive: bool,
    delta_e_change: f64,
    recent: &[UserEmotion],
    cfg: &AffectConfig,
) -> (UserEmotion, Option<OverrideKind>) {
    if inactive {
        return (UserEmotion::Churned, Some(OverrideKind::ChurnedInactivity));
    }
    if delta_e_change < cfg.stress_drop {
        return (UserEmotion::Stressed, Some(OverrideKind::StressDrop));
    }
    if cluster_label.is_positive() {
        let window = recent
            .iter()
            .rev()
            .take(cfg.frustration_window)
            .filter(|&&e| e == UserEmotion::Stressed)
            .count();
        if window >= cfg.frustration_min_stressed {
            return (
                UserEmotion::Frustrated,
                Some(OverrideKind::FrustrationOscillation),
            );
        }
    }
    (cluster_label, None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub user: UserId,
    pub day: u32,
    pub cluster: usize,
    pub label: UserEmotion,
    pub override_applied: Option<OverrideKind>,
}

/// Assign cluster labels and apply rule overrides, day by day per user.
/// Records and features must be aligned and sorted by (user, day).
pub fn label_records(
    records: &[DailyRecord],
    features: &[FeatureRow],
    model: &ClusterModel,
    cfg: &AffectConfig,
) -> Vec<LabelRow> {
    assert_eq!(records.len(), features.len());
    let mut out = Vec::with_capacity(records.len());
    let mut history: Vec<UserEmotion> = Vec::new();
    let mut prev_delta_e = 0.0;
    let mut current_user: Option<UserId> = None;
    for (rec, row) in records.iter().zip(features) {
        if current_user != Some(rec.user) {
            current_user = Some(rec.user);
            history.clear();
            prev_delta_e = 0.0;
        }
        let cluster = model.assign(row);
        let cluster_label = model.mapping[cluster];
        let inactive = rec.churned || total_activity(rec) == 0.0;
        let delta_e_change = if rec.churned {
            0.0
        } else {
            rec.delta_e - prev_delta_e
        };
        let (label, override_applied) =
            apply_rule_overrides(cluster_label, inactive, delta_e_change, &history, cfg);
        out.push(LabelRow {
            user: rec.user,
            day: rec.day,
            cluster,
            label,
            override_applied,
        });
        history.push(label);
        if !rec.churned {
            prev_delta_e = rec.delta_e;
        }
    }
    out
}

fn total_activity(rec: &DailyRecord) -> f64 {
    rec.watch_s
        + rec.scroll_s
        + f64::from(rec.interactions.logins)
        + f64::from(rec.interactions.posts)
        + f64::from(rec.interactions.likes)
        + f64::from(rec.interactions.comments)
        + f64::from(rec.interactions.shares)
}

/// Join the prior-day final label into each feature row so the classifier
/// sees the emotional context the journal cannot know at simulation time.
pub fn join_prev_day_labels(features: &[FeatureRow], labels: &[LabelRow]) -> Vec<FeatureRow> {
    assert_eq!(features.len(), labels.len());
    let mut out = Vec::with_capacity(features.len());
    for (i, row) in features.iter().enumerate() {
        let mut row = row.clone();
        if i > 0 && labels[i - 1].user == row.user && labels[i - 1].day + 1 == row.day {
            row.prev_day_emotion = Some(labels[i - 1].label);
        }
        out.push(row);
    }
    out
}

/// Per-day smoothed emotion trajectory: trailing 3-day moving average of the
/// class probabilities; series edges average the days available (1 or 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub day: u32,
    pub dominant: UserEmotion,
    pub smoothed: [f64; N_CLASSES],
}

pub fn trajectory(days: &[(u32, [f64; N_CLASSES])]) -> Result<Vec<TrajectoryPoint>> {
    if days.is_empty() {
        return Err(Error::Config("trajectory needs at least one day".into()));
    }
    let mut out = Vec::with_capacity(days.len());
    for i in 0..days.len() {
        let lo = i.saturating_sub(2);
        let window = &days[lo..=i];
        let mut smoothed = [0.0; N_CLASSES];
        for (_, p) in window {
            for c in 0..N_CLASSES {
                smoothed[c] += p[c];
            }
        }
        for v in &mut smoothed {
            *v /= window.len() as f64;
        }
        let mut best = 0;
        for c in 1..N_CLASSES {
            if smoothed[c] > smoothed[best] {
                best = c;
            }
        }
        out.push(TrajectoryPoint {
            day: days[i].0,
            dominant: UserEmotion::ALL[best],
            smoothed,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AffectConfig;

    fn centroid_model(centroids: Vec<Vec<f64>>) -> ClusterModel {
        let d = CLUSTER_FEATURES.len();
        ClusterModel {
            version: 1,
            k: centroids.len(),
            standardizer: kmeans::Standardizer {
                means: vec![1.0; d],
                stds: vec![1.0; d],
                kept: (0..d).collect(),
            },
            centroids,
            inertia: 0.0,
            elbow: Vec::new(),
            mapping: Vec::new(),
        }
    }

    fn trait_centroid(f: impl Fn(&str) -> f64) -> Vec<f64> {
        CLUSTER_FEATURES.iter().map(|&n| f(n)).collect()
    }

    #[test]
    fn archetype_centroids_map_to_expected_labels() {
        // means = 1, stds = 1, so the raw zero point is -1 everywhere.
        let churned = trait_centroid(|_| -1.0);
        let stressed = trait_centroid(|n| match n {
            "scroll_s" | "rho" => 2.0,
            "watch_s" => -1.5,
            _ => 0.0,
        });
        let excited = trait_centroid(|n| match n {
            "likes" => 2.5,
            "shares" => 3.0,
            "watch_s" => 0.5,
            _ => 0.2,
        });
        let happy = trait_centroid(|n| match n {
            "likes" => 1.8,
            "comments" => 1.5,
            "logins" => 1.5,
            "watch_s" => 1.5,
            _ => 0.2,
        });
        let disappointed = trait_centroid(|n| match n {
            "engagement" => -0.8,
            "watch_s" => -0.5,
            _ => -0.2,
        });
        let model = centroid_model(vec![happy, churned, disappointed, excited, stressed]);
        let mapping = map_clusters(&model).unwrap();
        assert_eq!(mapping[0], UserEmotion::Happy);
        assert_eq!(mapping[1], UserEmotion::Churned);
        assert_eq!(mapping[2], UserEmotion::Disappointed);
        assert_eq!(mapping[3], UserEmotion::Excited);
        assert_eq!(mapping[4], UserEmotion::Stressed);
        // Bijection onto the five cluster labels.
        let mut seen = mapping.clone();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 5);
    }

    #[test]
    fn exact_trait_ties_are_ambiguous() {
        let c = trait_centroid(|_| 0.5);
        let model = centroid_model(vec![c.clone(), c.clone(), c.clone(), c.clone(), c]);
        assert!(matches!(
            map_clusters(&model),
            Err(Error::AmbiguousMapping(_))
        ));
    }

    #[test]
    fn inactivity_overrides_any_cluster_label() {
        let cfg = AffectConfig::default();
        let (label, kind) = apply_rule_overrides(UserEmotion::Happy, true, 0.0, &[], &cfg);
        assert_eq!(label, UserEmotion::Churned);
        assert_eq!(kind, Some(OverrideKind::ChurnedInactivity));
    }

    #[test]
    fn sharp_engagement_drop_overrides_to_stressed() {
        let cfg = AffectConfig::default();
        // 0.4 -> -0.1 is a drop of 0.5, past the -0.3 threshold.
        let (label, kind) = apply_rule_overrides(UserEmotion::Happy, false, -0.5, &[], &cfg);
        assert_eq!(label, UserEmotion::Stressed);
        assert_eq!(kind, Some(OverrideKind::StressDrop));
    }

    #[test]
    fn oscillation_flips_positive_label_to_frustrated() {
        let cfg = AffectConfig::default();
        let recent = [
            UserEmotion::Stressed,
            UserEmotion::Happy,
            UserEmotion::Stressed,
        ];
        let (label, kind) =
            apply_rule_overrides(UserEmotion::Excited, false, 0.0, &recent, &cfg);
        assert_eq!(label, UserEmotion::Frustrated);
        assert_eq!(kind, Some(OverrideKind::FrustrationOscillation));
        // A negative cluster label passes through unchanged.
        let (label, kind) =
            apply_rule_overrides(UserEmotion::Disappointed, false, 0.0, &recent, &cfg);
        assert_eq!(label, UserEmotion::Disappointed);
        assert_eq!(kind, None);
    }

    #[test]
    fn no_override_passes_cluster_label_through() {
        let cfg = AffectConfig::default();
        let (label, kind) = apply_rule_overrides(UserEmotion::Excited, false, 0.1, &[], &cfg);
        assert_eq!(label, UserEmotion::Excited);
        assert_eq!(kind, None);
    }

    #[test]
    fn trajectory_smoothing_behaviour() {
        // Constant series: smoothed equals raw.
        let p = [0.5, 0.1, 0.1, 0.1, 0.1, 0.1];
        let days: Vec<(u32, [f64; 6])> = (1..=5).map(|d| (d, p)).collect();
        let t = trajectory(&days).unwrap();
        for point in &t {
            assert!((point.smoothed[0] - 0.5).abs() < 1e-12);
            assert_eq!(point.dominant, UserEmotion::Happy);
        }

        // Single-day spike flattens: smoothed peak below the raw peak.
        let mut days: Vec<(u32, [f64; 6])> = (1..=7)
            .map(|d| (d, [0.0, 0.0, 0.0, 0.0, 0.0, 1.0]))
            .collect();
        days[3].1 = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let t = trajectory(&days).unwrap();
        let peak = t.iter().map(|p| p.smoothed[0]).fold(0.0, f64::max);
        assert!(peak < 1.0);

        // Edge windows use the available days: day 2 averages two days.
        let days = vec![
            (1u32, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            (2, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]),
            (3, [0.0, 0.0, 1.0, 0.0, 0.0, 0.0]),
        ];
        let t = trajectory(&days).unwrap();
        assert!((t[0].smoothed[0] - 1.0).abs() < 1e-12);
        assert!((t[1].smoothed[0] - 0.5).abs() < 1e-12);
        assert!((t[1].smoothed[1] - 0.5).abs() < 1e-12);
        assert!((t[2].smoothed[2] - 1.0 / 3.0).abs() < 1e-12);

        assert!(trajectory(&[]).is_err());
    }

    #[test]
    fn valence_mapping_is_fixed() {
        assert_eq!(UserEmotion::Happy.valence(), 1.0);
        assert_eq!(UserEmotion::Excited.valence(), 1.0);
        assert_eq!(UserEmotion::Frustrated.valence(), -1.0);
        assert_eq!(UserEmotion::Disappointed.valence(), -1.0);
        assert_eq!(UserEmotion::Stressed.valence(), -1.0);
        assert_eq!(UserEmotion::Churned.valence(), 0.0);
    }
}
