//! On-disk artifact formats: CSV tables with fixed headers, JSONL mirrors,
//! JSON parameter dumps, content hashing, and the per-run manifest that
//! records provenance (config hash, seed, stage version, input/output
//! hashes) for every stage.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::affect::{LabelRow, OverrideKind, UserEmotion};
use crate::bench::RunMetrics;
use crate::catalog::VideoItem;
use crate::causal::CausalGraph;
use crate::error::{Error, Result};
use crate::journal::{DailyRecord, FeatureRow, CATEGORICAL_FEATURES, CONTINUOUS_FEATURES};
use crate::policy::{ActionKey, EpochStats, PolicyState, QTable, StepLog, N_ACTIONS, N_STATES};
use crate::population::{UserId, UserProfile};

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedArtifact {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::MalformedArtifact {
                path: path.display().to_string(),
                detail: format!("line {}: {e}", i + 1),
            })?,
        );
    }
    Ok(out)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(csv::Writer::from_path(path)?)
}

/// catalog.csv: fixed header, one row per video.
pub fn write_catalog_csv(path: &Path, items: &[VideoItem]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "id",
        "category",
        "theme",
        "duration_s",
        "emotion",
        "intensity",
        "virality",
        "engagement_score",
    ])?;
    for v in items {
        w.write_record([
            v.id.to_string(),
            v.category.to_string(),
            v.theme.to_string(),
            v.duration_s.to_string(),
            v.emotion.to_string(),
            v.intensity.to_string(),
            v.virality.to_string(),
            v.engagement_score.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_users_csv(path: &Path, users: &[UserProfile]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "id",
        "tier",
        "gamma_shape",
        "gamma_scale_s",
        "watch_min_s",
        "watch_max_s",
        "churn_propensity",
        "alpha_educational",
        "alpha_entertainment",
        "alpha_news",
        "alpha_inspirational",
        "spike_days",
    ])?;
    for u in users {
        let spikes = u
            .spike_days
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            u.id.to_string(),
            u.tier.to_string(),
            u.gamma_shape.to_string(),
            u.gamma_scale_s.to_string(),
            u.watch_min_s.to_string(),
            u.watch_max_s.to_string(),
            u.churn_propensity.to_string(),
            u.dirichlet_alpha[0].to_string(),
            u.dirichlet_alpha[1].to_string(),
            u.dirichlet_alpha[2].to_string(),
            u.dirichlet_alpha[3].to_string(),
            spikes,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records_csv(path: &Path, records: &[DailyRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "user_id",
        "day",
        "churned",
        "scroll_s",
        "watch_budget_s",
        "watch_s",
        "multiplier",
        "engagement",
        "delta_e",
        "rho",
        "assigned_count",
        "skipped_count",
        "cat_time_educational",
        "cat_time_entertainment",
        "cat_time_news",
        "cat_time_inspirational",
        "logins",
        "posts",
        "likes",
        "comments",
        "shares",
        "dominant_emotion",
    ])?;
    for r in records {
        w.write_record([
            r.user.to_string(),
            r.day.to_string(),
            u8::from(r.churned).to_string(),
            r.scroll_s.to_string(),
            r.watch_budget_s.to_string(),
            r.watch_s.to_string(),
            r.multiplier.to_string(),
            r.engagement.to_string(),
            r.delta_e.to_string(),
            r.rho.to_string(),
            r.assigned.len().to_string(),
            r.skipped.len().to_string(),
            r.category_time_s[0].to_string(),
            r.category_time_s[1].to_string(),
            r.category_time_s[2].to_string(),
            r.category_time_s[3].to_string(),
            r.interactions.logins.to_string(),
            r.interactions.posts.to_string(),
            r.interactions.likes.to_string(),
            r.interactions.comments.to_string(),
            r.interactions.shares.to_string(),
            r.dominant_emotion
                .map_or_else(|| "".to_string(), |e| e.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_features_csv(path: &Path, rows: &[FeatureRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = vec!["user_id".into(), "day".into()];
    header.extend(CONTINUOUS_FEATURES.iter().map(|s| s.to_string()));
    header.extend(CATEGORICAL_FEATURES.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for f in rows {
        let mut rec: Vec<String> = vec![f.user.to_string(), f.day.to_string()];
        rec.extend(f.continuous.iter().map(|x| x.to_string()));
        rec.push(f.tier.to_string());
        rec.push(
            f.dominant_category
                .map_or_else(|| "none".to_string(), |c| c.to_string()),
        );
        rec.push(
            f.prev_day_emotion
                .map_or_else(|| "none".to_string(), |e| e.to_string()),
        );
        rec.push(f.day_of_week.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_labels_csv(path: &Path, labels: &[LabelRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["user_id", "day", "cluster", "label", "override_applied"])?;
    for l in labels {
        w.write_record([
            l.user.to_string(),
            l.day.to_string(),
            l.cluster.to_string(),
            l.label.to_string(),
            l.override_applied
                .map_or_else(|| "none".to_string(), |o| o.name().to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels_csv(path: &Path) -> Result<Vec<LabelRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let bad = |detail: &str| Error::MalformedArtifact {
            path: path.display().to_string(),
            detail: detail.to_string(),
        };
        let user: u32 = row
            .get(0)
            .and_then(|s| s.trim_start_matches('u').parse().ok())
            .ok_or_else(|| bad("user_id"))?;
        let day: u32 = row.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| bad("day"))?;
        let cluster: usize = row
            .get(2)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("cluster"))?;
        let label = row
            .get(3)
            .and_then(UserEmotion::parse)
            .ok_or_else(|| bad("label"))?;
        let override_applied = match row.get(4) {
            Some("none") | None => None,
            Some("churned_inactivity") => Some(OverrideKind::ChurnedInactivity),
            Some("stress_drop") => Some(OverrideKind::StressDrop),
            Some("frustration_oscillation") => Some(OverrideKind::FrustrationOscillation),
            Some(other) => return Err(bad(&format!("override `{other}`"))),
        };
        out.push(LabelRow {
            user: UserId(user),
            day,
            cluster,
            label,
            override_applied,
        });
    }
    Ok(out)
}

pub fn write_confusion_csv(path: &Path, confusion: &[[u64; 6]; 6]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["actual".to_string()];
    header.extend(UserEmotion::ALL.iter().map(|e| e.to_string()));
    w.write_record(&header)?;
    for (i, row) in confusion.iter().enumerate() {
        let mut rec = vec![UserEmotion::ALL[i].to_string()];
        rec.extend(row.iter().map(|c| c.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_elbow_csv(path: &Path, curve: &[(usize, f64)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["k", "inertia"])?;
    for (k, inertia) in curve {
        w.write_record([k.to_string(), inertia.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_edges_csv(path: &Path, graph: &CausalGraph) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["src", "dst", "weight"])?;
    for (src, dst, weight) in graph.edges() {
        w.write_record([
            graph.names[src].clone(),
            graph.names[dst].clone(),
            weight.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_causal_order(path: &Path, graph: &CausalGraph) -> Result<()> {
    let mut text = String::new();
    for &idx in &graph.causal_order {
        text.push_str(&graph.names[idx]);
        text.push('\n');
    }
    write_text(path, &text)
}

pub fn write_qtable_csv(path: &Path, table: &QTable) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["state", "action", "q", "visits"])?;
    for s in 0..N_STATES {
        for a in 0..N_ACTIONS {
            let q = table.q[s * N_ACTIONS + a];
            let visits = table.visits[s * N_ACTIONS + a];
            if q == 0.0 && visits == 0 {
                continue;
            }
            w.write_record([
                state_name(s),
                ActionKey::from_index(a).name(),
                q.to_string(),
                visits.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn state_name(index: usize) -> String {
    let cat = index % 5;
    let rest = index / 5;
    let tertile = rest % 3;
    let rest = rest / 3;
    let streak = rest % 3;
    let emotion = rest / 3;
    PolicyState {
        emotion: UserEmotion::ALL[emotion],
        streak_bucket: streak as u8,
        tertile: tertile as u8,
        last_category: if cat == 0 {
            None
        } else {
            Some(crate::catalog::Category::ALL[cat - 1])
        },
    }
    .name()
}

pub fn write_epoch_rewards_csv(path: &Path, stats: &[EpochStats]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["epoch", "temperature", "steps", "mean_reward", "action_entropy"])?;
    for e in stats {
        w.write_record([
            e.epoch.to_string(),
            e.temperature.to_string(),
            e.steps.to_string(),
            e.mean_reward.to_string(),
            e.action_entropy().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics_csv(path: &Path, rows: &[RunMetrics]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "variant",
        "seed",
        "users",
        "recovery_time_days",
        "mean_valence",
        "negative_emotion_days",
        "volatility",
        "bounce_rate",
        "mean_engagement_reward",
        "cumulative_causal_bonus",
    ])?;
    for m in rows {
        w.write_record([
            m.variant.clone(),
            m.seed.to_string(),
            m.users.to_string(),
            m.recovery_time_days.to_string(),
            m.mean_valence.to_string(),
            m.negative_emotion_days.to_string(),
            m.volatility.to_string(),
            m.bounce_rate.to_string(),
            m.mean_engagement_reward.to_string(),
            m.cumulative_causal_bonus.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row of trajectories.jsonl: the smoothed per-class probabilities and
/// dominant emotion for a user-day, plus which policy served it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub user: UserId,
    pub day: u32,
    pub emotion: UserEmotion,
    pub valence: f64,
    pub policy: String,
    pub smoothed: [f64; 6],
}

/// Step logs wrapped with provenance for JSONL emission.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogRow {
    pub user: String,
    pub day: u32,
    pub state: String,
    pub action: String,
    pub policy: String,
    pub r_eng: f64,
    pub r_emo: f64,
    pub r_cause: f64,
    pub total: f64,
    pub emotion: UserEmotion,
}

impl From<&StepLog> for LogRow {
    fn from(l: &StepLog) -> Self {
        Self {
            user: l.user.to_string(),
            day: l.day,
            state: l.state.clone(),
            action: l.action.clone(),
            policy: l.policy.clone(),
            r_eng: l.r_eng,
            r_emo: l.r_emo,
            r_cause: l.r_cause,
            total: l.total,
            emotion: l.emotion,
        }
    }
}

pub fn write_step_logs(path: &Path, logs: &[StepLog]) -> Result<()> {
    let rows: Vec<LogRow> = logs.iter().map(LogRow::from).collect();
    write_jsonl(path, &rows)
}

pub fn read_step_logs(path: &Path) -> Result<Vec<StepLog>> {
    let rows: Vec<LogRow> = read_jsonl(path)?;
    rows.iter()
        .map(|r| {
            let user: u32 = r
                .user
                .trim_start_matches('u')
                .parse()
                .map_err(|_| Error::MalformedArtifact {
                    path: path.display().to_string(),
                    detail: format!("user `{}`", r.user),
                })?;
            Ok(StepLog {
                user: UserId(user),
                day: r.day,
                state: r.state.clone(),
                action: r.action.clone(),
                policy: r.policy.clone(),
                r_eng: r.r_eng,
                r_emo: r.r_emo,
                r_cause: r.r_cause,
                total: r.total,
                emotion: r.emotion,
            })
        })
        .collect()
}

/// Provenance wrapper for JSON parameter dumps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub config_hash: String,
    pub seed: u64,
    pub stage_version: u32,
    pub payload: T,
}

impl<T> Stamped<T> {
    pub fn new(config_hash: &str, seed: u64, payload: T) -> Self {
        Self {
            config_hash: config_hash.to_string(),
            seed,
            stage_version: 1,
            payload,
        }
    }
}

/// Per-run manifest: stage entries with config hash, seed, and input/output
/// file hashes. The skip logic for re-runs keys off these hashes.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub stages: BTreeMap<String, StageEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub version: u32,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn path(dir: &Path) -> PathBuf {
        dir.join("manifest.json")
    }

    pub fn load(dir: &Path) -> Result<Manifest> {
        let path = Self::path(dir);
        if path.exists() {
            read_json(&path)
        } else {
            Ok(Manifest::default())
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&Self::path(dir), self)
    }

    /// A stage is current when its entry matches the live config/seed, its
    /// recorded inputs match the files on disk, and its outputs are intact.
    pub fn stage_is_current(
        &self,
        dir: &Path,
        stage: &str,
        config_hash: &str,
        seed: u64,
    ) -> bool {
        if self.config_hash != config_hash || self.seed != seed {
            return false;
        }
        let Some(entry) = self.stages.get(stage) else {
            return false;
        };
        let check = |files: &BTreeMap<String, String>| {
            files.iter().all(|(name, hash)| {
                let p = dir.join(name);
                p.exists() && sha256_file(&p).map(|h| &h == hash).unwrap_or(false)
            })
        };
        check(&entry.inputs) && check(&entry.outputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn jsonl_roundtrip_preserves_floats_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        let rows: Vec<f64> = vec![0.1, 1.0 / 3.0, 1e-17, 123456.789012345, -0.0];
        write_jsonl(&path, &rows).unwrap();
        let back: Vec<f64> = read_jsonl(&path).unwrap();
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn labels_csv_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        let labels = vec![
            LabelRow {
                user: UserId(3),
                day: 1,
                cluster: 2,
                label: UserEmotion::Stressed,
                override_applied: Some(OverrideKind::StressDrop),
            },
            LabelRow {
                user: UserId(3),
                day: 2,
                cluster: 0,
                label: UserEmotion::Happy,
                override_applied: None,
            },
        ];
        write_labels_csv(&path, &labels).unwrap();
        let back = read_labels_csv(&path).unwrap();
        assert_eq!(labels, back);
    }

    #[test]
    fn manifest_skip_logic_tracks_hashes() {
        let dir = tempdir().unwrap();
        let out = dir.path().join("a.txt");
        write_text(&out, "hello").unwrap();
        let hash = sha256_file(&out).unwrap();
        let mut manifest = Manifest {
            config_hash: "cfg".into(),
            seed: 42,
            stages: BTreeMap::new(),
        };
        manifest.stages.insert(
            "simulate".into(),
            StageEntry {
                version: 1,
                inputs: BTreeMap::new(),
                outputs: BTreeMap::from([("a.txt".to_string(), hash)]),
            },
        );
        assert!(manifest.stage_is_current(dir.path(), "simulate", "cfg", 42));
        assert!(!manifest.stage_is_current(dir.path(), "simulate", "other", 42));
        assert!(!manifest.stage_is_current(dir.path(), "label", "cfg", 42));
        // Output drift invalidates the stage.
        write_text(&out, "changed").unwrap();
        assert!(!manifest.stage_is_current(dir.path(), "simulate", "cfg", 42));
    }

    #[test]
    fn step_log_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("logs.jsonl");
        let logs = vec![StepLog {
            user: UserId(12),
            day: 3,
            state: "happy|s0|t1|news".into(),
            action: "news:calm".into(),
            policy: "agent".into(),
            r_eng: 0.25,
            r_emo: 1.0,
            r_cause: -0.125,
            total: 1.1875,
            emotion: UserEmotion::Excited,
        }];
        write_step_logs(&path, &logs).unwrap();
        let back = read_step_logs(&path).unwrap();
        assert_eq!(logs, back);
    }
}
