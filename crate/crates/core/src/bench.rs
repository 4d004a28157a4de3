//! Evaluation metrics, the ablation grid, and report assembly.
//!
//! All metrics are pure functions of the step logs, so recomputing them
//! from persisted JSONL reproduces the in-memory values exactly. Ablation
//! variants share the simulation seed; only the reward configuration and
//! the switching rule differ, so metric deltas are attributable to policy.

use serde::{Deserialize, Serialize};

use crate::affect::{
    fit_kmeans, join_prev_day_labels, label_records, train_classifier, UserEmotion,
};
use crate::catalog::{generate_catalog, CatalogIndex};
use crate::causal::{build_causal_dataset, discover, extract_parents};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::journal::build_dataset;
use crate::policy::scorer::build_scorer_dataset;
use crate::policy::{
    evaluate_policy, train_agent, train_scorer, PolicyMode, PolicyWorld, RewardWeights,
    ShapingVector, StepLog,
};
use crate::population::generate_users;
use crate::stats;

/// Per-run aggregate metrics over the evaluation horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub variant: String,
    pub seed: u64,
    pub users: usize,
    /// Mean days until a user first holds non-negative affect for three
    /// consecutive days; users that never recover contribute the horizon.
    pub recovery_time_days: f64,
    /// Mean per-user valence over non-churned days.
    pub mean_valence: f64,
    /// Mean days per user spent in negative dominant emotion.
    pub negative_emotion_days: f64,
    /// Mean per-user standard deviation of the valence-coded daily series.
    pub volatility: f64,
    /// Fraction of users oscillating between high-intensity positive and
    /// negative states more than twice.
    pub bounce_rate: f64,
    /// Mean engagement reward per user-day.
    pub mean_engagement_reward: f64,
    /// Total causal shaping bonus actually paid out.
    pub cumulative_causal_bonus: f64,
}

const HIGH_POS: [UserEmotion; 2] = [UserEmotion::Happy, UserEmotion::Excited];
const HIGH_NEG: [UserEmotion; 2] = [UserEmotion::Stressed, UserEmotion::Frustrated];

fn is_high_pos(e: UserEmotion) -> bool {
    HIGH_POS.contains(&e)
}

fn is_high_neg(e: UserEmotion) -> bool {
    HIGH_NEG.contains(&e)
}

/// First day index after which the user holds neutral-or-positive dominant
/// emotion for at least three consecutive days; the horizon when never.
pub fn recovery_time(emotions: &[UserEmotion]) -> f64 {
    let n = emotions.len();
    if n >= 3 {
        for d in 0..=n - 3 {
            if emotions[d..d + 3].iter().all(|e| e.valence() >= 0.0) {
                return d as f64;
            }
        }
    }
    n as f64
}

/// Transitions between high-intensity positive and high-intensity negative
/// dominant states on consecutive days.
pub fn bounce_events(emotions: &[UserEmotion]) -> usize {
    emotions
        .windows(2)
        .filter(|w| {
            (is_high_pos(w[0]) && is_high_neg(w[1])) || (is_high_neg(w[0]) && is_high_pos(w[1]))
        })
        .count()
}

/// Aggregate the evaluation logs into run metrics. Logs must hold exactly
/// `days` consecutive entries per user, user-major.
pub fn compute_metrics(
    logs: &[StepLog],
    days: u32,
    weights: &RewardWeights,
    variant: &str,
    seed: u64,
) -> Result<RunMetrics> {
    let days_usize = days as usize;
    if days == 0 || logs.len() % days_usize != 0 {
        return Err(Error::Config(format!(
            "incomplete logs: {} entries do not split into {days}-day users",
            logs.len()
        )));
    }
    let n_users = logs.len() / days_usize;
    let mut recovery = 0.0;
    let mut negative_days = 0.0;
    let mut volatility = 0.0;
    let mut bouncers = 0usize;
    let mut valence_user_means = Vec::new();
    let mut r_eng_sum = 0.0;
    let mut causal_bonus = 0.0;

    for chunk in logs.chunks(days_usize) {
        if chunk.iter().zip(1..).any(|(l, d)| l.day != d)
            || chunk.iter().any(|l| l.user != chunk[0].user)
        {
            return Err(Error::Config(
                "logs are not user-major with consecutive days".into(),
            ));
        }
        let emotions: Vec<UserEmotion> = chunk.iter().map(|l| l.emotion).collect();
        recovery += recovery_time(&emotions);
        negative_days += emotions.iter().filter(|e| e.is_negative()).count() as f64;
        let coded: Vec<f64> = emotions.iter().map(|e| e.valence()).collect();
        volatility += stats::std_dev(&coded);
        if bounce_events(&emotions) > 2 {
            bouncers += 1;
        }
        let active: Vec<f64> = emotions
            .iter()
            .filter(|e| **e != UserEmotion::Churned)
            .map(|e| e.valence())
            .collect();
        if !active.is_empty() {
            valence_user_means.push(stats::mean(&active));
        }
        for l in chunk {
            r_eng_sum += l.r_eng;
            // total = w_eng*r_eng + alpha*r_emo + beta_eff*r_cause exactly,
            // so the causal payout falls out of the identity.
            causal_bonus +=
                l.total - weights.eng_weight * l.r_eng - weights.alpha_emo * l.r_emo;
        }
    }

    let nu = n_users as f64;
    Ok(RunMetrics {
        variant: variant.to_string(),
        seed,
        users: n_users,
        recovery_time_days: recovery / nu,
        mean_valence: stats::mean(&valence_user_means),
        negative_emotion_days: negative_days / nu,
        volatility: volatility / nu,
        bounce_rate: bouncers as f64 / nu,
        mean_engagement_reward: r_eng_sum / logs.len() as f64,
        cumulative_causal_bonus: causal_bonus,
    })
}

/// Reward/switching configuration of one ablation variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    /// Hybrid controller with the complete shaped reward.
    Full,
    /// Emotion-transition bonus disabled (alpha_emo = 0).
    EmotionOff,
    /// Engagement term excluded from the total reward.
    EngagementOff,
    /// RL disabled: the engagement scorer serves every day.
    ScorerOnly,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 4] = [
        AblationVariant::Full,
        AblationVariant::EmotionOff,
        AblationVariant::EngagementOff,
        AblationVariant::ScorerOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationVariant::Full => "full",
            AblationVariant::EmotionOff => "emotion_off",
            AblationVariant::EngagementOff => "engagement_off",
            AblationVariant::ScorerOnly => "scorer_only",
        }
    }

    pub fn weights(self, base: RewardWeights) -> RewardWeights {
        match self {
            AblationVariant::Full | AblationVariant::ScorerOnly => base,
            AblationVariant::EmotionOff => RewardWeights {
                alpha_emo: 0.0,
                ..base
            },
            AblationVariant::EngagementOff => RewardWeights {
                eng_weight: 0.0,
                ..base
            },
        }
    }

    pub fn uses_agent(self) -> bool {
        self != AblationVariant::ScorerOnly
    }
}

/// Everything one seed's ablation run produces.
pub struct AblationRun {
    pub metrics: Vec<RunMetrics>,
}

/// Build the full pipeline in memory for `seed` and evaluate every variant
/// under that shared seed.
pub fn run_ablation(cfg: &RunConfig, seed: u64) -> Result<AblationRun> {
    let users = generate_users(&cfg.population, seed)?;
    let index = CatalogIndex::new(generate_catalog(&cfg.catalog, seed)?)?;
    let ds = build_dataset(&users, &index, &cfg.population, &cfg.journal, seed)?;
    let cluster = fit_kmeans(&ds.features, &cfg.affect, seed)?;
    let labels = label_records(&ds.records, &ds.features, &cluster, &cfg.affect);
    let joined = join_prev_day_labels(&ds.features, &labels);
    let emotions: Vec<UserEmotion> = labels.iter().map(|l| l.label).collect();
    let classifier = train_classifier(&joined, &emotions, &cfg.affect.classifier, seed)?;
    let causal_ds = build_causal_dataset(&ds.records, &ds.features, &labels, &cfg.causal, seed)?;
    let graph = discover(&causal_ds, &cfg.causal)?;
    let parents = extract_parents(&graph, &causal_ds, &cfg.policy.shaping_target)?;
    let shaping = ShapingVector::from_parent_set(&parents);
    let scorer_data = build_scorer_dataset(&ds.records, &users, &index, &cfg.journal);
    let scorer = train_scorer(&scorer_data, &cfg.policy.scorer, seed)?;

    let world = PolicyWorld {
        users: &users,
        index: &index,
        cfg,
        stats: &ds.stats,
        classifier: &classifier.classifier,
        shaping: &shaping,
        scorer: &scorer,
    };
    let base = RewardWeights::from_config(&cfg.policy.agent);

    let mut metrics = Vec::with_capacity(AblationVariant::ALL.len());
    for variant in AblationVariant::ALL {
        let weights = variant.weights(base);
        let outcome = if variant.uses_agent() {
            let training = train_agent(&world, &weights, seed)?;
            evaluate_policy(
                &world,
                Some(&training.table),
                PolicyMode::Hybrid,
                &weights,
                seed,
            )?
        } else {
            evaluate_policy(&world, None, PolicyMode::ScorerOnly, &weights, seed)?
        };
        metrics.push(compute_metrics(
            &outcome.logs,
            cfg.population.days,
            &weights,
            variant.name(),
            seed,
        )?);
    }
    Ok(AblationRun { metrics })
}

/// The paired-seed grid: seeds `base_seed .. base_seed + n`.
pub fn run_ablation_grid(cfg: &RunConfig, base_seed: u64, n_seeds: u64) -> Result<Vec<RunMetrics>> {
    let mut rows = Vec::new();
    for i in 0..n_seeds {
        let run = run_ablation(cfg, base_seed + i)?;
        rows.extend(run.metrics);
    }
    Ok(rows)
}

/// Markdown report over the evaluation and ablation outputs.
pub fn report_markdown(
    cfg_hash: &str,
    seed: u64,
    eval_metrics: &[RunMetrics],
    ablation: &[RunMetrics],
) -> String {
    let mut out = String::new();
    out.push_str("# Run report\n\n");
    out.push_str(&format!("- config: `{cfg_hash}`\n- seed: {seed}\n\n"));
    out.push_str("## Policy evaluation\n\n");
    push_metric_table(&mut out, eval_metrics);
    if !ablation.is_empty() {
        out.push_str("\n## Ablation grid (paired seeds)\n\n");
        push_metric_table(&mut out, ablation);
    }
    out
}

fn push_metric_table(out: &mut String, rows: &[RunMetrics]) {
    out.push_str("| variant | seed | users | recovery_days | mean_valence | negative_days | volatility | bounce_rate | mean_r_eng | causal_bonus |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|---|\n");
    for m in rows {
        out.push_str(&format!(
            "| {} | {} | {} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} |\n",
            m.variant,
            m.seed,
            m.users,
            m.recovery_time_days,
            m.mean_valence,
            m.negative_emotion_days,
            m.volatility,
            m.bounce_rate,
            m.mean_engagement_reward,
            m.cumulative_causal_bonus,
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::UserId;
    use UserEmotion::*;

    fn logs_for(emotions: &[UserEmotion]) -> Vec<StepLog> {
        emotions
            .iter()
            .enumerate()
            .map(|(i, &e)| StepLog {
                user: UserId(0),
                day: (i + 1) as u32,
                state: "s".into(),
                action: "a".into(),
                policy: "scorer".into(),
                r_eng: 0.5,
                r_emo: 0.0,
                r_cause: 0.0,
                total: 0.5,
                emotion: e,
            })
            .collect()
    }

    fn w() -> RewardWeights {
        RewardWeights {
            eng_weight: 1.0,
            eta: 1.0,
            alpha_emo: 1.0,
            beta: 0.5,
            amplification: 2.0,
        }
    }

    #[test]
    fn all_happy_user_has_clean_metrics() {
        let logs = logs_for(&[Happy; 30]);
        let m = compute_metrics(&logs, 30, &w(), "full", 1).unwrap();
        assert_eq!(m.negative_emotion_days, 0.0);
        assert_eq!(m.volatility, 0.0);
        assert_eq!(m.bounce_rate, 0.0);
        assert_eq!(m.recovery_time_days, 0.0);
        assert_eq!(m.mean_valence, 1.0);
    }

    #[test]
    fn daily_alternation_counts_as_a_bouncer() {
        let mut emotions = Vec::new();
        for d in 0..30 {
            emotions.push(if d % 2 == 0 { Excited } else { Stressed });
        }
        assert_eq!(bounce_events(&emotions), 29);
        let m = compute_metrics(&logs_for(&emotions), 30, &w(), "full", 1).unwrap();
        assert_eq!(m.bounce_rate, 1.0);
    }

    #[test]
    fn disappointed_is_not_a_high_intensity_bounce_state() {
        let emotions = [Excited, Disappointed, Excited, Disappointed, Excited];
        assert_eq!(bounce_events(&emotions), 0);
    }

    #[test]
    fn recovery_time_matches_definition() {
        let mut emotions = vec![Stressed; 5];
        emotions.extend([Happy; 25]);
        assert_eq!(recovery_time(&emotions), 5.0);
        assert_eq!(recovery_time(&[Happy; 30]), 0.0);
        // Never recovering contributes the horizon.
        assert_eq!(recovery_time(&[Stressed; 30]), 30.0);
        // Churned days count as neutral holds.
        assert_eq!(recovery_time(&[Stressed, Churned, Churned, Churned]), 1.0);
    }

    #[test]
    fn churned_days_are_excluded_from_valence() {
        let mut emotions = vec![Happy; 10];
        emotions.extend([Churned; 20]);
        let m = compute_metrics(&logs_for(&emotions), 30, &w(), "full", 1).unwrap();
        assert_eq!(m.mean_valence, 1.0);
    }

    #[test]
    fn incomplete_logs_are_rejected() {
        let logs = logs_for(&[Happy; 29]);
        assert!(compute_metrics(&logs, 30, &w(), "full", 1).is_err());
    }

    #[test]
    fn causal_bonus_falls_out_of_the_decomposition() {
        let mut logs = logs_for(&[Happy; 30]);
        for l in &mut logs {
            l.r_cause = 0.2;
            l.total = 1.0 * l.r_eng + 1.0 * l.r_emo + 0.5 * l.r_cause;
        }
        let m = compute_metrics(&logs, 30, &w(), "full", 1).unwrap();
        assert!((m.cumulative_causal_bonus - 30.0 * 0.1).abs() < 1e-9);
        assert!((m.mean_engagement_reward - 0.5).abs() < 1e-12);
    }

    #[test]
    fn variant_weight_overrides() {
        let base = w();
        assert_eq!(AblationVariant::Full.weights(base), base);
        assert_eq!(AblationVariant::EmotionOff.weights(base).alpha_emo, 0.0);
        assert_eq!(AblationVariant::EngagementOff.weights(base).eng_weight, 0.0);
        assert!(!AblationVariant::ScorerOnly.uses_agent());
        // Overrides never touch the simulation seed, only weights.
        assert_eq!(AblationVariant::EmotionOff.weights(base).beta, base.beta);
    }

    #[test]
    fn report_renders_deterministically() {
        let m = RunMetrics {
            variant: "full".into(),
            seed: 1,
            users: 10,
            recovery_time_days: 2.0,
            mean_valence: 0.1,
            negative_emotion_days: 3.0,
            volatility: 0.5,
            bounce_rate: 0.2,
            mean_engagement_reward: 0.4,
            cumulative_causal_bonus: 1.5,
        };
        let a = report_markdown("abc", 1, &[m.clone()], &[]);
        let b = report_markdown("abc", 1, &[m], &[]);
        assert_eq!(a, b);
        assert!(a.contains("| full |"));
    }
}
