//! Episode runner: drives the day simulator under a recommendation policy,
//! labels each day with the emotion classifier, computes shaped rewards,
//! and (in training mode) updates the Q-table with replay.
//!
//! Training episodes replay a user's full timeline under agent control with
//! Boltzmann exploration; evaluation freezes the Q-table and applies the
//! hybrid switching rule (or the scorer alone) with greedy action choice.

use serde::{Deserialize, Serialize};

use crate::affect::{EmotionClassifier, UserEmotion, N_CLASSES};
use crate::catalog::{CatalogIndex, Category, VideoId};
use crate::causal::causal_feature_value;
use crate::config::RunConfig;
use crate::error::Result;
use crate::journal::{DailyRecord, SimStats, UserSim};
use crate::population::{UserId, UserProfile};
use crate::rng;

use super::agent::{
    boltzmann_select, combine_reward, q_update, QTable, ReplayBuffer, RewardWeights,
    ShapingVector, Transition,
};
use super::scorer::{rank_candidates, DecisionContext, GbdtModel};
use super::{is_vulnerable, ActionKey, PolicyChoice, StateEncoder};

/// Everything a policy run needs from the earlier stages.
pub struct PolicyWorld<'a> {
    pub users: &'a [UserProfile],
    pub index: &'a CatalogIndex,
    pub cfg: &'a RunConfig,
    pub stats: &'a SimStats,
    pub classifier: &'a EmotionClassifier,
    pub shaping: &'a ShapingVector,
    pub scorer: &'a GbdtModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyMode {
    /// Scorer on stable days, agent while vulnerable.
    Hybrid,
    /// Engagement scorer every day (RL disabled).
    ScorerOnly,
}

/// One logged step: the tuple (state, action, reward components, emotion,
/// active policy) for a user-day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub user: UserId,
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub temperature: f64,
    pub steps: usize,
    pub mean_reward: f64,
    pub action_counts: Vec<u64>,
}

impl EpochStats {
    /// Shannon entropy (nats) of the epoch's action distribution.
    pub fn action_entropy(&self) -> f64 {
        let total: u64 = self.action_counts.iter().sum();
        if total == 0 {
            return 0.0;
        }
        self.action_counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / total as f64;
                -p * p.ln()
            })
            .sum()
    }
}

pub struct AgentTraining {
    pub table: QTable,
    pub epoch_stats: Vec<EpochStats>,
    /// Step logs of the final training epoch.
    pub final_epoch_logs: Vec<StepLog>,
}

pub struct EvalOutcome {
    pub logs: Vec<StepLog>,
    /// Per-step class probabilities, aligned with `logs`.
    pub probs: Vec<[f64; N_CLASSES]>,
}

enum Controller<'t> {
    Train {
        table: &'t mut QTable,
        replay: &'t mut ReplayBuffer,
        temperature: f64,
        rng: rand_chacha::ChaCha8Rng,
    },
    Frozen {
        table: Option<&'t QTable>,
    },
}

struct EpisodeResult {
    total_reward: f64,
    steps: usize,
    action_counts: Vec<u64>,
}

/// Train the Q-learning agent over full-control episodes: one episode per
/// user per epoch, Boltzmann exploration with per-epoch temperature decay,
/// one-step updates plus a replayed batch after every episode.
pub fn train_agent(world: &PolicyWorld, weights: &RewardWeights, seed: u64) -> Result<AgentTraining> {
    let agent_cfg = &world.cfg.policy.agent;
    let mut table = QTable::new();
    let mut replay = ReplayBuffer::new(agent_cfg.replay_capacity);
    let mut epoch_stats = Vec::with_capacity(agent_cfg.epochs);
    let mut final_epoch_logs = Vec::new();

    for epoch in 0..agent_cfg.epochs {
        let temperature = agent_cfg.temp_initial * agent_cfg.temp_decay.powi(epoch as i32);
        let mut total_reward = 0.0;
        let mut steps = 0usize;
        let mut action_counts = vec![0u64; super::N_ACTIONS];
        let is_last = epoch + 1 == agent_cfg.epochs;
        let mut logs = Vec::new();

        for profile in world.users {
            let mut controller = Controller::Train {
                table: &mut table,
                replay: &mut replay,
                temperature,
                rng: rng::stream(seed, &[rng::DOMAIN_AGENT, epoch as u64, u64::from(profile.id.0)]),
            };
            let result = run_episode(
                world,
                profile,
                weights,
                seed,
                0xA000 + epoch as u64,
                &mut controller,
                is_last.then_some(&mut logs),
                None,
            )?;
            total_reward += result.total_reward;
            steps += result.steps;
            for (c, n) in action_counts.iter_mut().zip(&result.action_counts) {
                *c += n;
            }
        }

        epoch_stats.push(EpochStats {
            epoch,
            temperature,
            steps,
            mean_reward: if steps > 0 {
                total_reward / steps as f64
            } else {
                0.0
            },
            action_counts,
        });
        if is_last {
            final_epoch_logs = logs;
        }
    }

    Ok(AgentTraining {
        table,
        epoch_stats,
        final_epoch_logs,
    })
}

/// Evaluate a frozen policy over every user's timeline. All draws derive
/// from the shared evaluation domain, so runs with different policies under
/// the same seed stay paired.
pub fn evaluate_policy(
    world: &PolicyWorld,
    table: Option<&QTable>,
    mode: PolicyMode,
    weights: &RewardWeights,
    seed: u64,
) -> Result<EvalOutcome> {
    let mut logs = Vec::new();
    let mut probs = Vec::new();
    for profile in world.users {
        let mut controller = Controller::Frozen {
            table: match mode {
                PolicyMode::Hybrid => table,
                PolicyMode::ScorerOnly => None,
            },
        };
        run_episode(
            world,
            profile,
            weights,
            seed,
            u64::from(rng::DOMAIN_EVAL),
            &mut controller,
            Some(&mut logs),
            Some(&mut probs),
        )?;
    }
    Ok(EvalOutcome { logs, probs })
}

const CHURNED_PROBS: [f64; N_CLASSES] = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0];

#[allow(clippy::too_many_arguments)]
fn run_episode(
    world: &PolicyWorld,
    profile: &UserProfile,
    weights: &RewardWeights,
    seed: u64,
    domain: u64,
    controller: &mut Controller,
    mut logs: Option<&mut Vec<StepLog>>,
    mut probs_out: Option<&mut Vec<[f64; N_CLASSES]>>,
) -> Result<EpisodeResult> {
    let cfg = world.cfg;
    let days = cfg.population.days;
    let agent_cfg = &cfg.policy.agent;
    let encoder = StateEncoder {
        e_tertiles: world.stats.e_tertiles,
    };
    let mut sim = UserSim::new(
        profile,
        world.index,
        &cfg.population,
        &cfg.journal,
        seed,
        domain,
        world.stats.tau,
        true,
    );

    let mut labels: Vec<UserEmotion> = Vec::with_capacity(days as usize);
    let mut prev_record: Option<DailyRecord> = None;
    let mut trailing_cat: Vec<(u32, [f64; 4])> = Vec::new();
    let mut last_category: Option<Category> = None;
    let mut prev_shaping: Option<Vec<f64>> = None;
    let mut pending: Option<(usize, usize, f64)> = None;

    let mut total_reward = 0.0;
    let mut steps = 0usize;
    let mut action_counts = vec![0u64; super::N_ACTIONS];

    for day in 1..=days {
        let prev_engagement = prev_record
            .as_ref()
            .map_or(0.0, |r: &DailyRecord| r.engagement);
        let state = encoder.encode(&labels, prev_engagement, last_category);
        let s_idx = state.index();

        if let Controller::Train { table, replay, .. } = controller {
            if let Some((ps, pa, pr)) = pending.take() {
                q_update(
                    table,
                    ps,
                    pa,
                    pr,
                    Some(s_idx),
                    agent_cfg.learning_rate,
                    agent_cfg.discount,
                );
                table.visits[ps * super::N_ACTIONS + pa] += 1;
                replay.push(Transition {
                    state: ps,
                    action: pa,
                    reward: pr,
                    next_state: Some(s_idx),
                });
            }
        }

        let vulnerable = is_vulnerable(&labels, cfg.policy.vulnerable_after);
        let choice = match controller {
            Controller::Train { .. } => PolicyChoice::Agent,
            Controller::Frozen { table: None } => PolicyChoice::Scorer,
            Controller::Frozen { table: Some(_) } => {
                super::select_policy(&labels, cfg.policy.vulnerable_after)
            }
        };

        let recent = sim.recent_ids(day);
        let (action_key, a_idx, slate) = match choice {
            PolicyChoice::Agent => {
                let a_idx = match controller {
                    Controller::Train {
                        table,
                        temperature,
                        rng,
                        ..
                    } => boltzmann_select(table.row(s_idx), *temperature, rng)?,
                    Controller::Frozen { table: Some(t) } => t.argmax(s_idx),
                    Controller::Frozen { table: None } => unreachable!(),
                };
                let key = ActionKey::from_index(a_idx);
                let slate = agent_slate(world, key, &recent, cfg.policy.slate_size);
                (key, Some(a_idx), slate)
            }
            PolicyChoice::Scorer => {
                let ctx = DecisionContext::from_history(
                    profile.tier,
                    day,
                    prev_record.as_ref(),
                    &trailing_sums(&trailing_cat),
                );
                let (slate, top) = scorer_slate(world, &ctx, &recent, cfg.policy.slate_size)?;
                let top_item = world.index.get(top);
                let key = ActionKey {
                    category: top_item.category,
                    emotion: top_item.emotion,
                };
                (key, None, slate)
            }
        };

        let (record, mut row) = sim.step_day(day, &slate)?;

        row.prev_day_emotion = labels.last().copied();
        let (probs, label) = if record.churned {
            (CHURNED_PROBS, UserEmotion::Churned)
        } else {
            world.classifier.predict(&row)?
        };

        let r_eng = if record.churned {
            0.0
        } else {
            let scale = (cfg.policy.eng_scale_mult * world.stats.tau).max(1e-9);
            (record.engagement / scale).tanh()
        };
        let emotion_improved =
            labels.last().is_some_and(|p| p.is_negative()) && label.is_positive();
        let shaping_now = if record.churned {
            None
        } else {
            Some(shaping_values(world.shaping, &row, labels.last().copied()))
        };
        let r_cause = match (&prev_shaping, &shaping_now) {
            (Some(prev), Some(now)) => world.shaping.causal_reward(now, prev),
            _ => 0.0,
        };
        let breakdown = combine_reward(r_eng, emotion_improved, r_cause, vulnerable, weights);

        if let Some(out) = logs.as_deref_mut() {
            out.push(StepLog {
                user: profile.id,
                day,
                state: state.name(),
                action: action_key.name(),
                policy: choice.name().to_string(),
                r_eng: breakdown.r_eng,
                r_emo: breakdown.r_emo,
                r_cause: breakdown.r_cause,
                total: breakdown.total,
                emotion: label,
            });
        }
        if let Some(out) = probs_out.as_deref_mut() {
            out.push(probs);
        }

        if let Some(a) = a_idx {
            action_counts[a] += 1;
            if matches!(controller, Controller::Train { .. }) {
                pending = Some((s_idx, a, breakdown.total));
            }
        }
        total_reward += breakdown.total;
        steps += 1;

        if !record.churned {
            last_category = Some(action_key.category);
            trailing_cat.push((day, record.category_time_s));
            let keep_from = day.saturating_sub(cfg.journal.recency_days);
            trailing_cat.retain(|(d, _)| *d >= keep_from);
            prev_shaping = shaping_now;
        } else {
            prev_shaping = None;
        }
        labels.push(label);
        prev_record = Some(record);
    }

    if let Controller::Train { table, replay, rng, .. } = controller {
        if let Some((ps, pa, pr)) = pending.take() {
            q_update(
                table,
                ps,
                pa,
                pr,
                None,
                agent_cfg.learning_rate,
                agent_cfg.discount,
            );
            table.visits[ps * super::N_ACTIONS + pa] += 1;
            replay.push(Transition {
                state: ps,
                action: pa,
                reward: pr,
                next_state: None,
            });
        }
        if replay.len() >= agent_cfg.replay_batch {
            let batch = replay.sample(agent_cfg.replay_batch, rng);
            for t in batch {
                q_update(
                    table,
                    t.state,
                    t.action,
                    t.reward,
                    t.next_state,
                    agent_cfg.learning_rate,
                    agent_cfg.discount,
                );
            }
        }
    }

    Ok(EpisodeResult {
        total_reward,
        steps,
        action_counts,
    })
}

fn trailing_sums(window: &[(u32, [f64; 4])]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (_, t) in window {
        for k in 0..4 {
            out[k] += t[k];
        }
    }
    out
}

/// Raw values of the shaping features for today's row.
fn shaping_values(
    shaping: &ShapingVector,
    row: &crate::journal::FeatureRow,
    prev_label: Option<UserEmotion>,
) -> Vec<f64> {
    shaping
        .entries
        .iter()
        .map(|e| causal_feature_value(&e.feature, row, prev_label))
        .collect()
}

/// Concrete slate for an abstract action key: top-engagement videos of the
/// (category, emotion) pool excluding recent repeats, widening to the
/// category pool and then the whole catalog when exhausted.
fn agent_slate(
    world: &PolicyWorld,
    key: ActionKey,
    recent: &[VideoId],
    slate_size: usize,
) -> Vec<VideoId> {
    let index = world.index;
    let pools: [&[usize]; 3] = [
        &index.by_category_emotion[key.category.index()][key.emotion.index()],
        &index.by_category[key.category.index()],
        &index.by_score,
    ];
    let mut slate = Vec::with_capacity(slate_size);
    for pool in pools {
        for &i in pool.iter() {
            let id = index.items[i].id;
            if recent.binary_search(&id).is_ok() || slate.contains(&id) {
                continue;
            }
            slate.push(id);
            if slate.len() == slate_size {
                return slate;
            }
        }
    }
    slate
}

/// Scorer slate: prefilter the catalog by engagement score, rank by
/// predicted watch probability, serve the top of the ranking.
fn scorer_slate(
    world: &PolicyWorld,
    ctx: &DecisionContext,
    recent: &[VideoId],
    slate_size: usize,
) -> Result<(Vec<VideoId>, VideoId)> {
    let index = world.index;
    let mut pool: Vec<&crate::catalog::VideoItem> = Vec::new();
    for &i in &index.by_score {
        let item = &index.items[i];
        if recent.binary_search(&item.id).is_ok() {
            continue;
        }
        pool.push(item);
        if pool.len() >= world.cfg.policy.scorer_pool {
            break;
        }
    }
    if pool.is_empty() {
        for &i in &index.by_score {
            pool.push(&index.items[i]);
            if pool.len() >= world.cfg.policy.scorer_pool {
                break;
            }
        }
    }
    let (ranked, top) = rank_candidates(world.scorer, ctx, &pool)?;
    Ok((ranked.into_iter().take(slate_size).collect(), top))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affect::{fit_kmeans, join_prev_day_labels, label_records, train_classifier};
    use crate::catalog::generate_catalog;
    use crate::causal::{build_causal_dataset, discover, extract_parents};
    use crate::journal::build_dataset;
    use crate::policy::scorer::{build_scorer_dataset, train_scorer};
    use crate::population::generate_users;

    /// A miniature end-to-end world shared by the env tests.
    fn tiny_world() -> (
        RunConfig,
        Vec<UserProfile>,
        CatalogIndex,
        SimStats,
        EmotionClassifier,
        ShapingVector,
        GbdtModel,
    ) {
        let mut cfg = RunConfig::default();
        cfg.population.n_users = 30;
        cfg.catalog.n_videos = 120;
        cfg.affect.classifier.min_class_rows = 0;
        cfg.affect.classifier.epochs = 30;
        cfg.policy.scorer.max_rounds = 30;
        cfg.policy.agent.epochs = 2;
        let users = generate_users(&cfg.population, cfg.seed).unwrap();
        let index = CatalogIndex::new(generate_catalog(&cfg.catalog, cfg.seed).unwrap()).unwrap();
        let ds = build_dataset(&users, &index, &cfg.population, &cfg.journal, cfg.seed).unwrap();
        let model = fit_kmeans(&ds.features, &cfg.affect, cfg.seed).unwrap();
        let labels = label_records(&ds.records, &ds.features, &model, &cfg.affect);
        let joined = join_prev_day_labels(&ds.features, &labels);
        let emos: Vec<UserEmotion> = labels.iter().map(|l| l.label).collect();
        let report = train_classifier(&joined, &emos, &cfg.affect.classifier, cfg.seed).unwrap();
        let causal_ds =
            build_causal_dataset(&ds.records, &ds.features, &labels, &cfg.causal, cfg.seed)
                .unwrap();
        let graph = discover(&causal_ds, &cfg.causal).unwrap();
        let parents = extract_parents(&graph, &causal_ds, "next_day_happy").unwrap();
        let shaping = ShapingVector::from_parent_set(&parents);
        let scorer_data = build_scorer_dataset(&ds.records, &users, &index, &cfg.journal);
        let scorer = train_scorer(&scorer_data, &cfg.policy.scorer, cfg.seed).unwrap();
        (
            cfg,
            users,
            index,
            ds.stats,
            report.classifier,
            shaping,
            scorer,
        )
    }

    #[test]
    fn training_and_evaluation_run_end_to_end() {
        let (cfg, users, index, stats, classifier, shaping, scorer) = tiny_world();
        let world = PolicyWorld {
            users: &users,
            index: &index,
            cfg: &cfg,
            stats: &stats,
            classifier: &classifier,
            shaping: &shaping,
            scorer: &scorer,
        };
        let weights = RewardWeights::from_config(&cfg.policy.agent);
        let training = train_agent(&world, &weights, cfg.seed).unwrap();
        assert_eq!(training.epoch_stats.len(), 2);
        assert_eq!(
            training.final_epoch_logs.len(),
            users.len() * cfg.population.days as usize
        );
        assert!(training.table.q.iter().any(|&q| q != 0.0));
        // Decomposition identity on every logged step.
        for log in &training.final_epoch_logs {
            let reconstructed = weights.eng_weight * log.r_eng
                + weights.alpha_emo * log.r_emo
                + beta_for(log, &weights) * log.r_cause;
            assert!(
                (log.total - reconstructed).abs() < 1e-12,
                "decomposition broke at {log:?}"
            );
        }

        let eval = evaluate_policy(
            &world,
            Some(&training.table),
            PolicyMode::Hybrid,
            &weights,
            cfg.seed,
        )
        .unwrap();
        assert_eq!(eval.logs.len(), users.len() * cfg.population.days as usize);
        assert_eq!(eval.probs.len(), eval.logs.len());

        // Scorer-only evaluation never activates the agent.
        let only = evaluate_policy(&world, None, PolicyMode::ScorerOnly, &weights, cfg.seed)
            .unwrap();
        assert!(only.logs.iter().all(|l| l.policy == "scorer"));

        // Hybrid evaluation activates the agent exactly on vulnerable days.
        let agent_days = eval.logs.iter().filter(|l| l.policy == "agent").count();
        let _ = agent_days; // presence is scenario-dependent; identity checked below
        for logs in eval.logs.chunks(cfg.population.days as usize) {
            let mut labels: Vec<UserEmotion> = Vec::new();
            for log in logs {
                let expect = if is_vulnerable(&labels, cfg.policy.vulnerable_after) {
                    "agent"
                } else {
                    "scorer"
                };
                assert_eq!(log.policy, expect, "day {} of {}", log.day, log.user);
                labels.push(log.emotion);
            }
        }
    }

    fn beta_for(log: &StepLog, w: &RewardWeights) -> f64 {
        // With the default 3-day trigger, vulnerability coincides with
        // streak bucket 2 in the encoded state.
        if log.state.contains("|s2|") {
            w.beta * w.amplification
        } else {
            w.beta
        }
    }

    #[test]
    fn zero_epochs_leaves_the_table_empty() {
        let (mut cfg, users, index, stats, classifier, shaping, scorer) = tiny_world();
        cfg.policy.agent.epochs = 0;
        let world = PolicyWorld {
            users: &users,
            index: &index,
            cfg: &cfg,
            stats: &stats,
            classifier: &classifier,
            shaping: &shaping,
            scorer: &scorer,
        };
        let weights = RewardWeights::from_config(&cfg.policy.agent);
        let training = train_agent(&world, &weights, cfg.seed).unwrap();
        assert!(training.table.q.iter().all(|&q| q == 0.0));
        assert!(training.epoch_stats.is_empty());
        assert!(training.final_epoch_logs.is_empty());
    }

    #[test]
    fn paired_evaluations_share_session_draws() {
        let (cfg, users, index, stats, classifier, shaping, scorer) = tiny_world();
        let world = PolicyWorld {
            users: &users,
            index: &index,
            cfg: &cfg,
            stats: &stats,
            classifier: &classifier,
            shaping: &shaping,
            scorer: &scorer,
        };
        let weights = RewardWeights::from_config(&cfg.policy.agent);
        let a = evaluate_policy(&world, None, PolicyMode::ScorerOnly, &weights, cfg.seed).unwrap();
        let b = evaluate_policy(&world, None, PolicyMode::ScorerOnly, &weights, cfg.seed).unwrap();
        assert_eq!(a.logs, b.logs, "same policy, same seed: identical runs");
    }
}
