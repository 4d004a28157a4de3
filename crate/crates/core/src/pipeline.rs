//! Stage orchestration over on-disk artifacts.
//!
//! Each stage reads its upstream artifacts from the run directory, computes,
//! writes its outputs, and records input/output hashes in the manifest.
//! Re-running a stage whose recorded hashes still match is a no-op unless
//! forced. The run directory is named by config hash and seed, so two runs
//! with identical configuration land on byte-identical artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::affect::{
    fit_kmeans, join_prev_day_labels, label_records, train_classifier,
    EmotionClassifier, UserEmotion,
};
use crate::artifacts::{self, Manifest, Stamped, StageEntry, TrajectoryRow};
use crate::bench::{report_markdown, run_ablation_grid};
use crate::catalog::{generate_catalog, CatalogIndex, VideoItem};
use crate::causal::{build_causal_dataset, discover, extract_all_parents, ParentSet};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::journal::{build_dataset, DailyRecord, FeatureRow, SimStats};
use crate::policy::scorer::build_scorer_dataset;
use crate::policy::{
    evaluate_policy, train_agent, train_scorer, EpochStats, GbdtModel, PolicyMode, PolicyWorld,
    QTable, RewardWeights, ShapingVector,
};
use crate::population::{generate_users, UserProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Simulate,
    Label,
    Discover,
    TrainScorer,
    TrainAgent,
    Evaluate,
    Ablate,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Simulate,
        Stage::Label,
        Stage::Discover,
        Stage::TrainScorer,
        Stage::TrainAgent,
        Stage::Evaluate,
        Stage::Ablate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Label => "label",
            Stage::Discover => "discover",
            Stage::TrainScorer => "train-scorer",
            Stage::TrainAgent => "train-agent",
            Stage::Evaluate => "evaluate",
            Stage::Ablate => "ablate",
        }
    }

    /// Input artifacts, each with the stage that produces it.
    fn inputs(self) -> &'static [(&'static str, Stage)] {
        match self {
            Stage::Simulate => &[],
            Stage::Label => &[
                ("records.jsonl", Stage::Simulate),
                ("features.jsonl", Stage::Simulate),
            ],
            Stage::Discover => &[
                ("records.jsonl", Stage::Simulate),
                ("features.jsonl", Stage::Simulate),
                ("labels.csv", Stage::Label),
            ],
            Stage::TrainScorer => &[
                ("records.jsonl", Stage::Simulate),
                ("users.jsonl", Stage::Simulate),
                ("catalog.jsonl", Stage::Simulate),
            ],
            Stage::TrainAgent => &[
                ("users.jsonl", Stage::Simulate),
                ("catalog.jsonl", Stage::Simulate),
                ("sim_meta.json", Stage::Simulate),
                ("classifier.json", Stage::Label),
                ("parents.json", Stage::Discover),
                ("scorer.json", Stage::TrainScorer),
            ],
            Stage::Evaluate => &[
                ("users.jsonl", Stage::Simulate),
                ("catalog.jsonl", Stage::Simulate),
                ("sim_meta.json", Stage::Simulate),
                ("classifier.json", Stage::Label),
                ("parents.json", Stage::Discover),
                ("scorer.json", Stage::TrainScorer),
                ("agent_meta.json", Stage::TrainAgent),
            ],
            Stage::Ablate => &[("metrics.csv", Stage::Evaluate)],
        }
    }

    fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Simulate => &[
                "catalog.csv",
                "catalog.jsonl",
                "users.csv",
                "users.jsonl",
                "records.csv",
                "records.jsonl",
                "features.csv",
                "features.jsonl",
                "sim_meta.json",
            ],
            Stage::Label => &[
                "labels.csv",
                "cluster_model.json",
                "classifier.json",
                "confusion.csv",
                "elbow.csv",
            ],
            Stage::Discover => &["causal_edges.csv", "causal_order.txt", "parents.json"],
            Stage::TrainScorer => &["scorer.json"],
            Stage::TrainAgent => &[
                "qtable.csv",
                "agent_meta.json",
                "epoch_rewards.csv",
                "train_logs.jsonl",
            ],
            Stage::Evaluate => &[
                "eval_logs.jsonl",
                "baseline_logs.jsonl",
                "metrics.csv",
                "trajectories.jsonl",
                "report.md",
            ],
            Stage::Ablate => &["ablation.csv", "report_ablation.md"],
        }
    }
}

/// Run directory for a configuration: `<output_dir>/<config-hash>-seed<seed>`.
pub fn run_dir(cfg: &RunConfig) -> PathBuf {
    Path::new(&cfg.output_dir).join(format!("{}-seed{}", cfg.hash(), cfg.seed))
}

#[derive(Debug, Clone)]
pub struct StageReport {
    pub stage: Stage,
    pub skipped: bool,
    pub millis: u128,
}

/// Run one stage, skipping when the manifest shows it is already current.
pub fn run_stage(cfg: &RunConfig, stage: Stage, force: bool) -> Result<StageReport> {
    cfg.validate()?;
    let dir = run_dir(cfg);
    std::fs::create_dir_all(&dir)?;
    let config_path = dir.join("config.toml");
    if !config_path.exists() {
        artifacts::write_text(&config_path, &cfg.to_toml())?;
    }

    let hash = cfg.hash();
    let mut manifest = Manifest::load(&dir)?;
    if manifest.config_hash != hash || manifest.seed != cfg.seed {
        manifest = Manifest {
            config_hash: hash.clone(),
            seed: cfg.seed,
            stages: Default::default(),
        };
    }

    if !force && manifest.stage_is_current(&dir, stage.name(), &hash, cfg.seed) {
        return Ok(StageReport {
            stage,
            skipped: true,
            millis: 0,
        });
    }

    for (file, producer) in stage.inputs() {
        if !dir.join(file).exists() {
            return Err(Error::MissingArtifact {
                stage: stage.name().to_string(),
                missing: producer.name().to_string(),
            });
        }
    }

    let start = Instant::now();
    match stage {
        Stage::Simulate => stage_simulate(cfg, &dir)?,
        Stage::Label => stage_label(cfg, &dir)?,
        Stage::Discover => stage_discover(cfg, &dir)?,
        Stage::TrainScorer => stage_train_scorer(cfg, &dir)?,
        Stage::TrainAgent => stage_train_agent(cfg, &dir)?,
        Stage::Evaluate => stage_evaluate(cfg, &dir)?,
        Stage::Ablate => stage_ablate(cfg, &dir)?,
    }
    let millis = start.elapsed().as_millis();

    let mut entry = StageEntry {
        version: 1,
        inputs: Default::default(),
        outputs: Default::default(),
    };
    for (file, _) in stage.inputs() {
        entry
            .inputs
            .insert(file.to_string(), artifacts::sha256_file(&dir.join(file))?);
    }
    for file in stage.outputs() {
        entry
            .outputs
            .insert(file.to_string(), artifacts::sha256_file(&dir.join(file))?);
    }
    manifest.stages.insert(stage.name().to_string(), entry);
    manifest.save(&dir)?;

    Ok(StageReport {
        stage,
        skipped: false,
        millis,
    })
}

/// Run every stage in order.
pub fn run_all(cfg: &RunConfig, force: bool) -> Result<Vec<StageReport>> {
    Stage::ALL
        .iter()
        .map(|&stage| run_stage(cfg, stage, force))
        .collect()
}

fn stage_simulate(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let users = generate_users(&cfg.population, cfg.seed)?;
    let catalog = generate_catalog(&cfg.catalog, cfg.seed)?;
    let index = CatalogIndex::new(catalog)?;
    let ds = build_dataset(&users, &index, &cfg.population, &cfg.journal, cfg.seed)?;

    artifacts::write_catalog_csv(&dir.join("catalog.csv"), &index.items)?;
    artifacts::write_jsonl(&dir.join("catalog.jsonl"), &index.items)?;
    artifacts::write_users_csv(&dir.join("users.csv"), &users)?;
    artifacts::write_jsonl(&dir.join("users.jsonl"), &users)?;
    artifacts::write_records_csv(&dir.join("records.csv"), &ds.records)?;
    artifacts::write_jsonl(&dir.join("records.jsonl"), &ds.records)?;
    artifacts::write_features_csv(&dir.join("features.csv"), &ds.features)?;
    artifacts::write_jsonl(&dir.join("features.jsonl"), &ds.features)?;
    artifacts::write_json(
        &dir.join("sim_meta.json"),
        &Stamped::new(&cfg.hash(), cfg.seed, ds.stats),
    )?;
    Ok(())
}

fn stage_label(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let records: Vec<DailyRecord> = artifacts::read_jsonl(&dir.join("records.jsonl"))?;
    let features: Vec<FeatureRow> = artifacts::read_jsonl(&dir.join("features.jsonl"))?;

    let cluster = fit_kmeans(&features, &cfg.affect, cfg.seed)?;
    let labels = label_records(&records, &features, &cluster, &cfg.affect);
    let joined = join_prev_day_labels(&features, &labels);
    let emotions: Vec<UserEmotion> = labels.iter().map(|l| l.label).collect();
    let report = train_classifier(&joined, &emotions, &cfg.affect.classifier, cfg.seed)?;

    artifacts::write_labels_csv(&dir.join("labels.csv"), &labels)?;
    artifacts::write_json(
        &dir.join("cluster_model.json"),
        &Stamped::new(&cfg.hash(), cfg.seed, &cluster),
    )?;
    artifacts::write_json(
        &dir.join("classifier.json"),
        &Stamped::new(&cfg.hash(), cfg.seed, &report.classifier),
    )?;
    artifacts::write_confusion_csv(&dir.join("confusion.csv"), &report.confusion)?;
    artifacts::write_elbow_csv(&dir.join("elbow.csv"), &cluster.elbow)?;
    Ok(())
}

fn stage_discover(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let records: Vec<DailyRecord> = artifacts::read_jsonl(&dir.join("records.jsonl"))?;
    let features: Vec<FeatureRow> = artifacts::read_jsonl(&dir.join("features.jsonl"))?;
    let labels = artifacts::read_labels_csv(&dir.join("labels.csv"))?;

    let dataset = build_causal_dataset(&records, &features, &labels, &cfg.causal, cfg.seed)?;
    let graph = discover(&dataset, &cfg.causal)?;
    debug_assert!(crate::causal::validate_dag(&graph));
    let parents = extract_all_parents(&graph, &dataset)?;

    artifacts::write_edges_csv(&dir.join("causal_edges.csv"), &graph)?;
    artifacts::write_causal_order(&dir.join("causal_order.txt"), &graph)?;
    artifacts::write_json(
        &dir.join("parents.json"),
        &Stamped::new(&cfg.hash(), cfg.seed, &parents),
    )?;
    Ok(())
}

fn stage_train_scorer(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let records: Vec<DailyRecord> = artifacts::read_jsonl(&dir.join("records.jsonl"))?;
    let users: Vec<UserProfile> = artifacts::read_jsonl(&dir.join("users.jsonl"))?;
    let catalog: Vec<VideoItem> = artifacts::read_jsonl(&dir.join("catalog.jsonl"))?;
    let index = CatalogIndex::new(catalog)?;

    let data = build_scorer_dataset(&records, &users, &index, &cfg.journal);
    let model = train_scorer(&data, &cfg.policy.scorer, cfg.seed)?;
    artifacts::write_json(
        &dir.join("scorer.json"),
        &Stamped::new(&cfg.hash(), cfg.seed, &model),
    )?;
    Ok(())
}

/// Payload of agent_meta.json: the exact trained table plus per-epoch stats.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentMeta {
    pub table: QTable,
    pub epoch_stats: Vec<EpochStats>,
}

struct LoadedWorld {
    users: Vec<UserProfile>,
    index: CatalogIndex,
    stats: SimStats,
    classifier: EmotionClassifier,
    shaping: ShapingVector,
    scorer: GbdtModel,
}

fn load_world(cfg: &RunConfig, dir: &Path) -> Result<LoadedWorld> {
    let users: Vec<UserProfile> = artifacts::read_jsonl(&dir.join("users.jsonl"))?;
    let catalog: Vec<VideoItem> = artifacts::read_jsonl(&dir.join("catalog.jsonl"))?;
    let index = CatalogIndex::new(catalog)?;
    let stats: Stamped<SimStats> = artifacts::read_json(&dir.join("sim_meta.json"))?;
    let classifier: Stamped<EmotionClassifier> =
        artifacts::read_json(&dir.join("classifier.json"))?;
    let parents: Stamped<Vec<ParentSet>> = artifacts::read_json(&dir.join("parents.json"))?;
    let target = &cfg.policy.shaping_target;
    let parent_set = parents
        .payload
        .iter()
        .find(|p| &p.target == target)
        .ok_or_else(|| Error::UnknownTarget(target.clone()))?;
    let shaping = ShapingVector::from_parent_set(parent_set);
    let scorer: Stamped<GbdtModel> = artifacts::read_json(&dir.join("scorer.json"))?;
    Ok(LoadedWorld {
        users,
        index,
        stats: stats.payload,
        classifier: classifier.payload,
        shaping,
        scorer: scorer.payload,
    })
}

fn stage_train_agent(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let loaded = load_world(cfg, dir)?;
    let world = PolicyWorld {
        users: &loaded.users,
        index: &loaded.index,
        cfg,
        stats: &loaded.stats,
        classifier: &loaded.classifier,
        shaping: &loaded.shaping,
        scorer: &loaded.scorer,
    };
    let weights = RewardWeights::from_config(&cfg.policy.agent);
    let training = train_agent(&world, &weights, cfg.seed)?;

    artifacts::write_qtable_csv(&dir.join("qtable.csv"), &training.table)?;
    artifacts::write_epoch_rewards_csv(&dir.join("epoch_rewards.csv"), &training.epoch_stats)?;
    artifacts::write_step_logs(&dir.join("train_logs.jsonl"), &training.final_epoch_logs)?;
    artifacts::write_json(
        &dir.join("agent_meta.json"),
        &Stamped::new(
            &cfg.hash(),
            cfg.seed,
            AgentMeta {
                table: training.table,
                epoch_stats: training.epoch_stats,
            },
        ),
    )?;
    Ok(())
}

fn stage_evaluate(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let loaded = load_world(cfg, dir)?;
    let agent: Stamped<AgentMeta> = artifacts::read_json(&dir.join("agent_meta.json"))?;
    let world = PolicyWorld {
        users: &loaded.users,
        index: &loaded.index,
        cfg,
        stats: &loaded.stats,
        classifier: &loaded.classifier,
        shaping: &loaded.shaping,
        scorer: &loaded.scorer,
    };
    let weights = RewardWeights::from_config(&cfg.policy.agent);

    let full = evaluate_policy(
        &world,
        Some(&agent.payload.table),
        PolicyMode::Hybrid,
        &weights,
        cfg.seed,
    )?;
    let baseline = evaluate_policy(&world, None, PolicyMode::ScorerOnly, &weights, cfg.seed)?;

    let days = cfg.population.days;
    let metrics = vec![
        crate::bench::compute_metrics(&full.logs, days, &weights, "full", cfg.seed)?,
        crate::bench::compute_metrics(&baseline.logs, days, &weights, "scorer_only", cfg.seed)?,
    ];

    let mut trajectories: Vec<TrajectoryRow> = Vec::with_capacity(full.logs.len());
    for user_chunk in full
        .logs
        .chunks(days as usize)
        .zip(full.probs.chunks(days as usize))
    {
        let (logs, probs) = user_chunk;
        let series: Vec<(u32, [f64; 6])> = logs
            .iter()
            .zip(probs)
            .map(|(l, p)| (l.day, *p))
            .collect();
        let smoothed = crate::affect::trajectory(&series)?;
        for (log, point) in logs.iter().zip(&smoothed) {
            trajectories.push(TrajectoryRow {
                user: log.user,
                day: log.day,
                emotion: log.emotion,
                valence: log.emotion.valence(),
                policy: log.policy.clone(),
                smoothed: point.smoothed,
            });
        }
    }

    artifacts::write_step_logs(&dir.join("eval_logs.jsonl"), &full.logs)?;
    artifacts::write_step_logs(&dir.join("baseline_logs.jsonl"), &baseline.logs)?;
    artifacts::write_metrics_csv(&dir.join("metrics.csv"), &metrics)?;
    artifacts::write_jsonl(&dir.join("trajectories.jsonl"), &trajectories)?;
    artifacts::write_text(
        &dir.join("report.md"),
        &report_markdown(&cfg.hash(), cfg.seed, &metrics, &[]),
    )?;
    Ok(())
}

fn stage_ablate(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let rows = run_ablation_grid(cfg, cfg.seed, cfg.bench.ablation_seeds)?;
    artifacts::write_metrics_csv(&dir.join("ablation.csv"), &rows)?;
    let mut md = String::from("# Ablation grid\n\n");
    md.push_str(&format!(
        "Paired seeds {}..{} over variants full, emotion_off, engagement_off, scorer_only.\n\n",
        cfg.seed,
        cfg.seed + cfg.bench.ablation_seeds - 1
    ));
    md.push_str(&report_markdown(&cfg.hash(), cfg.seed, &[], &rows));
    artifacts::write_text(&dir.join("report_ablation.md"), &md)?;
    Ok(())
}
