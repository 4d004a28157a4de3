//! Gradient-boosted decision trees for watched/skipped prediction.
//!
//! Histogram-binned regression trees on the logistic loss with second-order
//! leaf weights, shrinkage, and early stopping on validation AUC. Training
//! rows are user-video-day tuples built from the offline journal; inference
//! ranks candidate videos by predicted watch probability.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{VideoId, VideoItem};
use crate::config::ScorerConfig;
use crate::error::{Error, Result};
use crate::journal::DailyRecord;
use crate::population::{UserId, UserTier};
use crate::rng;

pub const SCORER_FEATURES: [&str; 26] = [
    "tier_casual",
    "tier_engaged",
    "tier_highly_active",
    "day_of_week",
    "is_weekend",
    "prev_engagement",
    "prev_delta_e",
    "prev_rho",
    "prev_likes",
    "prev_watch_s",
    "prev_scroll_s",
    "trailing_cat_share",
    "video_educational",
    "video_entertainment",
    "video_news",
    "video_inspirational",
    "theme_mental_health",
    "theme_politics",
    "theme_motivation",
    "theme_relationships",
    "duration_s",
    "intensity",
    "virality",
    "engagement_score",
    "valence",
    "is_short",
];

/// Decision-time context for one user-day: what the platform knows before
/// serving content.
#[derive(Debug, Clone, Default)]
pub struct DecisionContext {
    pub tier_idx: usize,
    pub day_of_week: u8,
    pub is_weekend: bool,
    pub prev_engagement: f64,
    pub prev_delta_e: f64,
    pub prev_rho: f64,
    pub prev_likes: f64,
    pub prev_watch_s: f64,
    pub prev_scroll_s: f64,
    /// Share of recent watch time per category.
    pub cat_share: [f64; 4],
}

impl DecisionContext {
    pub fn from_history(
        tier: UserTier,
        day: u32,
        prev: Option<&DailyRecord>,
        trailing_cat_time: &[f64; 4],
    ) -> Self {
        let total: f64 = trailing_cat_time.iter().sum();
        let mut cat_share = [0.0; 4];
        if total > 0.0 {
            for (s, t) in cat_share.iter_mut().zip(trailing_cat_time) {
                *s = t / total;
            }
        }
        let mut ctx = DecisionContext {
            tier_idx: tier.index(),
            day_of_week: crate::journal::day_of_week(day),
            is_weekend: crate::population::is_weekend(day),
            cat_share,
            ..Default::default()
        };
        if let Some(p) = prev {
            ctx.prev_engagement = p.engagement;
            ctx.prev_delta_e = p.delta_e;
            ctx.prev_rho = p.rho;
            ctx.prev_likes = f64::from(p.interactions.likes);
            ctx.prev_watch_s = p.watch_s;
            ctx.prev_scroll_s = p.scroll_s;
        }
        ctx
    }
}

pub fn scorer_features(ctx: &DecisionContext, video: &VideoItem) -> Vec<f64> {
    let mut x = Vec::with_capacity(SCORER_FEATURES.len());
    for t in 0..3 {
        x.push(f64::from(u8::from(ctx.tier_idx == t)));
    }
    x.push(f64::from(ctx.day_of_week));
    x.push(f64::from(u8::from(ctx.is_weekend)));
    x.push(ctx.prev_engagement);
    x.push(ctx.prev_delta_e);
    x.push(ctx.prev_rho);
    x.push(ctx.prev_likes);
    x.push(ctx.prev_watch_s);
    x.push(ctx.prev_scroll_s);
    x.push(ctx.cat_share[video.category.index()]);
    for c in 0..4 {
        x.push(f64::from(u8::from(video.category.index() == c)));
    }
    for (t, theme) in crate::catalog::Theme::ALL.iter().enumerate() {
        let _ = t;
        x.push(f64::from(u8::from(video.theme == *theme)));
    }
    x.push(video.duration_s);
    x.push(f64::from(video.intensity));
    x.push(video.virality);
    x.push(video.engagement_score);
    x.push(video.emotion.valence());
    x.push(f64::from(u8::from(video.duration_s <= 45.0)));
    debug_assert_eq!(x.len(), SCORER_FEATURES.len());
    x
}

/// Flat training set of user-video-day rows.
#[derive(Debug, Default)]
pub struct ScorerDataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl ScorerDataset {
    pub fn push(&mut self, features: Vec<f64>, watched: bool) {
        self.rows.push(features);
        self.labels.push(u8::from(watched));
    }
}

/// Expand the offline journal into user-video-day training rows: one row
/// per assigned (watched) or skipped video with the decision-time context
/// of that day. Records must be sorted by (user, day).
pub fn build_scorer_dataset(
    records: &[DailyRecord],
    users: &[crate::population::UserProfile],
    index: &crate::catalog::CatalogIndex,
    journal: &crate::config::JournalConfig,
) -> ScorerDataset {
    let tier_of = |user: UserId| users[user.0 as usize].tier;
    let mut data = ScorerDataset::default();
    let mut prev: Option<&DailyRecord> = None;
    let mut trailing: Vec<(u32, [f64; 4])> = Vec::new();
    let mut current_user: Option<UserId> = None;
    for rec in records {
        if current_user != Some(rec.user) {
            current_user = Some(rec.user);
            prev = None;
            trailing.clear();
        }
        if !rec.churned {
            let mut sums = [0.0; 4];
            for (_, t) in &trailing {
                for k in 0..4 {
                    sums[k] += t[k];
                }
            }
            let ctx = DecisionContext::from_history(tier_of(rec.user), rec.day, prev, &sums);
            for a in &rec.assigned {
                data.push(scorer_features(&ctx, index.get(a.video)), true);
            }
            for &v in &rec.skipped {
                data.push(scorer_features(&ctx, index.get(v)), false);
            }
            trailing.push((rec.day, rec.category_time_s));
            let keep_from = rec.day.saturating_sub(journal.recency_days);
            trailing.retain(|(d, _)| *d >= keep_from);
            prev = Some(rec);
        } else {
            prev = Some(rec);
        }
    }
    data
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitNode {
    pub feature: usize,
    /// Raw threshold: `value <= threshold` goes left.
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split(SplitNode),
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split(s) => {
                    i = if x[s.feature] <= s.threshold {
                        s.left
                    } else {
                        s.right
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub version: u32,
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
    /// Log-odds prior of the positive class.
    pub base_score: f64,
    pub rounds_trained: usize,
    pub validation_auc: f64,
}

impl GbdtModel {
    pub fn predict_raw(&self, x: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    /// Predicted watch probability, strictly inside (0, 1).
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        crate::population::sigmoid(self.predict_raw(x))
    }
}

/// Rank candidates by descending predicted watch probability; ties break on
/// the smaller video id. Returns the ordered ids and the top video.
pub fn rank_candidates(
    model: &GbdtModel,
    ctx: &DecisionContext,
    candidates: &[&VideoItem],
) -> Result<(Vec<VideoId>, VideoId)> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut scored: Vec<(VideoId, f64)> = candidates
        .iter()
        .map(|v| (v.id, model.predict_proba(&scorer_features(ctx, v))))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let ids: Vec<VideoId> = scored.iter().map(|(id, _)| *id).collect();
    let top = ids[0];
    Ok((ids, top))
}

/// Rank-based AUC with midrank tie handling.
pub fn auc(scores: &[f64], labels: &[u8]) -> f64 {
    assert_eq!(scores.len(), labels.len());
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return 0.5;
    }
    let rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y == 1)
        .map(|(r, _)| r)
        .sum();
    (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg)
}

struct Binned {
    /// Row-major bin ids, n x f.
    bins: Vec<u8>,
    n_features: usize,
    /// Upper raw value of each bin per feature (last bin unbounded).
    edges: Vec<Vec<f64>>,
}

fn build_bins(rows: &[Vec<f64>], train_idx: &[usize], max_bins: usize) -> Binned {
    let f = rows[0].len();
    let mut edges = Vec::with_capacity(f);
    for j in 0..f {
        let mut vals: Vec<f64> = train_idx.iter().map(|&i| rows[i][j]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        let cuts = if vals.len() <= max_bins {
            // One bin per distinct value; edge = the value itself.
            vals
        } else {
            let mut c = Vec::with_capacity(max_bins - 1);
            for b in 1..max_bins {
                let pos = b * (vals.len() - 1) / max_bins;
                c.push(vals[pos]);
            }
            c.dedup();
            c
        };
        edges.push(cuts);
    }
    let mut bins = vec![0u8; rows.len() * f];
    for (i, row) in rows.iter().enumerate() {
        for j in 0..f {
            let cuts = &edges[j];
            // First bin whose edge is >= value.
            let b = cuts.partition_point(|&e| e < row[j]);
            bins[i * f + j] = b.min(255) as u8;
        }
    }
    Binned {
        bins,
        n_features: f,
        edges,
    }
}

/// Train with early stopping on validation AUC. Deterministic under `seed`.
pub fn train_scorer(data: &ScorerDataset, cfg: &ScorerConfig, seed: u64) -> Result<GbdtModel> {
    let n = data.rows.len();
    if n < 10 {
        return Err(Error::Config("too few rows to train the scorer".into()));
    }
    let pos = data.labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 || pos == n {
        return Err(Error::SingleClass);
    }

    let mut r = rng::stream(seed, &[rng::DOMAIN_SCORER]);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = r.random_range(0..=i);
        order.swap(i, j);
    }
    if cfg.max_rows > 0 && order.len() > cfg.max_rows {
        order.truncate(cfg.max_rows);
    }
    let n_holdout = ((order.len() as f64) * cfg.holdout).round() as usize;
    let (val_idx, train_idx) = order.split_at(n_holdout.clamp(1, order.len() - 1));
    let train_pos = train_idx.iter().filter(|&&i| data.labels[i] == 1).count();
    if train_pos == 0 || train_pos == train_idx.len() {
        return Err(Error::SingleClass);
    }

    let binned = build_bins(&data.rows, train_idx, cfg.max_bins.clamp(2, 256));
    let f = binned.n_features;

    let p0 = train_pos as f64 / train_idx.len() as f64;
    let base_score = (p0 / (1.0 - p0)).ln();

    let mut f_train: Vec<f64> = vec![base_score; train_idx.len()];
    let mut f_val: Vec<f64> = vec![base_score; val_idx.len()];
    let val_labels: Vec<u8> = val_idx.iter().map(|&i| data.labels[i]).collect();

    let mut trees: Vec<Tree> = Vec::new();
    let mut best_auc = 0.0_f64;
    let mut best_round = 0usize;
    let mut stale = 0usize;

    for round in 0..cfg.max_rounds {
        let mut grad = vec![0.0; train_idx.len()];
        let mut hess = vec![0.0; train_idx.len()];
        for (k, &i) in train_idx.iter().enumerate() {
            let p = crate::population::sigmoid(f_train[k]);
            grad[k] = p - f64::from(data.labels[i]);
            hess[k] = (p * (1.0 - p)).max(1e-12);
        }
        let tree = grow_tree(&binned, train_idx, &grad, &hess, cfg, f);
        for (k, &i) in train_idx.iter().enumerate() {
            f_train[k] += tree.predict(&data.rows[i]);
        }
        for (k, &i) in val_idx.iter().enumerate() {
            f_val[k] += tree.predict(&data.rows[i]);
        }
        trees.push(tree);

        let val_auc = auc(&f_val, &val_labels);
        if val_auc > best_auc + 1e-9 {
            best_auc = val_auc;
            best_round = round;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    trees.truncate(best_round + 1);
    Ok(GbdtModel {
        version: 1,
        feature_names: SCORER_FEATURES.iter().map(|s| s.to_string()).collect(),
        trees,
        base_score,
        rounds_trained: best_round + 1,
        validation_auc: best_auc,
    })
}

struct NodeTask {
    node: usize,
    rows: Vec<u32>,
    depth: usize,
}

fn grow_tree(
    binned: &Binned,
    train_idx: &[usize],
    grad: &[f64],
    hess: &[f64],
    cfg: &ScorerConfig,
    f: usize,
) -> Tree {
    let mut nodes: Vec<Node> = vec![Node::Leaf { value: 0.0 }];
    let root_rows: Vec<u32> = (0..train_idx.len() as u32).collect();
    let mut queue = vec![NodeTask {
        node: 0,
        rows: root_rows,
        depth: 0,
    }];

    while let Some(task) = queue.pop() {
        let (g_sum, h_sum) = task.rows.iter().fold((0.0, 0.0), |(g, h), &k| {
            (g + grad[k as usize], h + hess[k as usize])
        });
        let leaf_value = -cfg.learning_rate * g_sum / (h_sum + cfg.l2);
        if task.depth >= cfg.max_depth || task.rows.len() < 2 * cfg.min_child_rows {
            nodes[task.node] = Node::Leaf { value: leaf_value };
            continue;
        }

        let parent_score = g_sum * g_sum / (h_sum + cfg.l2);
        let mut best: Option<(f64, usize, u8)> = None; // gain, feature, bin
        for feat in 0..f {
            let n_bins = binned.edges[feat].len() + 1;
            if n_bins < 2 {
                continue;
            }
            let mut hist_g = vec![0.0; n_bins];
            let mut hist_h = vec![0.0; n_bins];
            let mut hist_c = vec![0u32; n_bins];
            for &k in &task.rows {
                let i = train_idx[k as usize];
                let b = binned.bins[i * f + feat] as usize;
                hist_g[b] += grad[k as usize];
                hist_h[b] += hess[k as usize];
                hist_c[b] += 1;
            }
            let mut gl = 0.0;
            let mut hl = 0.0;
            let mut cl = 0u32;
            for b in 0..n_bins - 1 {
                gl += hist_g[b];
                hl += hist_h[b];
                cl += hist_c[b];
                let cr = task.rows.len() as u32 - cl;
                if (cl as usize) < cfg.min_child_rows || (cr as usize) < cfg.min_child_rows {
                    continue;
                }
                let gr = g_sum - gl;
                let hr = h_sum - hl;
                let gain =
                    gl * gl / (hl + cfg.l2) + gr * gr / (hr + cfg.l2) - parent_score;
                if gain > 1e-12 && best.is_none_or(|(bg, _, _)| gain > bg) {
                    best = Some((gain, feat, b as u8));
                }
            }
        }

        match best {
            None => nodes[task.node] = Node::Leaf { value: leaf_value },
            Some((_, feat, bin)) => {
                let threshold = binned.edges[feat][bin as usize];
                let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
                    task.rows.iter().partition(|&&k| {
                        let i = train_idx[k as usize];
                        binned.bins[i * f + feat] <= bin
                    });
                let left = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                let right = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[task.node] = Node::Split(SplitNode {
                    feature: feat,
                    threshold,
                    left,
                    right,
                });
                queue.push(NodeTask {
                    node: left,
                    rows: left_rows,
                    depth: task.depth + 1,
                });
                queue.push(NodeTask {
                    node: right,
                    rows: right_rows,
                    depth: task.depth + 1,
                });
            }
        }
    }
    Tree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_rows(n: usize, seed: u64) -> ScorerDataset {
        let mut r = rng::stream(seed, &[rng::DOMAIN_SCORER, 1]);
        let mut data = ScorerDataset::default();
        for _ in 0..n {
            let x0: f64 = r.random::<f64>();
            let x1: f64 = r.random::<f64>();
            let mut row = vec![0.0; SCORER_FEATURES.len()];
            row[0] = x0;
            row[1] = x1;
            data.push(row, x0 > 0.5);
        }
        data
    }

    fn fast_cfg() -> ScorerConfig {
        ScorerConfig {
            max_rounds: 40,
            min_child_rows: 5,
            max_rows: 0,
            ..ScorerConfig::default()
        }
    }

    #[test]
    fn separable_data_reaches_perfect_auc() {
        let data = toy_rows(2000, 1);
        let model = train_scorer(&data, &fast_cfg(), 7).unwrap();
        assert!(
            model.validation_auc > 0.999,
            "auc {}",
            model.validation_auc
        );
    }

    #[test]
    fn shuffled_labels_give_chance_auc() {
        let mut data = toy_rows(4000, 2);
        // Decouple labels from features deterministically.
        let mut r = rng::stream(3, &[rng::DOMAIN_SCORER, 2]);
        for i in (1..data.labels.len()).rev() {
            let j = r.random_range(0..=i);
            data.labels.swap(i, j);
        }
        let model = train_scorer(&data, &fast_cfg(), 7).unwrap();
        assert!(
            (model.validation_auc - 0.5).abs() < 0.05,
            "auc {}",
            model.validation_auc
        );
    }

    #[test]
    fn single_class_data_is_rejected() {
        let mut data = ScorerDataset::default();
        for _ in 0..100 {
            data.push(vec![0.0; SCORER_FEATURES.len()], true);
        }
        assert!(matches!(
            train_scorer(&data, &fast_cfg(), 7),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn auc_handles_ties_and_perfect_ranking() {
        assert_eq!(auc(&[1.0, 2.0, 3.0, 4.0], &[0, 0, 1, 1]), 1.0);
        assert_eq!(auc(&[4.0, 3.0, 2.0, 1.0], &[0, 0, 1, 1]), 0.0);
        assert_eq!(auc(&[1.0, 1.0, 1.0, 1.0], &[0, 1, 0, 1]), 0.5);
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy_rows(1500, 4);
        let a = train_scorer(&data, &fast_cfg(), 9).unwrap();
        let b = train_scorer(&data, &fast_cfg(), 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ranking_breaks_ties_by_video_id_and_rejects_empty() {
        let data = toy_rows(800, 5);
        let model = train_scorer(&data, &fast_cfg(), 7).unwrap();
        let ctx = DecisionContext::default();
        let mk = |id: u32| VideoItem {
            id: VideoId(id),
            category: crate::catalog::Category::News,
            theme: crate::catalog::Theme::Politics,
            duration_s: 30.0,
            emotion: crate::catalog::VideoEmotion::Happy,
            intensity: 5,
            virality: 1.0,
            engagement_score: 1.0,
        };
        let (a, b) = (mk(7), mk(3));
        let (order, top) = rank_candidates(&model, &ctx, &[&a, &b]).unwrap();
        // Identical features: the smaller id wins the tie.
        assert_eq!(top, VideoId(3));
        assert_eq!(order, vec![VideoId(3), VideoId(7)]);
        assert!(matches!(
            rank_candidates(&model, &ctx, &[]),
            Err(Error::EmptyCandidates)
        ));
        let single = [&a];
        let (_, top) = rank_candidates(&model, &ctx, &single).unwrap();
        assert_eq!(top, VideoId(7));
    }

    #[test]
    fn dominating_candidate_ranks_first_on_monotone_data() {
        // Monotone toy: watch probability increases in engagement_score.
        let mut r = rng::stream(6, &[rng::DOMAIN_SCORER, 3]);
        let mut data = ScorerDataset::default();
        let score_col = SCORER_FEATURES
            .iter()
            .position(|&n| n == "engagement_score")
            .unwrap();
        for _ in 0..3000 {
            let s: f64 = r.random::<f64>();
            let mut row = vec![0.0; SCORER_FEATURES.len()];
            row[score_col] = s;
            data.push(row, r.random::<f64>() < s);
        }
        let model = train_scorer(&data, &fast_cfg(), 7).unwrap();
        let ctx = DecisionContext::default();
        let mut strong = VideoItem {
            id: VideoId(1),
            category: crate::catalog::Category::News,
            theme: crate::catalog::Theme::Politics,
            duration_s: 30.0,
            emotion: crate::catalog::VideoEmotion::Happy,
            intensity: 5,
            virality: 1.0,
            engagement_score: 0.95,
        };
        let mut weak = strong.clone();
        weak.id = VideoId(2);
        weak.engagement_score = 0.05;
        strong.id = VideoId(9); // higher id must still win on score
        let (_, top) = rank_candidates(&model, &ctx, &[&weak, &strong]).unwrap();
        assert_eq!(top, VideoId(9));
    }
}
