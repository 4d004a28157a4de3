//! Multinomial emotion classifier over the engineered feature rows.
//!
//! A regularized softmax head, optionally behind one tanh hidden layer,
//! trained with cross-entropy. Stands in for a heavier tabular architecture
//! at the same interface: a six-class probability vector per user-day.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::affect::UserEmotion;

use crate::config::ClassifierConfig;
use crate::error::{Error, Result};
use crate::journal::{FeatureRow, N_CONT};

use crate::rng;

pub const N_CLASSES: usize = 6;
/// tier(3) + dominant_category(none+4) + prev_day_emotion(none+6) + day_of_week(7)
pub const N_ONEHOT: usize = 3 + 5 + 7 + 7;
pub const INPUT_DIM: usize = N_CONT + N_ONEHOT;

/// Expand a feature row into the model input vector (pre-standardization).
pub fn input_vector(row: &FeatureRow) -> Vec<f64> {
    let mut x = Vec::with_capacity(INPUT_DIM);
    x.extend_from_slice(&row.continuous);
    let mut tier = [0.0; 3];
    tier[row.tier.index()] = 1.0;
    x.extend_from_slice(&tier);
    let mut cat = [0.0; 5];
    match row.dominant_category {
        None => cat[0] = 1.0,
        Some(c) => cat[1 + c.index()] = 1.0,
    }
    x.extend_from_slice(&cat);
    let mut prev = [0.0; 7];
    match row.prev_day_emotion {
        None => prev[0] = 1.0,
        Some(e) => prev[1 + e.index()] = 1.0,
    }
    x.extend_from_slice(&prev);
    let mut dow = [0.0; 7];
    dow[(row.day_of_week - 1) as usize] = 1.0;
    x.extend_from_slice(&dow);
    debug_assert_eq!(x.len(), INPUT_DIM);
    x
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    /// Row-major weights: rows x cols.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    fn new_seeded(rows: usize, cols: usize, r: &mut ChaCha8Rng) -> Self {
        let scale = (6.0 / (rows + cols) as f64).sqrt();
        let w = (0..rows * cols)
            .map(|_| (r.random::<f64>() * 2.0 - 1.0) * scale)
            .collect();
        Self {
            rows,
            cols,
            w,
            b: vec![0.0; rows],
        }
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.rows {
            let mut acc = self.b[i];
            let row = &self.w[i * self.cols..(i + 1) * self.cols];
            for (wj, xj) in row.iter().zip(x) {
                acc += wj * xj;
            }
            out[i] = acc;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionClassifier {
    pub version: u32,
    /// Standardization of the continuous block (one-hot block passes through).
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub hidden: Option<Dense>,
    pub output: Dense,
    pub holdout_accuracy: f64,
    pub confusion: [[u64; N_CLASSES]; N_CLASSES],
}

fn softmax(logits: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum += *l;
    }
    for l in logits.iter_mut() {
        *l /= sum;
    }
}

impl EmotionClassifier {
    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        let mut z = x.to_vec();
        for j in 0..N_CONT {
            if self.stds[j] > 1e-12 {
                z[j] = (z[j] - self.means[j]) / self.stds[j];
            } else {
                z[j] = 0.0;
            }
        }
        z
    }

    /// Probability vector over the six classes plus the argmax label, ties
    /// broken by canonical class order.
    pub fn predict(&self, row: &FeatureRow) -> Result<([f64; N_CLASSES], UserEmotion)> {
        if row.continuous.len() != N_CONT {
            return Err(Error::DimensionMismatch {
                expected: N_CONT,
                got: row.continuous.len(),
            });
        }
        let x = self.standardize(&input_vector(row));
        let mut probs = [0.0; N_CLASSES];
        match &self.hidden {
            Some(h) => {
                let mut hidden = vec![0.0; h.rows];
                h.forward(&x, &mut hidden);
                for v in &mut hidden {
                    *v = v.tanh();
                }
                self.output.forward(&hidden, &mut probs);
            }
            None => self.output.forward(&x, &mut probs),
        }
        softmax(&mut probs);
        let mut best = 0;
        for i in 1..N_CLASSES {
            if probs[i] > probs[best] {
                best = i;
            }
        }
        Ok((probs, UserEmotion::ALL[best]))
    }
}

pub struct TrainReport {
    pub classifier: EmotionClassifier,
    pub holdout_accuracy: f64,
    pub confusion: [[u64; N_CLASSES]; N_CLASSES],
}

/// Train on rows with known labels. The holdout split, initialization, and
/// minibatch order all derive from `seed`.
pub fn train(
    rows: &[FeatureRow],
    labels: &[UserEmotion],
    cfg: &ClassifierConfig,
    seed: u64,
) -> Result<TrainReport> {
    assert_eq!(rows.len(), labels.len());
    let n = rows.len();
    if n < 10 {
        return Err(Error::Config("too few rows to train a classifier".into()));
    }
    let mut r = rng::stream(seed, &[rng::DOMAIN_CLASSIFIER]);

    let mut order: Vec<usize> = (0..n).collect();
    shuffle(&mut order, &mut r);
    let n_holdout = ((n as f64) * cfg.holdout).round() as usize;
    let (test_idx, train_idx) = order.split_at(n_holdout.clamp(1, n - 1));

    if cfg.min_class_rows > 0 {
        let mut counts = [0usize; N_CLASSES];
        for &i in train_idx {
            counts[labels[i].index()] += 1;
        }
        for (c, &count) in counts.iter().enumerate() {
            if count < cfg.min_class_rows {
                return Err(Error::SparseClass {
                    class: UserEmotion::ALL[c].name().to_string(),
                    rows: count,
                    min: cfg.min_class_rows,
                });
            }
        }
    }

    let inputs: Vec<Vec<f64>> = rows.iter().map(input_vector).collect();
    let (means, stds) = continuous_stats(&inputs, train_idx);

    let standardize = |x: &[f64]| -> Vec<f64> {
        let mut z = x.to_vec();
        for j in 0..N_CONT {
            if stds[j] > 1e-12 {
                z[j] = (z[j] - means[j]) / stds[j];
            } else {
                z[j] = 0.0;
            }
        }
        z
    };
    let x_train: Vec<Vec<f64>> = train_idx.iter().map(|&i| standardize(&inputs[i])).collect();
    let y_train: Vec<usize> = train_idx.iter().map(|&i| labels[i].index()).collect();

    let mut hidden = (cfg.hidden_units > 0)
        .then(|| Dense::new_seeded(cfg.hidden_units, INPUT_DIM, &mut r));
    let out_dim = if cfg.hidden_units > 0 {
        cfg.hidden_units
    } else {
        INPUT_DIM
    };
    let mut output = Dense::new_seeded(N_CLASSES, out_dim, &mut r);

    let mut vel_h = hidden.as_ref().map(|h| vec![0.0; h.w.len() + h.rows]);
    let mut vel_o = vec![0.0; output.w.len() + output.rows];
    let momentum = 0.9;

    let mut idx: Vec<usize> = (0..x_train.len()).collect();
    for _epoch in 0..cfg.epochs {
        shuffle(&mut idx, &mut r);
        for chunk in idx.chunks(cfg.batch_size.max(1)) {
            step_minibatch(
                &x_train,
                &y_train,
                chunk,
                hidden.as_mut(),
                &mut output,
                vel_h.as_deref_mut(),
                &mut vel_o,
                cfg.learning_rate,
                momentum,
                cfg.l2,
            );
        }
    }

    let mut model = EmotionClassifier {
        version: 1,
        means,
        stds,
        hidden,
        output,
        holdout_accuracy: 0.0,
        confusion: [[0; N_CLASSES]; N_CLASSES],
    };

    let mut confusion = [[0u64; N_CLASSES]; N_CLASSES];
    let mut correct = 0usize;
    for &i in test_idx {
        let (_, pred) = model.predict(&rows[i])?;
        confusion[labels[i].index()][pred.index()] += 1;
        if pred == labels[i] {
            correct += 1;
        }
    }
    let acc = correct as f64 / test_idx.len() as f64;
    model.holdout_accuracy = acc;
    model.confusion = confusion;
    Ok(TrainReport {
        classifier: model,
        holdout_accuracy: acc,
        confusion,
    })
}

fn continuous_stats(inputs: &[Vec<f64>], idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let n = idx.len() as f64;
    let mut means = vec![0.0; N_CONT];
    for &i in idx {
        for j in 0..N_CONT {
            means[j] += inputs[i][j];
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut stds = vec![0.0; N_CONT];
    for &i in idx {
        for j in 0..N_CONT {
            stds[j] += (inputs[i][j] - means[j]).powi(2);
        }
    }
    for s in &mut stds {
        *s = (*s / n).sqrt();
    }
    (means, stds)
}

fn shuffle(idx: &mut [usize], r: &mut ChaCha8Rng) {
    for i in (1..idx.len()).rev() {
        let j = r.random_range(0..=i);
        idx.swap(i, j);
    }
}

#[allow(clippy::too_many_arguments)]
fn step_minibatch(
    xs: &[Vec<f64>],
    ys: &[usize],
    batch: &[usize],
    mut hidden: Option<&mut Dense>,
    output: &mut Dense,
    mut vel_h: Option<&mut [f64]>,
    vel_o: &mut [f64],
    lr: f64,
    momentum: f64,
    l2: f64,
) {
    let bs = batch.len() as f64;
    let mut grad_o_w = vec![0.0; output.w.len()];
    let mut grad_o_b = vec![0.0; output.rows];
    let (mut grad_h_w, mut grad_h_b) = match hidden.as_ref() {
        Some(h) => (vec![0.0; h.w.len()], vec![0.0; h.rows]),
        None => (Vec::new(), Vec::new()),
    };

    for &i in batch {
        let x = &xs[i];
        let y = ys[i];
        match hidden.as_ref() {
            Some(h) => {
                let mut a = vec![0.0; h.rows];
                h.forward(x, &mut a);
                for v in &mut a {
                    *v = v.tanh();
                }
                let mut logits = vec![0.0; output.rows];
                output.forward(&a, &mut logits);
                softmax(&mut logits);
                logits[y] -= 1.0; // dL/dlogit
                for c in 0..output.rows {
                    let g = logits[c];
                    grad_o_b[c] += g;
                    let row = &mut grad_o_w[c * output.cols..(c + 1) * output.cols];
                    for (gw, aj) in row.iter_mut().zip(&a) {
                        *gw += g * aj;
                    }
                }
                // Backprop through tanh.
                for j in 0..h.rows {
                    let mut up = 0.0;
                    for c in 0..output.rows {
                        up += logits[c] * output.w[c * output.cols + j];
                    }
                    let g = up * (1.0 - a[j] * a[j]);
                    grad_h_b[j] += g;
                    let row = &mut grad_h_w[j * h.cols..(j + 1) * h.cols];
                    for (gw, xj) in row.iter_mut().zip(x) {
                        *gw += g * xj;
                    }
                }
            }
            None => {
                let mut logits = vec![0.0; output.rows];
                output.forward(x, &mut logits);
                softmax(&mut logits);
                logits[y] -= 1.0;
                for c in 0..output.rows {
                    let g = logits[c];
                    grad_o_b[c] += g;
                    let row = &mut grad_o_w[c * output.cols..(c + 1) * output.cols];
                    for (gw, xj) in row.iter_mut().zip(x) {
                        *gw += g * xj;
                    }
                }
            }
        }
    }

    apply_sgd(output, &grad_o_w, &grad_o_b, vel_o, bs, lr, momentum, l2);
    if let (Some(h), Some(v)) = (hidden.as_deref_mut(), vel_h.as_deref_mut()) {
        apply_sgd(h, &grad_h_w, &grad_h_b, v, bs, lr, momentum, l2);
    }
}

#[allow(clippy::too_many_arguments)]
fn apply_sgd(
    layer: &mut Dense,
    grad_w: &[f64],
    grad_b: &[f64],
    vel: &mut [f64],
    batch_size: f64,
    lr: f64,
    momentum: f64,
    l2: f64,
) {
    let nw = layer.w.len();
    for j in 0..nw {
        let g = grad_w[j] / batch_size + l2 * layer.w[j];
        vel[j] = momentum * vel[j] - lr * g;
        layer.w[j] += vel[j];
    }
    for j in 0..layer.rows {
        let g = grad_b[j] / batch_size;
        vel[nw + j] = momentum * vel[nw + j] - lr * g;
        layer.b[j] += vel[nw + j];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Category;
    use crate::journal::day_of_week;
    use crate::population::UserTier;

    fn toy_row(user: u32, day: u32, values: [f64; 3]) -> FeatureRow {
        let mut continuous = vec![0.0; N_CONT];
        continuous[0] = values[0];
        continuous[1] = values[1];
        continuous[8] = values[2];
        FeatureRow {
            user: crate::population::UserId(user),
            day,
            continuous,
            tier: UserTier::Casual,
            dominant_category: Some(Category::News),
            prev_day_emotion: None,
            day_of_week: day_of_week(day),
        }
    }

    /// Six well-separated blobs, one per class, balanced.
    fn blobs(per_class: usize, jitter: f64, seed: u64) -> (Vec<FeatureRow>, Vec<UserEmotion>) {
        let centers = [
            [0.0, 0.0, 10.0],
            [10.0, 0.0, 0.0],
            [0.0, 10.0, 0.0],
            [10.0, 10.0, 10.0],
            [20.0, 0.0, 10.0],
            [0.0, 20.0, 10.0],
        ];
        let mut r = rng::stream(seed, &[rng::DOMAIN_CLASSIFIER, 999]);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for i in 0..per_class {
                let v = [
                    center[0] + jitter * (r.random::<f64>() - 0.5),
                    center[1] + jitter * (r.random::<f64>() - 0.5),
                    center[2] + jitter * (r.random::<f64>() - 0.5),
                ];
                rows.push(toy_row((c * per_class + i) as u32, 1 + (i % 28) as u32, v));
                labels.push(UserEmotion::ALL[c]);
            }
        }
        (rows, labels)
    }

    fn fast_cfg() -> ClassifierConfig {
        ClassifierConfig {
            hidden_units: 0,
            epochs: 120,
            min_class_rows: 5,
            ..ClassifierConfig::default()
        }
    }

    #[test]
    fn separable_classes_reach_perfect_holdout_accuracy() {
        let (rows, labels) = blobs(60, 0.5, 1);
        let report = train(&rows, &labels, &fast_cfg(), 7).unwrap();
        assert_eq!(report.holdout_accuracy, 1.0);
    }

    #[test]
    fn permuted_labels_score_near_chance() {
        // Large enough that holdout sampling noise sits well inside +/-0.05.
        let (rows, mut labels) = blobs(300, 0.5, 2);
        // Deterministic permutation decouples features from labels while
        // keeping the balanced marginals.
        let mut r = rng::stream(3, &[rng::DOMAIN_CLASSIFIER, 7]);
        for i in (1..labels.len()).rev() {
            let j = r.random_range(0..=i);
            labels.swap(i, j);
        }
        let report = train(&rows, &labels, &fast_cfg(), 7).unwrap();
        assert!(
            (report.holdout_accuracy - 1.0 / 6.0).abs() < 0.05,
            "accuracy {}",
            report.holdout_accuracy
        );
    }

    #[test]
    fn probabilities_form_a_simplex() {
        let (rows, labels) = blobs(30, 2.0, 4);
        let report = train(&rows, &labels, &fast_cfg(), 7).unwrap();
        for row in rows.iter().take(50) {
            let (p, _) = report.classifier.predict(row).unwrap();
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
            assert!(p.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn training_rows_of_a_separated_class_get_top_probability() {
        let (rows, labels) = blobs(40, 0.5, 5);
        let report = train(&rows, &labels, &fast_cfg(), 7).unwrap();
        for (row, label) in rows.iter().zip(&labels).take(60) {
            let (p, pred) = report.classifier.predict(row).unwrap();
            assert_eq!(pred, *label);
            assert!(p[label.index()] > 0.5);
        }
    }

    #[test]
    fn column_rescaling_leaves_predictions_unchanged() {
        let (rows, labels) = blobs(40, 1.0, 6);
        let report_a = train(&rows, &labels, &fast_cfg(), 7).unwrap();
        // Scale one continuous column of every row by 1000: internal
        // standardization makes the fitted pipeline invariant.
        let scaled: Vec<FeatureRow> = rows
            .iter()
            .map(|r| {
                let mut r2 = r.clone();
                r2.continuous[0] *= 1000.0;
                r2
            })
            .collect();
        let report_b = train(&scaled, &labels, &fast_cfg(), 7).unwrap();
        for (a, b) in rows.iter().zip(&scaled) {
            let (_, pa) = report_a.classifier.predict(a).unwrap();
            let (_, pb) = report_b.classifier.predict(b).unwrap();
            assert_eq!(pa, pb);
        }
    }

    #[test]
    fn sparse_class_is_rejected() {
        let (rows, labels) = blobs(20, 0.5, 8);
        let mut cfg = fast_cfg();
        cfg.min_class_rows = 1000;
        assert!(matches!(
            train(&rows, &labels, &cfg, 7),
            Err(Error::SparseClass { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let (rows, labels) = blobs(20, 0.5, 9);
        let report = train(&rows, &labels, &fast_cfg(), 7).unwrap();
        let mut bad = rows[0].clone();
        bad.continuous.pop();
        assert!(matches!(
            report.classifier.predict(&bad),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn training_is_deterministic_under_a_seed() {
        let (rows, labels) = blobs(30, 1.0, 10);
        let a = train(&rows, &labels, &fast_cfg(), 7).unwrap();
        let b = train(&rows, &labels, &fast_cfg(), 7).unwrap();
        assert_eq!(a.classifier, b.classifier);
    }
}
