//! Lloyd's k-means with k-means++ seeding over standardized rows, plus the
//! chained-init inertia sweep used as the elbow diagnostic.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column standardizer fitted on raw rows. Zero-variance columns are dropped
/// before clustering and recorded by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Indices of retained (non-constant) columns.
    pub kept: Vec<usize>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, |r| r.len());
        let n = rows.len() as f64;
        let mut means = vec![0.0; d];
        for row in rows {
            for (m, x) in means.iter_mut().zip(row) {
                *m += x;
            }
        }
        for m in &mut means {
            *m /= n.max(1.0);
        }
        let mut vars = vec![0.0; d];
        for row in rows {
            for j in 0..d {
                vars[j] += (row[j] - means[j]).powi(2);
            }
        }
        let mut stds = vec![0.0; d];
        let mut kept = Vec::new();
        for j in 0..d {
            stds[j] = (vars[j] / n.max(1.0)).sqrt();
            if stds[j] > 1e-12 {
                kept.push(j);
            }
        }
        Self { means, stds, kept }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        self.kept
            .iter()
            .map(|&j| (row[j] - self.means[j]) / self.stds[j])
            .collect()
    }

    /// The raw all-zero point in standardized coordinates.
    pub fn zero_point(&self) -> Vec<f64> {
        self.kept
            .iter()
            .map(|&j| -self.means[j] / self.stds[j])
            .collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::MAX;
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    (best, best_d)
}

fn count_distinct(rows: &[Vec<f64>]) -> usize {
    let mut keys: Vec<Vec<u64>> = rows
        .iter()
        .map(|r| r.iter().map(|x| x.to_bits()).collect())
        .collect();
    keys.sort();
    keys.dedup();
    keys.len()
}

fn kmeans_pp_init(rows: &[Vec<f64>], k: usize, r: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(rows[r.random_range(0..rows.len())].clone());
    let mut d2: Vec<f64> = rows.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // All points coincide with the chosen centroids; any row works.
            r.random_range(0..rows.len())
        } else {
            let mut target = r.random::<f64>() * total;
            let mut idx = rows.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        };
        centroids.push(rows[next].clone());
        for (i, row) in rows.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(row, centroids.last().unwrap()));
        }
    }
    centroids
}

fn lloyd(
    rows: &[Vec<f64>],
    mut centroids: Vec<Vec<f64>>,
    max_iter: usize,
    tol: f64,
) -> (Vec<Vec<f64>>, Vec<usize>, f64) {
    let k = centroids.len();
    let d = centroids[0].len();
    let mut assignments = vec![0usize; rows.len()];
    for _ in 0..max_iter {
        for (i, row) in rows.iter().enumerate() {
            assignments[i] = nearest(row, &centroids).0;
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (row, &a) in rows.iter().zip(&assignments) {
            counts[a] += 1;
            for j in 0..d {
                sums[a][j] += row[j];
            }
        }
        // Empty clusters grab the point farthest from its current centroid.
        for c in 0..k {
            if counts[c] == 0 {
                let far = rows
                    .iter()
                    .enumerate()
                    .max_by(|(i, p), (j, q)| {
                        let di = sq_dist(p, &centroids[assignments[*i]]);
                        let dj = sq_dist(q, &centroids[assignments[*j]]);
                        di.partial_cmp(&dj).unwrap().then(j.cmp(i))
                    })
                    .map(|(i, _)| i)
                    .unwrap();
                sums[c] = rows[far].clone();
                counts[c] = 1;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            let mut new_c = sums[c].clone();
            for v in &mut new_c {
                *v /= counts[c] as f64;
            }
            shift = shift.max(sq_dist(&new_c, &centroids[c]));
            centroids[c] = new_c;
        }
        if shift.sqrt() < tol {
            break;
        }
    }
    for (i, row) in rows.iter().enumerate() {
        assignments[i] = nearest(row, &centroids).0;
    }
    let inertia = rows
        .iter()
        .zip(&assignments)
        .map(|(row, &a)| sq_dist(row, &centroids[a]))
        .sum();
    (centroids, assignments, inertia)
}

pub struct KmeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
}

/// Best of `n_init` k-means++ runs. Rows must already be standardized.
pub fn fit(
    rows: &[Vec<f64>],
    k: usize,
    max_iter: usize,
    tol: f64,
    r: &mut ChaCha8Rng,
) -> Result<KmeansFit> {
    if k < 1 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    let distinct = count_distinct(rows);
    if distinct < k {
        return Err(Error::TooFewDistinctRows { k, distinct });
    }
    let mut best: Option<KmeansFit> = None;
    for _ in 0..4 {
        let init = kmeans_pp_init(rows, k, r);
        let (centroids, assignments, inertia) = lloyd(rows, init, max_iter, tol);
        if best.as_ref().is_none_or(|b| inertia < b.inertia) {
            best = Some(KmeansFit {
                centroids,
                assignments,
                inertia,
            });
        }
    }
    Ok(best.unwrap())
}

/// Inertia for each k in `[k_min, k_max]`. Each fit is initialized from the
/// previous centroids plus the farthest point, which keeps the curve
/// non-increasing in k.
pub fn elbow_curve(
    rows: &[Vec<f64>],
    k_min: usize,
    k_max: usize,
    max_iter: usize,
    tol: f64,
    r: &mut ChaCha8Rng,
) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    let mut prev: Option<Vec<Vec<f64>>> = None;
    for k in k_min..=k_max.min(count_distinct(rows)) {
        let init = match prev {
            None => {
                let f = fit(rows, k, max_iter, tol, r)?;
                out.push((k, f.inertia));
                prev = Some(f.centroids);
                continue;
            }
            Some(ref centroids) => {
                let far = rows
                    .iter()
                    .max_by(|p, q| {
                        let dp = nearest(p, centroids).1;
                        let dq = nearest(q, centroids).1;
                        dp.partial_cmp(&dq).unwrap()
                    })
                    .unwrap()
                    .clone();
                let mut init = centroids.clone();
                init.push(far);
                init
            }
        };
        let (centroids, _, inertia) = lloyd(rows, init, max_iter, tol);
        out.push((k, inertia));
        prev = Some(centroids);
    }
    Ok(out)
}
