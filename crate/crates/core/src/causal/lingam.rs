//! Linear non-Gaussian DAG discovery.
//!
//! Iterative exogenous-variable selection: at each step, pick the variable
//! most independent of the residuals of regressing the remaining variables
//! on it (pairwise likelihood-ratio measure with a log-cosh maximum-entropy
//! approximation), append it to the causal order, and residualize the rest.
//! The adjacency matrix is then estimated by least squares respecting the
//! order, and small edges are pruned to exactly zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalGraph {
    pub names: Vec<String>,
    /// b[target][source]: effect of `source` on `target`.
    pub b: Vec<Vec<f64>>,
    /// Indices from most exogenous to most endogenous.
    pub causal_order: Vec<usize>,
}

impl CausalGraph {
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let d = self.names.len();
        let mut out = Vec::new();
        for t in 0..d {
            for s in 0..d {
                if self.b[t][s] != 0.0 {
                    out.push((s, t, self.b[t][s]));
                }
            }
        }
        out
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownTarget(name.to_string()))
    }
}

/// True iff permuting rows and columns by the causal order makes the
/// adjacency strictly lower triangular.
pub fn validate_dag(graph: &CausalGraph) -> bool {
    let d = graph.names.len();
    if graph.causal_order.len() != d {
        return false;
    }
    for p in 0..d {
        for q in p..d {
            // An earlier variable never depends on a later (or same) one.
            if graph.b[graph.causal_order[p]][graph.causal_order[q]] != 0.0 {
                return false;
            }
        }
    }
    true
}

/// Differential entropy of a standardized variable via the Hyvarinen
/// maximum-entropy approximation.
fn entropy(u: &[f64]) -> f64 {
    const K1: f64 = 79.047;
    const K2: f64 = 7.4129;
    const GAMMA: f64 = 0.37457;
    let n = u.len() as f64;
    let mut log_cosh = 0.0;
    let mut u_exp = 0.0;
    for &x in u {
        log_cosh += ln_cosh(x);
        u_exp += x * (-x * x / 2.0).exp();
    }
    log_cosh /= n;
    u_exp /= n;
    (1.0 + (2.0 * std::f64::consts::PI).ln()) / 2.0
        - K1 * (log_cosh - GAMMA).powi(2)
        - K2 * u_exp.powi(2)
}

fn ln_cosh(x: f64) -> f64 {
    // ln cosh x = |x| + ln(1 + e^{-2|x|}) - ln 2, stable for large |x|.
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

fn standardized(col: &[f64]) -> Result<Vec<f64>> {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if var <= 1e-24 {
        return Err(Error::SingularRegression("constant column".into()));
    }
    let sd = var.sqrt();
    Ok(col.iter().map(|x| (x - mean) / sd).collect())
}

/// Plain discovery: all variables compete for every position.
pub fn direct_lingam(columns: &[Vec<f64>], names: &[String], prune: f64) -> Result<CausalGraph> {
    direct_lingam_tiered(columns, names, &vec![0; columns.len()], prune)
}

/// Tiered discovery: a variable becomes a candidate only once no variable of
/// a lower tier remains. Used to encode known temporal precedence (day-t
/// features before day-t+1 outcomes); within a tier the ordering is fully
/// data-driven.
pub fn direct_lingam_tiered(
    columns: &[Vec<f64>],
    names: &[String],
    tiers: &[usize],
    prune: f64,
) -> Result<CausalGraph> {
    let d = columns.len();
    assert_eq!(names.len(), d);
    assert_eq!(tiers.len(), d);
    let n = columns.first().map_or(0, |c| c.len());
    if d == 0 || n <= d {
        return Err(Error::Config(format!(
            "discovery needs more samples than variables (n = {n}, d = {d})"
        )));
    }
    for (j, col) in columns.iter().enumerate() {
        if standardized(col).is_err() {
            return Err(Error::SingularRegression(format!(
                "column `{}` is constant",
                names[j]
            )));
        }
    }

    // Centered working copies, residualized in place after each selection.
    let mut work: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / n as f64;
            c.iter().map(|x| x - mean).collect()
        })
        .collect();

    let mut remaining: Vec<usize> = (0..d).collect();
    let mut order: Vec<usize> = Vec::with_capacity(d);
    while !remaining.is_empty() {
        let min_tier = remaining.iter().map(|&j| tiers[j]).min().unwrap();
        let candidates: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&j| tiers[j] == min_tier)
            .collect();
        let chosen = if candidates.len() == 1 {
            candidates[0]
        } else {
            select_exogenous(&work, &remaining, &candidates)?
        };
        order.push(chosen);
        remaining.retain(|&j| j != chosen);
        residualize(&mut work, chosen, &remaining);
    }

    let b = estimate_adjacency(columns, names, &order, prune)?;
    Ok(CausalGraph {
        names: names.to_vec(),
        b,
        causal_order: order,
    })
}

/// Candidate with the least evidence against exogeneity. For each unordered
/// pair the likelihood-ratio statistic compares the two regression
/// directions; negative evidence accumulates as min(0, D)^2.
fn select_exogenous(work: &[Vec<f64>], remaining: &[usize], candidates: &[usize]) -> Result<usize> {
    let z: Vec<Option<Vec<f64>>> = work
        .iter()
        .enumerate()
        .map(|(j, col)| {
            if remaining.contains(&j) {
                standardized(col).ok()
            } else {
                None
            }
        })
        .collect();
    let h: Vec<f64> = z
        .iter()
        .map(|c| c.as_ref().map_or(0.0, |v| entropy(v)))
        .collect();

    let mut violation: Vec<(usize, f64)> = candidates.iter().map(|&j| (j, 0.0)).collect();
    for (ci, &i) in candidates.iter().enumerate() {
        let zi = z[i].as_ref().unwrap();
        for &j in remaining {
            if j == i {
                continue;
            }
            // Skip pairs already accumulated from the candidate loop when
            // both ends are candidates and j < i.
            if candidates.contains(&j) && j < i {
                continue;
            }
            let zj = z[j].as_ref().unwrap();
            let rho: f64 = zi.iter().zip(zj).map(|(a, b)| a * b).sum::<f64>() / zi.len() as f64;
            let ri_j = residual_standardized(zi, zj, rho)?;
            let rj_i = residual_standardized(zj, zi, rho)?;
            // D > 0 favors i -> j.
            let d_ij = (h[j] + entropy(&ri_j)) - (h[i] + entropy(&rj_i));
            violation[ci].1 += d_ij.min(0.0).powi(2);
            if let Some(cj) = candidates.iter().position(|&c| c == j) {
                violation[cj].1 += (-d_ij).min(0.0).powi(2);
            }
        }
    }
    let mut best = violation[0];
    for &(j, v) in &violation[1..] {
        if v < best.1 || (v == best.1 && j < best.0) {
            best = (j, v);
        }
    }
    Ok(best.0)
}

fn residual_standardized(target: &[f64], on: &[f64], rho: f64) -> Result<Vec<f64>> {
    let res: Vec<f64> = target
        .iter()
        .zip(on)
        .map(|(t, o)| t - rho * o)
        .collect();
    standardized(&res)
}

fn residualize(work: &mut [Vec<f64>], chosen: usize, remaining: &[usize]) {
    let n = work[chosen].len() as f64;
    let var_m: f64 = work[chosen].iter().map(|x| x * x).sum::<f64>() / n;
    if var_m <= 1e-24 {
        return;
    }
    let chosen_col = work[chosen].clone();
    for &j in remaining {
        let cov: f64 = work[j]
            .iter()
            .zip(&chosen_col)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n;
        let coef = cov / var_m;
        for (x, m) in work[j].iter_mut().zip(&chosen_col) {
            *x -= coef * m;
        }
    }
}

/// Least-squares adjacency respecting the order; |weight| < prune becomes 0.
fn estimate_adjacency(
    columns: &[Vec<f64>],
    names: &[String],
    order: &[usize],
    prune: f64,
) -> Result<Vec<Vec<f64>>> {
    let d = columns.len();
    let n = columns[0].len() as f64;
    let centered: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / n;
            c.iter().map(|x| x - mean).collect()
        })
        .collect();
    let mut b = vec![vec![0.0; d]; d];
    for pos in 1..d {
        let target = order[pos];
        let preds = &order[..pos];
        let weights = ols(&centered, target, preds, names)?;
        for (w, &p) in weights.iter().zip(preds) {
            b[target][p] = if w.abs() < prune { 0.0 } else { *w };
        }
    }
    Ok(b)
}

/// Ordinary least squares by Cholesky on the normal equations; a pivot
/// collapse reports the offending columns.
fn ols(centered: &[Vec<f64>], target: usize, preds: &[usize], names: &[String]) -> Result<Vec<f64>> {
    let p = preds.len();
    let n = centered[0].len() as f64;
    let mut gram = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for a in 0..p {
        for bij in a..p {
            let dot: f64 = centered[preds[a]]
                .iter()
                .zip(&centered[preds[bij]])
                .map(|(x, y)| x * y)
                .sum::<f64>()
                / n;
            gram[a][bij] = dot;
            gram[bij][a] = dot;
        }
        rhs[a] = centered[preds[a]]
            .iter()
            .zip(&centered[target])
            .map(|(x, y)| x * y)
            .sum::<f64>()
            / n;
    }
    // Cholesky decomposition of the Gram matrix.
    let mut l = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..=i {
            let mut sum = gram[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 1e-12 {
                    return Err(Error::SingularRegression(format!(
                        "`{}` is collinear with earlier predictors while regressing `{}`",
                        names[preds[i]], names[target]
                    )));
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    // Forward and backward substitution.
    let mut y = vec![0.0; p];
    for i in 0..p {
        let mut sum = rhs[i];
        for k in 0..i {
            sum -= l[i][k] * y[k];
        }
        y[i] = sum / l[i][i];
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut sum = y[i];
        for k in i + 1..p {
            sum -= l[k][i] * x[k];
        }
        x[i] = sum / l[i][i];
    }
    Ok(x)
}
