use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::median_error_rate;
use crate::rng::rng;

use super::svr::{svr_fit, svr_predict, SvrParams};

/// Candidate hyperparameters. Gamma values are multiplied by `1 / dim` of
/// the inputs being tuned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub c: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub gamma_per_dim: Vec<f64>,
}

impl Default for ParamGrid {
    fn default() -> Self {
        ParamGrid {
            c: vec![1.0, 10.0, 100.0],
            epsilon: vec![0.01, 0.1],
            gamma_per_dim: vec![0.01, 0.1, 1.0],
        }
    }
}

impl ParamGrid {
    pub fn single(params: SvrParams, dim: usize) -> Self {
        ParamGrid {
            c: vec![params.c],
            epsilon: vec![params.epsilon],
            gamma_per_dim: vec![params.gamma * dim as f64],
        }
    }

    /// All grid points, ordered by C, then gamma, then epsilon (ascending).
    pub fn points(&self, dim: usize) -> Vec<SvrParams> {
        let mut out = Vec::new();
        for &c in &self.c {
            for &g in &self.gamma_per_dim {
                for &epsilon in &self.epsilon {
                    out.push(SvrParams {
                        c,
                        epsilon,
                        gamma: g / dim.max(1) as f64,
                    });
                }
            }
        }
        out.sort_by(|a, b| {
            a.c.total_cmp(&b.c)
                .then(a.gamma.total_cmp(&b.gamma))
                .then(a.epsilon.total_cmp(&b.epsilon))
        });
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: SvrParams,
    /// Mean cross-validated median APE per grid point, in grid order.
    pub scores: Vec<(SvrParams, f64)>,
}

/// Seeded fold index for each sample; fold sizes differ by at most one.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

/// k-fold selection of the grid point with the lowest mean median APE.
/// Ties keep the earlier point in [`ParamGrid::points`] order.
pub fn tune_hyperparams(
    x: &[Vec<f64>],
    y: &[f64],
    grid: &ParamGrid,
    folds: usize,
    seed: u64,
) -> Result<TuneResult> {
    if folds < 2 {
        return Err(Error::invalid("tuning needs at least 2 folds"));
    }
    if x.len() != y.len() {
        return Err(Error::invalid("tuning needs one target per row"));
    }
    if x.len() < folds {
        return Err(Error::invalid(format!(
            "tuning needs at least as many samples as folds, got {} samples for {folds} folds",
            x.len()
        )));
    }
    let dim = x.first().map_or(0, Vec::len);
    let points = grid.points(dim);
    if points.is_empty() {
        return Err(Error::invalid("hyperparameter grid is empty"));
    }
    let fold = fold_assignment(x.len(), folds, seed);
    let mut scores = Vec::with_capacity(points.len());
    for params in points {
        let mut total = 0.0;
        for f in 0..folds {
            let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for i in 0..x.len() {
                if fold[i] == f {
                    vx.push(&x[i]);
                    vy.push(y[i]);
                } else {
                    tx.push(x[i].clone());
                    ty.push(y[i]);
                }
            }
            let model = svr_fit(&tx, &ty, &params)?;
            let preds = vx.iter().map(|v| svr_predict(&model, v)).collect::<Result<Vec<_>>>()?;
            total += median_error_rate(&preds, &vy)?;
        }
        scores.push((params, total / folds as f64));
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.1 < scores[best].1 {
            best = i;
        }
    }
    Ok(TuneResult {
        best: scores[best].0,
        scores,
    })
}
