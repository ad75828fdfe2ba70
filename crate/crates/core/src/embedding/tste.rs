//! t-distributed stochastic triplet embedding.
//!
//! For a triplet (i, j, k) meaning "i is closer to j than to k":
//!
//! ```text
//! K_ab   = (1 + |x_a - x_b|^2 / alpha) ^ (-(alpha + 1) / 2)
//! p_ijk  = K_ij / (K_ij + K_ik)
//! loss   = - sum log p_ijk
//! ```

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng;

/// (probe, similar, dissimilar) as row indices.
pub type IndexTriplet = (usize, usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsteConfig {
    pub max_iters: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TsteConfig {
    fn default() -> Self {
        TsteConfig {
            max_iters: 1000,
            learning_rate: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsteFit {
    pub points: Vec<Vec<f64>>,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Best loss after each iteration.
    pub loss_trace: Vec<f64>,
    /// Rows that appear in no triplet; they keep their initial position.
    pub isolated: Vec<usize>,
}

fn check_triplets(triplets: &[IndexTriplet], n: usize) -> Result<()> {
    for &(i, j, k) in triplets {
        if i >= n || j >= n || k >= n {
            return Err(Error::invalid(format!(
                "triplet ({i}, {j}, {k}) out of range for {n} points"
            )));
        }
    }
    Ok(())
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn sq_dist(x: &[f64], a: usize, b: usize, d: usize) -> f64 {
    let (xa, xb) = (&x[a * d..(a + 1) * d], &x[b * d..(b + 1) * d]);
    xa.iter().zip(xb).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Loss over flat row-major points; when `grad` is given it is overwritten
/// with the gradient.
fn loss_flat(x: &[f64], d: usize, triplets: &[IndexTriplet], alpha: f64, mut grad: Option<&mut [f64]>) -> f64 {
    let expo = (alpha + 1.0) / 2.0;
    if let Some(g) = grad.as_deref_mut() {
        g.fill(0.0);
    }
    let mut loss = 0.0;
    for &(i, j, k) in triplets {
        let dij = sq_dist(x, i, j, d);
        let dik = sq_dist(x, i, k, d);
        let log_kij = -expo * (dij / alpha).ln_1p();
        let log_kik = -expo * (dik / alpha).ln_1p();
        let z = log_kik - log_kij;
        loss += softplus(z);
        if let Some(g) = grad.as_deref_mut() {
            // 1 - p_ijk
            let q = sigmoid(z);
            let a = q * (alpha + 1.0) / (alpha + dij);
            let b = -q * (alpha + 1.0) / (alpha + dik);
            for c in 0..d {
                let xij = x[i * d + c] - x[j * d + c];
                let xik = x[i * d + c] - x[k * d + c];
                g[i * d + c] += a * xij + b * xik;
                g[j * d + c] -= a * xij;
                g[k * d + c] -= b * xik;
            }
        }
    }
    loss
}

fn flatten(points: &[Vec<f64>]) -> Result<(Vec<f64>, usize)> {
    let d = points.first().map_or(0, Vec::len);
    let mut flat = Vec::with_capacity(points.len() * d);
    for (r, p) in points.iter().enumerate() {
        if p.len() != d {
            return Err(Error::invalid(format!("point {r} has dimension {}, expected {d}", p.len())));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("point {r} is not finite")));
        }
        flat.extend_from_slice(p);
    }
    Ok((flat, d))
}

fn unflatten(flat: &[f64], d: usize) -> Vec<Vec<f64>> {
    if d == 0 {
        return Vec::new();
    }
    flat.chunks(d).map(<[f64]>::to_vec).collect()
}

/// Exact t-STE loss and its analytic gradient.
pub fn tste_loss_grad(points: &[Vec<f64>], triplets: &[IndexTriplet], alpha: f64) -> Result<(f64, Vec<Vec<f64>>)> {
    if points.len() < 2 {
        return Err(Error::invalid("t-STE needs at least 2 points"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    check_triplets(triplets, points.len())?;
    let (x, d) = flatten(points)?;
    let mut g = vec![0.0; x.len()];
    let loss = loss_flat(&x, d, triplets, alpha, Some(&mut g));
    let mut grad = unflatten(&g, d);
    grad.resize(points.len(), Vec::new());
    Ok((loss, grad))
}

/// Full-batch gradient descent from a seeded N(0, 1e-4) start. The step
/// halves whenever a trial step would raise the loss and grows by 10% after
/// each accepted step; the returned iterate is the best one seen.
pub fn tste_fit(triplets: &[IndexTriplet], n: usize, d: usize, alpha: f64, config: &TsteConfig) -> Result<TsteFit> {
    if triplets.is_empty() {
        return Err(Error::invalid("t-STE needs at least one triplet"));
    }
    if n < 2 || d == 0 {
        return Err(Error::invalid("t-STE needs n >= 2 points and d >= 1"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if !(config.learning_rate > 0.0) {
        return Err(Error::invalid("learning_rate must be positive"));
    }
    check_triplets(triplets, n)?;

    let mut used = vec![false; n];
    for &(i, j, k) in triplets {
        used[i] = true;
        used[j] = true;
        used[k] = true;
    }
    let isolated = (0..n).filter(|&i| !used[i]).collect();

    let init = Normal::new(0.0, 0.01).expect("valid normal");
    let mut r = rng(config.seed);
    let mut x: Vec<f64> = (0..n * d).map(|_| init.sample(&mut r)).collect();
    let mut grad = vec![0.0; n * d];
    let mut loss = loss_flat(&x, d, triplets, alpha, Some(&mut grad));
    let initial_loss = loss;

    let mut trial = vec![0.0; n * d];
    let mut trial_grad = vec![0.0; n * d];
    let mut lr = config.learning_rate;
    let mut trace = Vec::with_capacity(config.max_iters);
    for _ in 0..config.max_iters {
        if lr < 1e-12 || grad.iter().all(|g| g.abs() < 1e-12) {
            break;
        }
        for ((t, xv), g) in trial.iter_mut().zip(&x).zip(&grad) {
            *t = xv - lr * g;
        }
        let trial_loss = loss_flat(&trial, d, triplets, alpha, Some(&mut trial_grad));
        if trial_loss < loss {
            std::mem::swap(&mut x, &mut trial);
            std::mem::swap(&mut grad, &mut trial_grad);
            loss = trial_loss;
            lr *= 1.1;
        } else {
            lr *= 0.5;
        }
        trace.push(loss);
    }

    Ok(TsteFit {
        points: unflatten(&x, d),
        initial_loss,
        final_loss: loss,
        loss_trace: trace,
        isolated,
    })
}

/// Fraction of triplets with |x_i - x_j| < |x_i - x_k|; ties are unsatisfied.
pub fn triplet_satisfaction(points: &[Vec<f64>], triplets: &[IndexTriplet]) -> Result<f64> {
    check_triplets(triplets, points.len())?;
    if triplets.is_empty() {
        return Ok(0.0);
    }
    let dist = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum() };
    let ok = triplets
        .iter()
        .filter(|&&(i, j, k)| dist(&points[i], &points[j]) < dist(&points[i], &points[k]))
        .count();
    Ok(ok as f64 / triplets.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_triplet_has_probability_half() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, -1.0]];
        let (loss, _) = tste_loss_grad(&pts, &[(0, 1, 2)], 1.0).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert!(tste_loss_grad(&pts, &[(0, 1, 2)], 1.0).is_err());
        assert!(tste_loss_grad(&[vec![f64::NAN], vec![0.0]], &[], 1.0).is_err());
        assert!(tste_loss_grad(&pts, &[], 0.0).is_err());
        assert!(tste_fit(&[], 3, 2, 1.0, &TsteConfig::default()).is_err());
    }

    #[test]
    fn ties_are_unsatisfied() {
        let pts = vec![vec![1.0, 1.0]; 4];
        assert_eq!(triplet_satisfaction(&pts, &[(0, 1, 2), (1, 2, 3)]).unwrap(), 0.0);
    }

    #[test]
    fn isolated_points_keep_their_start() {
        let cfg = TsteConfig {
            max_iters: 50,
            ..TsteConfig::default()
        };
        let fit = tste_fit(&[(0, 1, 2)], 4, 2, 1.0, &cfg).unwrap();
        assert_eq!(fit.isolated, [3]);
        let fit0 = tste_fit(&[(0, 1, 2)], 4, 2, 1.0, &TsteConfig { max_iters: 0, ..cfg }).unwrap();
        assert_eq!(fit.points[3], fit0.points[3]);
    }
}
