//! Slow reference solver for the epsilon-SVR dual, used to check the
//! working-set solver. Accelerated projected gradient over all 2n
//! variables, projecting onto `{0 <= b <= C, y'b = 0}` by bisection on the
//! multiplier of the equality constraint.

use super::svr::{rbf_kernel, standardize, SvrModel, SvrParams};
use crate::error::{Error, Result};

/// Bound classification slack for the reference iterate.
const BOUND_EPS: f64 = 1e-9;

fn project(v: &[f64], sign: &[f64], c: f64) -> Vec<f64> {
    let at = |lambda: f64| -> (Vec<f64>, f64) {
        let b: Vec<f64> = v
            .iter()
            .zip(sign)
            .map(|(vi, yi)| (vi - lambda * yi).clamp(0.0, c))
            .collect();
        let s = b.iter().zip(sign).map(|(bi, yi)| bi * yi).sum();
        (b, s)
    };
    // y'b is non-increasing in lambda.
    let (mut lo, mut hi) = (-1.0, 1.0);
    while at(lo).1 < 0.0 {
        lo *= 2.0;
    }
    while at(hi).1 > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid).1 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi)).0
}

/// Solves the same standardized dual as [`super::svr_fit`] by `iters`
/// steps of FISTA and returns a model in the same form.
pub fn svr_fit_reference(x: &[Vec<f64>], y: &[f64], params: &SvrParams, iters: usize) -> Result<SvrModel> {
    params.validate()?;
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("reference SVR needs at least 2 samples"));
    }
    let n = x.len();
    let dim = x[0].len();
    let (y_mean, y_scale) = standardize(y);
    let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_scale).collect();
    let k: Vec<Vec<f64>> = x
        .iter()
        .map(|a| x.iter().map(|b| rbf_kernel(a, b, params.gamma)).collect())
        .collect();
    let sign: Vec<f64> = (0..2 * n).map(|s| if s < n { 1.0 } else { -1.0 }).collect();
    let p: Vec<f64> = (0..2 * n)
        .map(|s| if s < n { params.epsilon - ys[s] } else { params.epsilon + ys[s - n] })
        .collect();
    let grad = |b: &[f64]| -> Vec<f64> {
        let beta: Vec<f64> = (0..n).map(|i| b[i] - b[i + n]).collect();
        let kb: Vec<f64> = k.iter().map(|row| row.iter().zip(&beta).map(|(a, c)| a * c).sum()).collect();
        (0..2 * n).map(|s| sign[s] * kb[s % n] + p[s]).collect()
    };
    // Q = [K -K; -K K] has largest eigenvalue 2 * lambda_max(K) <= 2n.
    let step = 1.0 / (2.0 * n as f64);
    let mut b = vec![0.0; 2 * n];
    let mut z = b.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let g = grad(&z);
        let v: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - step * gi).collect();
        let next = project(&v, &sign, params.c);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let w = (t - 1.0) / t_next;
        z = next.iter().zip(&b).map(|(a, o)| a + w * (a - o)).collect();
        b = next;
        t = t_next;
    }

    let g = grad(&b);
    let (mut ub, mut lb, mut free_sum, mut free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for s in 0..2 * n {
        let yg = sign[s] * g[s];
        if b[s] >= params.c - BOUND_EPS {
            if sign[s] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if b[s] <= BOUND_EPS {
            if sign[s] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 { free_sum / free as f64 } else { 0.5 * (ub + lb) };

    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for i in 0..n {
        let coef = b[i] - b[i + n];
        if coef.abs() > BOUND_EPS {
            support_vectors.push(x[i].clone());
            dual_coefs.push(coef);
        }
    }
    Ok(SvrModel {
        support_vectors,
        dual_coefs,
        bias: -rho,
        params: *params,
        y_mean,
        y_scale,
        dim,
        converged: true,
        kkt_violation: 0.0,
        iterations: iters,
    })
}
