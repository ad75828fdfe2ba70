//! epsilon-SVR with an RBF kernel, solved in the dual by a two-variable
//! working-set method with second-order working-set selection.
//!
//! The 2n dual variables are laid out as `[alpha; alpha*]` with signs
//! `y = [+1; -1]`, giving the single-constraint problem
//!
//! ```text
//! min  1/2 b'Qb + p'b   s.t.  y'b = 0,  0 <= b <= C
//! Q_st = y_s y_t K(s mod n, t mod n)
//! p    = [eps - y_std; eps + y_std]
//! ```
//!
//! Targets are standardized before solving; `C` and `epsilon` are in
//! standardized units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Curvature floor for degenerate pairs.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    pub gamma: f64,
}

impl SvrParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.c > 0.0
            && self.epsilon >= 0.0
            && self.gamma > 0.0
            && self.c.is_finite()
            && self.epsilon.is_finite()
            && self.gamma.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "SVR params need C > 0, epsilon >= 0, gamma > 0, got {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once the maximal KKT violation drops below this.
    pub tol: f64,
    /// Iteration cap; `None` means `max(1_000_000, 100 * 2n)`.
    pub max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-3,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i - alpha*_i` for each support vector, in standardized units.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub params: SvrParams,
    pub y_mean: f64,
    pub y_scale: f64,
    pub dim: usize,
    pub converged: bool,
    pub kkt_violation: f64,
    pub iterations: usize,
}

pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Standardization used for targets: population mean and standard
/// deviation, with a unit scale when all targets are equal.
pub fn standardize(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    (mean, if sd > 0.0 { sd } else { 1.0 })
}

fn check_inputs(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid(format!(
            "SVR needs at least 2 samples with one target each, got {} rows and {} targets",
            x.len(),
            y.len()
        )));
    }
    let dim = x[0].len();
    if let Some(i) = x.iter().position(|r| r.len() != dim) {
        return Err(Error::invalid(format!("row {i} has dimension {}, expected {dim}", x[i].len())));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("SVR inputs must be finite"));
    }
    Ok(dim)
}

struct Solver<'a> {
    n: usize,
    kernel: &'a [f64],
    c: f64,
    beta: Vec<f64>,
    grad: Vec<f64>,
}

impl Solver<'_> {
    fn sign(&self, t: usize) -> f64 {
        if t < self.n {
            1.0
        } else {
            -1.0
        }
    }

    fn k(&self, s: usize, t: usize) -> f64 {
        self.kernel[(s % self.n) * self.n + t % self.n]
    }

    fn is_upper(&self, t: usize) -> bool {
        self.beta[t] >= self.c
    }

    fn is_lower(&self, t: usize) -> bool {
        self.beta[t] <= 0.0
    }

    /// Returns the working pair, or `None` with the current violation when
    /// the KKT gap is below `tol`.
    fn select(&self, tol: f64) -> (Option<(usize, usize)>, f64) {
        let l = 2 * self.n;
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..l {
            if self.sign(t) > 0.0 {
                if !self.is_upper(t) && -self.grad[t] >= gmax {
                    gmax = -self.grad[t];
                    i = t;
                }
            } else if !self.is_lower(t) && self.grad[t] >= gmax {
                gmax = self.grad[t];
                i = t;
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut obj_min = f64::INFINITY;
        let kii = if i == usize::MAX { 0.0 } else { self.k(i, i) };
        for t in 0..l {
            let (allowed, grad_diff, g2) = if self.sign(t) > 0.0 {
                (!self.is_lower(t), gmax + self.grad[t], self.grad[t])
            } else {
                (!self.is_upper(t), gmax - self.grad[t], -self.grad[t])
            };
            if !allowed {
                continue;
            }
            gmax2 = gmax2.max(g2);
            if grad_diff > 0.0 && i != usize::MAX {
                let quad = kii + self.k(t, t) - 2.0 * self.k(i, t);
                let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= obj_min {
                    obj_min = obj;
                    j = t;
                }
            }
        }
        let violation = gmax + gmax2;
        if violation < tol || i == usize::MAX || j == usize::MAX {
            (None, violation.max(0.0))
        } else {
            (Some((i, j)), violation)
        }
    }

    fn update(&mut self, i: usize, j: usize) {
        let c = self.c;
        let (old_i, old_j) = (self.beta[i], self.beta[j]);
        let quad = {
            let q = self.k(i, i) + self.k(j, j) - 2.0 * self.k(i, j);
            if q > 0.0 {
                q
            } else {
                TAU
            }
        };
        let (mut bi, mut bj) = (old_i, old_j);
        if self.sign(i) != self.sign(j) {
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = bi - bj;
            bi += delta;
            bj += delta;
            if diff > 0.0 {
                if bj < 0.0 {
                    bj = 0.0;
                    bi = diff;
                }
            } else if bi < 0.0 {
                bi = 0.0;
                bj = -diff;
            }
            if diff > 0.0 {
                if bi > c {
                    bi = c;
                    bj = c - diff;
                }
            } else if bj > c {
                bj = c;
                bi = c + diff;
            }
        } else {
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = bi + bj;
            bi -= delta;
            bj += delta;
            if sum > c {
                if bi > c {
                    bi = c;
                    bj = sum - c;
                }
            } else if bj < 0.0 {
                bj = 0.0;
                bi = sum;
            }
            if sum > c {
                if bj > c {
                    bj = c;
                    bi = sum - c;
                }
            } else if bi < 0.0 {
                bi = 0.0;
                bj = sum;
            }
        }
        self.beta[i] = bi;
        self.beta[j] = bj;
        let (di, dj) = (bi - old_i, bj - old_j);
        let (yi, yj) = (self.sign(i), self.sign(j));
        let n = self.n;
        let row_i = &self.kernel[(i % n) * n..(i % n + 1) * n];
        let row_j = &self.kernel[(j % n) * n..(j % n + 1) * n];
        let (gpos, gneg) = self.grad.split_at_mut(n);
        for s in 0..n {
            let delta = yi * row_i[s] * di + yj * row_j[s] * dj;
            gpos[s] += delta;
            gneg[s] -= delta;
        }
    }

    /// Offset from free variables, or the midpoint of the feasible interval.
    fn rho(&self) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum_free, mut n_free) = (0.0, 0usize);
        for t in 0..2 * self.n {
            let yg = self.sign(t) * self.grad[t];
            let positive = self.sign(t) > 0.0;
            if self.is_upper(t) {
                if positive {
                    lb = lb.max(yg);
                } else {
                    ub = ub.min(yg);
                }
            } else if self.is_lower(t) {
                if positive {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                sum_free += yg;
            }
        }
        if n_free > 0 {
            sum_free / n_free as f64
        } else {
            0.5 * (ub + lb)
        }
    }
}

pub fn svr_fit(x: &[Vec<f64>], y: &[f64], params: &SvrParams) -> Result<SvrModel> {
    svr_fit_with(x, y, params, &SolverOptions::default())
}

/// Fits the dual. Hitting the iteration cap is not an error: the model is
/// returned with `converged == false` and the residual violation.
pub fn svr_fit_with(x: &[Vec<f64>], y: &[f64], params: &SvrParams, opts: &SolverOptions) -> Result<SvrModel> {
    params.validate()?;
    let dim = check_inputs(x, y)?;
    let n = x.len();
    let (y_mean, y_scale) = standardize(y);

    let mut kernel = vec![0.0; n * n];
    for a in 0..n {
        kernel[a * n + a] = 1.0;
        for b in a + 1..n {
            let v = rbf_kernel(&x[a], &x[b], params.gamma);
            kernel[a * n + b] = v;
            kernel[b * n + a] = v;
        }
    }

    let mut grad = Vec::with_capacity(2 * n);
    grad.extend(y.iter().map(|v| params.epsilon - (v - y_mean) / y_scale));
    grad.extend(y.iter().map(|v| params.epsilon + (v - y_mean) / y_scale));
    let mut solver = Solver {
        n,
        kernel: &kernel,
        c: params.c,
        beta: vec![0.0; 2 * n],
        grad,
    };

    let max_iter = opts.max_iter.unwrap_or((100 * 2 * n).max(1_000_000));
    let mut iterations = 0;
    let (converged, violation) = loop {
        let (pair, violation) = solver.select(opts.tol);
        match pair {
            None => break (true, violation),
            Some(_) if iterations >= max_iter => break (false, violation),
            Some((i, j)) => {
                solver.update(i, j);
                iterations += 1;
            }
        }
    };

    let rho = solver.rho();
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for s in 0..n {
        let coef = solver.beta[s] - solver.beta[s + n];
        if coef != 0.0 {
            support_vectors.push(x[s].clone());
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
        converged,
        kkt_violation: violation,
        iterations,
    })
}

impl SvrModel {
    /// Decision value in standardized target units.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "input has dimension {}, model expects {}",
                x.len(),
                self.dim
            )));
        }
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, c)| c * rbf_kernel(sv, x, self.params.gamma))
            .sum::<f64>()
            + self.bias)
    }
}

pub fn svr_predict(model: &SvrModel, x: &[f64]) -> Result<f64> {
    Ok(model.y_mean + model.y_scale * model.decision(x)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        assert_eq!(rbf_kernel(&[3.0, -1.0], &[3.0, -1.0], 0.7), 1.0);
        assert!((rbf_kernel(&[0.0, 0.0], &[1.0, 0.0], 0.5) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((rbf_kernel(&[0.0, 0.0], &[1.0, 0.0], 0.5) - 0.60653).abs() < 1e-5);
    }

    #[test]
    fn constant_target_gives_zero_duals() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y = vec![250_000.0; 6];
        for eps in [0.0, 0.1] {
            let m = svr_fit(&x, &y, &SvrParams { c: 10.0, epsilon: eps, gamma: 0.5 }).unwrap();
            assert!(m.dual_coefs.is_empty());
            assert!(m.converged);
            for probe in [[0.0, 0.0], [17.0, -3.0]] {
                assert_eq!(svr_predict(&m, &probe).unwrap(), 250_000.0);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let p = SvrParams { c: 1.0, epsilon: 0.1, gamma: 1.0 };
        assert!(svr_fit(&[vec![1.0]], &[1.0], &p).is_err());
        assert!(svr_fit(&[vec![1.0], vec![f64::NAN]], &[1.0, 2.0], &p).is_err());
        assert!(svr_fit(&[vec![1.0], vec![2.0]], &[1.0, 2.0], &SvrParams { c: 0.0, ..p }).is_err());
        let m = svr_fit(&[vec![1.0], vec![2.0]], &[1.0, 2.0], &p).unwrap();
        assert!(svr_predict(&m, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn iteration_cap_is_reported() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64 * 0.37).sin(), i as f64 / 20.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * 3.0 + r[1]).collect();
        let p = SvrParams { c: 100.0, epsilon: 0.0, gamma: 1.0 };
        let m = svr_fit_with(&x, &y, &p, &SolverOptions { tol: 1e-3, max_iter: Some(2) }).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 2);
        assert!(m.kkt_violation >= 1e-3);
    }
}
