use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after each assignment step.
    pub inertia_trace: Vec<f64>,
    pub converged: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Nearest centroid; ties go to the lower index.
fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(p, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let mut chosen = vec![r.random_range(0..points.len())];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = r.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = d2.iter().rposition(|&v| v > 0.0).unwrap_or(0);
            for (i, &v) in d2.iter().enumerate() {
                acc += v;
                if acc > target && v > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // All remaining points coincide with a chosen centre.
            (0..points.len()).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (v, p) in d2.iter_mut().zip(points) {
            *v = v.min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

fn update_centroids(points: &[Vec<f64>], assignments: &[usize], centroids: &mut [Vec<f64>]) -> Vec<usize> {
    let d = points[0].len();
    let mut counts = vec![0usize; centroids.len()];
    let mut sums = vec![vec![0.0; d]; centroids.len()];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    for ((c, s), &n) in centroids.iter_mut().zip(sums).zip(&counts) {
        if n > 0 {
            *c = s.into_iter().map(|v| v / n as f64).collect();
        }
    }
    counts
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(points: &[Vec<f64>], assignments: &mut [usize], centroids: &mut [Vec<f64>], counts: &mut [usize]) {
    for empty in 0..centroids.len() {
        if counts[empty] > 0 {
            continue;
        }
        let donor = (0..points.len())
            .filter(|&i| counts[assignments[i]] > 1)
            .max_by(|&a, &b| {
                sq_dist(&points[a], &centroids[assignments[a]])
                    .total_cmp(&sq_dist(&points[b], &centroids[assignments[b]]))
                    .then(b.cmp(&a))
            });
        let Some(i) = donor else { return };
        let from = assignments[i];
        counts[from] -= 1;
        counts[empty] = 1;
        assignments[i] = empty;
        centroids[empty] = points[i].clone();
        let members: Vec<&Vec<f64>> = points
            .iter()
            .zip(assignments.iter())
            .filter(|(_, &a)| a == from)
            .map(|(p, _)| p)
            .collect();
        let n = members.len() as f64;
        centroids[from] = (0..points[0].len())
            .map(|c| members.iter().map(|p| p[c]).sum::<f64>() / n)
            .collect();
    }
}

/// k-means++ seeding followed by Lloyd iterations until the assignments
/// stop changing or `max_iters` is reached.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iters: usize) -> Result<KMeans> {
    if k == 0 || points.len() < k {
        return Err(Error::invalid(format!(
            "k-means needs n >= k >= 1, got n = {} and k = {k}",
            points.len()
        )));
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d || p.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid("k-means points must be finite with a common dimension"));
    }

    let mut centroids = plus_plus_init(points, k, seed);
    let mut assignments: Vec<usize> = vec![usize::MAX; points.len()];
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        let mut inertia = 0.0;
        for (p, a) in points.iter().zip(assignments.iter_mut()) {
            let (c, dist) = nearest(p, &centroids);
            changed |= *a != c;
            *a = c;
            inertia += dist;
        }
        trace.push(inertia);
        if !changed {
            converged = true;
            break;
        }
        let mut counts = update_centroids(points, &assignments, &mut centroids);
        repair_empty(points, &mut assignments, &mut centroids, &mut counts);
    }
    if !converged {
        let mut counts = update_centroids(points, &assignments, &mut centroids);
        repair_empty(points, &mut assignments, &mut centroids, &mut counts);
    }
    Ok(KMeans {
        assignments,
        centroids,
        inertia_trace: trace,
        converged,
    })
}
