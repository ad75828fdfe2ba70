//! Multinomial logistic regression over photo feature vectors, used for both
//! room categories and luxury levels.

use std::cmp::Ordering;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SoftmaxConfig {
    pub l2_lambda: f64,
    pub max_iters: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SoftmaxConfig {
    fn default() -> Self {
        SoftmaxConfig {
            l2_lambda: 1e-3,
            max_iters: 500,
            learning_rate: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxModel {
    /// One row per class: D feature weights followed by the bias.
    pub weights: Vec<Vec<f64>>,
    pub classes: Vec<String>,
    pub l2_lambda: f64,
    pub train_config: SoftmaxConfig,
}

impl SoftmaxModel {
    pub fn feature_dim(&self) -> usize {
        self.weights.first().map_or(0, |w| w.len() - 1)
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.len() < 2 || self.weights.len() != self.classes.len() {
            return Err(Error::invalid("softmax model needs one weight row per class and >= 2 classes"));
        }
        let width = self.weights[0].len();
        if width == 0 || self.weights.iter().any(|w| w.len() != width || w.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid("softmax weights must be finite rows of equal width"));
        }
        Ok(())
    }
}

fn logits(weights: &[Vec<f64>], x: &[f64], out: &mut [f64]) {
    for (o, w) in out.iter_mut().zip(weights) {
        let (bias, coef) = w.split_last().expect("non-empty row");
        *o = coef.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bias;
    }
}

/// In-place softmax; returns log-sum-exp of the input.
fn softmax_in_place(z: &mut [f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
    max + sum.ln()
}

/// Mean cross-entropy plus `l2_lambda * |W|^2` (bias excluded), and its
/// gradient with respect to every weight.
pub fn softmax_loss_grad(
    weights: &[Vec<f64>],
    features: &[Vec<f64>],
    labels: &[usize],
    l2_lambda: f64,
) -> (f64, Vec<Vec<f64>>) {
    let c = weights.len();
    let d = weights[0].len() - 1;
    let n = features.len() as f64;
    let mut grad = vec![vec![0.0; d + 1]; c];
    let mut z = vec![0.0; c];
    let mut loss = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        logits(weights, x, &mut z);
        let true_logit = z[y];
        let lse = softmax_in_place(&mut z);
        loss += lse - true_logit;
        for (k, g) in grad.iter_mut().enumerate() {
            let delta = (z[k] - if k == y { 1.0 } else { 0.0 }) / n;
            for (gi, xi) in g[..d].iter_mut().zip(x) {
                *gi += delta * xi;
            }
            g[d] += delta;
        }
    }
    loss /= n;
    for (w, g) in weights.iter().zip(grad.iter_mut()) {
        for (wi, gi) in w[..d].iter().zip(&mut g[..d]) {
            loss += l2_lambda * wi * wi;
            *gi += 2.0 * l2_lambda * wi;
        }
    }
    (loss, grad)
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Full-batch gradient descent with a halving step on loss increase.
/// Samples are put in a canonical order first, so the result does not
/// depend on the order of the training set.
pub fn softmax_train(
    features: &[Vec<f64>],
    labels: &[usize],
    classes: Vec<String>,
    config: &SoftmaxConfig,
) -> Result<SoftmaxModel> {
    let c = classes.len();
    if c < 2 {
        return Err(Error::invalid("softmax needs at least 2 classes"));
    }
    if features.len() != labels.len() || features.len() < c {
        return Err(Error::invalid(format!(
            "softmax needs matching features/labels with at least {c} samples, got {} and {}",
            features.len(),
            labels.len()
        )));
    }
    let d = features[0].len();
    if let Some(i) = features.iter().position(|x| x.len() != d || x.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid(format!(
            "feature row {i} has dimension {} (expected {d}) or non-finite entries",
            features[i].len()
        )));
    }
    let mut present = vec![false; c];
    for &y in labels {
        *present
            .get_mut(y)
            .ok_or_else(|| Error::invalid(format!("label {y} out of range for {c} classes")))? = true;
    }
    if let Some(k) = present.iter().position(|p| !p) {
        return Err(Error::invalid(format!("class {} has no training samples", classes[k])));
    }
    if config.l2_lambda < 0.0 || !(config.learning_rate > 0.0) {
        return Err(Error::invalid("l2_lambda must be >= 0 and learning_rate > 0"));
    }

    let mut order: Vec<usize> = (0..features.len()).collect();
    order.sort_by(|&a, &b| labels[a].cmp(&labels[b]).then_with(|| lexicographic(&features[a], &features[b])));
    let xs: Vec<Vec<f64>> = order.iter().map(|&i| features[i].clone()).collect();
    let ys: Vec<usize> = order.iter().map(|&i| labels[i]).collect();

    let init = Normal::new(0.0, 0.1).expect("valid normal");
    let mut r = rng(config.seed);
    let mut w: Vec<Vec<f64>> = (0..c).map(|_| (0..=d).map(|_| init.sample(&mut r)).collect()).collect();
    let (mut loss, mut grad) = softmax_loss_grad(&w, &xs, &ys, config.l2_lambda);
    let mut lr = config.learning_rate;
    for _ in 0..config.max_iters {
        if lr < 1e-12 {
            break;
        }
        let trial: Vec<Vec<f64>> = w
            .iter()
            .zip(&grad)
            .map(|(wr, gr)| wr.iter().zip(gr).map(|(a, g)| a - lr * g).collect())
            .collect();
        let (trial_loss, trial_grad) = softmax_loss_grad(&trial, &xs, &ys, config.l2_lambda);
        if trial_loss < loss {
            w = trial;
            loss = trial_loss;
            grad = trial_grad;
            lr *= 1.1;
        } else {
            lr *= 0.5;
        }
    }

    Ok(SoftmaxModel {
        weights: w,
        classes,
        l2_lambda: config.l2_lambda,
        train_config: *config,
    })
}

/// Predicted class index (ties to the smaller index) and class probabilities.
pub fn softmax_predict(model: &SoftmaxModel, x: &[f64]) -> Result<(usize, Vec<f64>)> {
    if x.len() != model.feature_dim() {
        return Err(Error::invalid(format!(
            "input has dimension {}, model expects {}",
            x.len(),
            model.feature_dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("input is not finite"));
    }
    let mut z = vec![0.0; model.num_classes()];
    logits(&model.weights, x, &mut z);
    let mut best = 0;
    for k in 1..z.len() {
        if z[k] > z[best] {
            best = k;
        }
    }
    softmax_in_place(&mut z);
    Ok((best, z))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub accuracy: f64,
    /// `confusion[true][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
}

pub fn evaluate_accuracy(model: &SoftmaxModel, features: &[Vec<f64>], labels: &[usize]) -> Result<AccuracyReport> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::invalid("evaluation set must be non-empty with one label per row"));
    }
    let c = model.num_classes();
    let mut confusion = vec![vec![0usize; c]; c];
    let mut correct = 0;
    for (x, &y) in features.iter().zip(labels) {
        if y >= c {
            return Err(Error::invalid(format!("label {y} out of range")));
        }
        let (pred, _) = softmax_predict(model, x)?;
        confusion[y][pred] += 1;
        correct += usize::from(pred == y);
    }
    Ok(AccuracyReport {
        accuracy: correct as f64 / features.len() as f64,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(weights: Vec<Vec<f64>>) -> SoftmaxModel {
        let classes = (0..weights.len()).map(|i| i.to_string()).collect();
        SoftmaxModel {
            weights,
            classes,
            l2_lambda: 0.0,
            train_config: SoftmaxConfig::default(),
        }
    }

    #[test]
    fn zero_weights_give_uniform_probabilities() {
        let m = model(vec![vec![0.0; 4]; 5]);
        let (label, p) = softmax_predict(&m, &[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(label, 0);
        assert!(p.iter().all(|v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn dominating_class_wins() {
        let mut w = vec![vec![0.0; 3]; 4];
        w[2][2] = 1000.0;
        let (label, p) = softmax_predict(&model(w), &[0.3, 0.7]).unwrap();
        assert_eq!(label, 2);
        assert!(p[2] > 0.999);
    }

    #[test]
    fn logit_ties_go_to_smaller_index() {
        let mut w = vec![vec![0.0; 2]; 6];
        w[2][1] = 5.0;
        w[5][1] = 5.0;
        assert_eq!(softmax_predict(&model(w), &[1.0]).unwrap().0, 2);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(softmax_predict(&model(vec![vec![0.0; 3]; 2]), &[1.0]).is_err());
    }

    #[test]
    fn separable_two_class_set_is_learned() {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..10 {
            let t = i as f64 * 0.3;
            xs.push(vec![1.0 + t, 0.5 - t]);
            ys.push(0);
            xs.push(vec![-1.0 - t, -0.5 + 0.2 * t]);
            ys.push(1);
        }
        let m = softmax_train(&xs, &ys, vec!["a".into(), "b".into()], &SoftmaxConfig::default()).unwrap();
        let acc = evaluate_accuracy(&m, &xs, &ys).unwrap();
        assert_eq!(acc.accuracy, 1.0);
        assert_eq!(acc.confusion, vec![vec![10, 0], vec![0, 10]]);
    }

    #[test]
    fn missing_class_is_named() {
        let xs = vec![vec![0.0], vec![1.0], vec![2.0]];
        let err = softmax_train(&xs, &[0, 0, 1], vec!["a".into(), "b".into(), "c".into()], &SoftmaxConfig::default())
            .unwrap_err();
        assert!(err.to_string().contains("class c"), "{err}");
    }
}
