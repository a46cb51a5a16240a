//! L2-regularized logistic regression trained by full-batch gradient
//! descent from a zero initialization, with step halving whenever a step
//! would increase the loss. Deliberately solver-free so the optimization is
//! fully reproducible and inspectable.

use serde::{Deserialize, Serialize};

use super::tfidf::SparseVector;
use super::BaselineError;
use crate::logprob::FramingLabel;

/// Anything that can act as a feature vector: dot products against the
/// weights, and scatter-adds into the gradient.
pub trait Features {
    fn dot(&self, weights: &[f64]) -> f64;
    fn add_scaled(&self, coefficient: f64, out: &mut [f64]);
}

impl Features for SparseVector {
    fn dot(&self, weights: &[f64]) -> f64 {
        SparseVector::dot(self, weights)
    }

    fn add_scaled(&self, coefficient: f64, out: &mut [f64]) {
        for &(i, v) in &self.entries {
            out[i] += coefficient * v;
        }
    }
}

impl Features for Vec<f64> {
    fn dot(&self, weights: &[f64]) -> f64 {
        self.iter().zip(weights).map(|(x, w)| x * w).sum()
    }

    fn add_scaled(&self, coefficient: f64, out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(self) {
            *o += coefficient * x;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub l2_lambda: f64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { l2_lambda: 1e-2, max_iterations: 5000, gradient_tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub iterations: usize,
    pub final_loss: f64,
    pub gradient_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub summary: TrainSummary,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean log-loss plus `lambda/2 * ||w||^2` (bias unregularized), with its
/// gradient. Exposed so the gradient can be checked against finite
/// differences.
pub fn loss_and_gradient<X: Features>(
    xs: &[X],
    ys: &[f64],
    weights: &[f64],
    bias: f64,
    l2_lambda: f64,
) -> (f64, Vec<f64>, f64) {
    let n = xs.len() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let z = x.dot(weights) + bias;
        loss += softplus(z) - y * z;
        let residual = sigmoid(z) - y;
        x.add_scaled(residual / n, &mut grad_w);
        grad_b += residual / n;
    }
    loss /= n;
    let mut penalty = 0.0;
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g += l2_lambda * w;
        penalty += w * w;
    }
    loss += 0.5 * l2_lambda * penalty;
    (loss, grad_w, grad_b)
}

fn gradient_norm(grad_w: &[f64], grad_b: f64) -> f64 {
    (grad_w.iter().map(|g| g * g).sum::<f64>() + grad_b * grad_b).sqrt()
}

/// Trains a binary classifier mapping side A to 1 and side B to 0.
pub fn train<X: Features>(
    xs: &[X],
    labels: &[FramingLabel],
    dim: usize,
    options: &TrainOptions,
) -> Result<LogisticModel, BaselineError> {
    if xs.is_empty() || xs.len() != labels.len() {
        return Err(BaselineError::InvalidTraining(format!(
            "need matching non-empty features and labels, got {} and {}",
            xs.len(),
            labels.len()
        )));
    }
    if !labels.contains(&FramingLabel::A) || !labels.contains(&FramingLabel::B) {
        return Err(BaselineError::InvalidTraining(
            "training set contains only one class".into(),
        ));
    }
    if !(options.l2_lambda.is_finite() && options.l2_lambda >= 0.0) {
        return Err(BaselineError::InvalidTraining(format!(
            "l2_lambda must be non-negative, got {}",
            options.l2_lambda
        )));
    }
    let ys: Vec<f64> =
        labels.iter().map(|l| if *l == FramingLabel::A { 1.0 } else { 0.0 }).collect();

    let mut weights = vec![0.0; dim];
    let mut bias = 0.0;
    let mut step = 1.0;
    let (mut loss, mut grad_w, mut grad_b) =
        loss_and_gradient(xs, &ys, &weights, bias, options.l2_lambda);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < options.max_iterations {
        let gnorm = gradient_norm(&grad_w, grad_b);
        if gnorm < options.gradient_tolerance {
            converged = true;
            break;
        }
        let mut accepted = false;
        while step >= 1e-12 {
            let cand_w: Vec<f64> =
                weights.iter().zip(&grad_w).map(|(w, g)| w - step * g).collect();
            let cand_b = bias - step * grad_b;
            let (cand_loss, cand_gw, cand_gb) =
                loss_and_gradient(xs, &ys, &cand_w, cand_b, options.l2_lambda);
            if cand_loss <= loss {
                weights = cand_w;
                bias = cand_b;
                loss = cand_loss;
                grad_w = cand_gw;
                grad_b = cand_gb;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        iterations += 1;
    }

    let gradient_norm = gradient_norm(&grad_w, grad_b);
    Ok(LogisticModel {
        weights,
        bias,
        summary: TrainSummary {
            iterations,
            final_loss: loss,
            gradient_norm,
            converged: converged || gradient_norm < options.gradient_tolerance,
        },
    })
}

impl LogisticModel {
    pub fn decision_value<X: Features>(&self, x: &X) -> f64 {
        x.dot(&self.weights) + self.bias
    }

    pub fn predict_proba<X: Features>(&self, x: &X) -> f64 {
        sigmoid(self.decision_value(x))
    }

    /// Positive logit means side A; an exact zero resolves to B with the tie
    /// flag, matching the delta sign rule.
    pub fn predict<X: Features>(&self, x: &X) -> (FramingLabel, bool) {
        FramingLabel::from_delta(self.decision_value(x))
    }
}
