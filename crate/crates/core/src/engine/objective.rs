use std::sync::Arc;

use crate::error::{IleaError, Result};
use crate::losses::{LocalLoss, LossValueGrad};
use crate::manifold::{Point, Tangent};

/// A differentiable scalar function on a manifold.
pub trait Objective: Send + Sync {
    fn value(&self, theta: &Point) -> Result<f64>;

    fn value_grad(&self, theta: &Point) -> Result<LossValueGrad>;
}

impl<T: LocalLoss + ?Sized> Objective for T {
    fn value(&self, theta: &Point) -> Result<f64> {
        LocalLoss::value(self, theta)
    }

    fn value_grad(&self, theta: &Point) -> Result<LossValueGrad> {
        LocalLoss::value_grad(self, theta)
    }
}

/// Shard weights `n_j / N`.
pub fn shard_weights(sizes: &[usize]) -> Vec<f64> {
    let total: usize = sizes.iter().sum();
    sizes
        .iter()
        .map(|&n| n as f64 / total as f64)
        .collect()
}

/// `sum_j w_j g_j` accumulated in index order, starting from the first term.
/// All gradients must share a base point.
pub fn weighted_average(grads: &[Tangent], weights: &[f64]) -> Result<Tangent> {
    if grads.is_empty() || grads.len() != weights.len() {
        return Err(IleaError::Config(format!(
            "cannot average {} gradients with {} weights",
            grads.len(),
            weights.len()
        )));
    }
    let mut acc = grads[0].scaled(weights[0]);
    for (g, &w) in grads.iter().zip(weights).skip(1) {
        acc.ensure_same_base(g)?;
        let mut v = acc.into_vec();
        v += g.vec() * w;
        acc = Tangent::new_unchecked(g.base().clone(), v);
    }
    Ok(acc)
}

/// The full-data loss `L_N = sum_j (n_j / N) L_j`.
#[derive(Clone)]
pub struct GlobalLoss {
    shards: Vec<Arc<dyn LocalLoss>>,
    weights: Vec<f64>,
}

impl GlobalLoss {
    pub fn new(shards: Vec<Arc<dyn LocalLoss>>) -> Result<Self> {
        if shards.is_empty() {
            return Err(IleaError::Config("no shards".into()));
        }
        if let Some(j) = shards.iter().position(|s| s.is_empty()) {
            return Err(IleaError::Config(format!("shard {j} is empty")));
        }
        let sizes: Vec<usize> = shards.iter().map(|s| s.len()).collect();
        let weights = shard_weights(&sizes);
        Ok(Self { shards, weights })
    }

    pub fn shards(&self) -> &[Arc<dyn LocalLoss>] {
        &self.shards
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl LocalLoss for GlobalLoss {
    fn len(&self) -> usize {
        self.shards.iter().map(|s| s.len()).sum()
    }

    fn value(&self, theta: &Point) -> Result<f64> {
        let mut acc = self.weights[0] * self.shards[0].value(theta)?;
        for (s, &w) in self.shards.iter().zip(&self.weights).skip(1) {
            acc += w * s.value(theta)?;
        }
        Ok(acc)
    }

    fn value_grad(&self, theta: &Point) -> Result<LossValueGrad> {
        let parts = self
            .shards
            .iter()
            .map(|s| s.value_grad(theta))
            .collect::<Result<Vec<_>>>()?;
        let mut value = self.weights[0] * parts[0].value;
        for (p, &w) in parts.iter().zip(&self.weights).skip(1) {
            value += w * p.value;
        }
        let grads: Vec<Tangent> = parts.into_iter().map(|p| p.grad).collect();
        let grad = weighted_average(&grads, &self.weights)?;
        Ok(LossValueGrad { value, grad })
    }
}
