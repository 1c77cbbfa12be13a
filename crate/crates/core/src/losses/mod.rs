//! Loss functions with Riemannian gradients.
//!
//! Every loss is evaluated shard-locally through [`LocalLoss`]; the value and
//! gradient are averages over the shard's data in index order.

mod completion;
mod frechet;

pub use completion::{mc_user_loss_grad, ridge_weights, RatingsShard, UserColumn};
pub use frechet::{extrinsic_mean_closed_form, frechet_loss_grad, FrechetMetric, FrechetShard};

use crate::error::Result;
use crate::manifold::{Point, Tangent};

/// A loss value together with its Riemannian gradient at the same point.
#[derive(Clone, Debug)]
pub struct LossValueGrad {
    pub value: f64,
    pub grad: Tangent,
}

/// The loss `L_j` of one shard: an average over that shard's data.
pub trait LocalLoss: Send + Sync {
    /// Number of data units in the shard (samples or users).
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn value(&self, theta: &Point) -> Result<f64>;

    fn value_grad(&self, theta: &Point) -> Result<LossValueGrad>;
}

/// `L_j(theta)` and its gradient for one shard.
pub fn local_loss_grad(theta: &Point, shard: &dyn LocalLoss) -> Result<LossValueGrad> {
    shard.value_grad(theta)
}
