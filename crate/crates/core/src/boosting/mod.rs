//! Centralized tree-boosting mathematics: losses and their derivatives,
//! split scores, leaf weights, tree/ensemble structure and prediction.
//!
//! Everything here is a pure function over value types and is used both
//! standalone and by the federation drivers.

mod loss;
mod score;
mod tree;

pub use loss::{compute_grad_hess, GradHessVectors, LossFunction};
pub use score::{
    best_candidate, first_order_leaf_weight, optimal_leaf_weight, split_score_first_order,
    split_score_second_order,
};
pub use tree::{predict, Ensemble, RegressionTree, Side, SplitRef, TreeNode};
