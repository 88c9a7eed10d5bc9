//! Regression tree and ensemble structure.
//!
//! Trees never store thresholds: every internal node carries a `SplitRef`
//! pointing at a split record kept privately by the owning party. Prediction
//! therefore takes a routing callback that resolves a `SplitRef` to a
//! left/right decision for the instance at hand.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{PartyId, RecordId};

/// Reference to a split operation held by some party's private record store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRef {
    pub party: PartyId,
    pub record: RecordId,
}

/// Which child an instance is routed to at a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeNode {
    pub node_id: usize,
    pub depth: usize,
    pub split_ref: Option<SplitRef>,
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub leaf_weight: Option<f64>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.leaf_weight.is_some()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
    pub max_depth: usize,
}

impl RegressionTree {
    /// New tree with an unresolved root at depth 0.
    pub fn new(max_depth: usize) -> Self {
        RegressionTree {
            nodes: vec![TreeNode {
                node_id: 0,
                depth: 0,
                split_ref: None,
                left: None,
                right: None,
                leaf_weight: None,
            }],
            max_depth,
        }
    }

    pub fn root(&self) -> usize {
        0
    }

    /// Turns `node` into an internal node and appends fresh children,
    /// returning `(left_id, right_id)`.
    pub fn split_node(&mut self, node: usize, split_ref: SplitRef) -> Result<(usize, usize)> {
        let depth = self.node(node)?.depth;
        if depth >= self.max_depth {
            return Err(Error::Parameter(format!(
                "cannot split node {node} at depth {depth}: max_depth is {}",
                self.max_depth
            )));
        }
        let left = self.nodes.len();
        let right = left + 1;
        for id in [left, right] {
            self.nodes.push(TreeNode {
                node_id: id,
                depth: depth + 1,
                split_ref: None,
                left: None,
                right: None,
                leaf_weight: None,
            });
        }
        let n = &mut self.nodes[node];
        n.split_ref = Some(split_ref);
        n.left = Some(left);
        n.right = Some(right);
        Ok((left, right))
    }

    /// Seals `node` as a leaf with the given weight.
    pub fn set_leaf(&mut self, node: usize, weight: f64) -> Result<()> {
        let n = self
            .nodes
            .get_mut(node)
            .ok_or_else(|| Error::Parameter(format!("unknown node id {node}")))?;
        if n.left.is_some() {
            return Err(Error::Parameter(format!(
                "node {node} already split, cannot become a leaf"
            )));
        }
        n.leaf_weight = Some(weight);
        Ok(())
    }

    pub fn node(&self, id: usize) -> Result<&TreeNode> {
        self.nodes
            .get(id)
            .ok_or_else(|| Error::Parameter(format!("unknown node id {id}")))
    }

    /// Ids of internal nodes in id order.
    pub fn internal_nodes(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| !n.is_leaf())
    }

    /// Structural invariants: every non-leaf has both children and a split
    /// reference, every leaf has a weight and no children, and no node
    /// exceeds `max_depth`.
    pub fn validate(&self) -> Result<()> {
        for n in &self.nodes {
            if n.depth > self.max_depth {
                return Err(Error::Parameter(format!(
                    "node {} exceeds max_depth {}",
                    n.node_id, self.max_depth
                )));
            }
            match (n.is_leaf(), n.split_ref, n.left, n.right) {
                (true, None, None, None) => {}
                (false, Some(_), Some(_), Some(_)) => {}
                _ => {
                    return Err(Error::Parameter(format!(
                        "node {} is neither a proper leaf nor a proper split",
                        n.node_id
                    )))
                }
            }
        }
        Ok(())
    }

    /// Routes one instance to its leaf weight via the resolver callback.
    pub fn route<F>(&self, resolve: &mut F) -> Result<f64>
    where
        F: FnMut(SplitRef) -> Result<Side>,
    {
        let mut id = self.root();
        loop {
            let n = self.node(id)?;
            if let Some(w) = n.leaf_weight {
                return Ok(w);
            }
            let split = n.split_ref.ok_or_else(|| {
                Error::Routing(format!("node {id} has neither weight nor split"))
            })?;
            id = match resolve(split)? {
                Side::Left => n
                    .left
                    .ok_or_else(|| Error::Routing(format!("node {id} missing left child")))?,
                Side::Right => n
                    .right
                    .ok_or_else(|| Error::Routing(format!("node {id} missing right child")))?,
            };
        }
    }
}

/// Additive tree ensemble: `prediction = base_score + learning_rate · Σ_k tree_k(x)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ensemble {
    pub trees: Vec<RegressionTree>,
    pub learning_rate: f64,
    pub base_score: f64,
    pub lambda: f64,
    pub gamma: f64,
}

impl Ensemble {
    pub fn new(learning_rate: f64, base_score: f64, lambda: f64, gamma: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate <= 1.0) {
            return Err(Error::Parameter(format!(
                "learning_rate must be in (0, 1], got {learning_rate}"
            )));
        }
        if lambda < 0.0 || gamma < 0.0 {
            return Err(Error::Parameter(
                "lambda and gamma must be non-negative".into(),
            ));
        }
        Ok(Ensemble {
            trees: Vec::new(),
            learning_rate,
            base_score,
            lambda,
            gamma,
        })
    }
}

/// Prediction for one instance: routes every tree through `resolve` and
/// accumulates the leaf weights.
pub fn predict<F>(ensemble: &Ensemble, mut resolve: F) -> Result<f64>
where
    F: FnMut(SplitRef) -> Result<Side>,
{
    let mut acc = 0.0;
    for tree in &ensemble.trees {
        acc += tree.route(&mut resolve)?;
    }
    Ok(ensemble.base_score + ensemble.learning_rate * acc)
}
