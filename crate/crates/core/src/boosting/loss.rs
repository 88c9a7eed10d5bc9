//! Differentiable convex losses and per-instance derivative vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RealVector;
use crate::types::InstanceId;

/// Supported training losses. Both are convex, so the second derivative is
/// non-negative everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossFunction {
    /// `l(y, ŷ) = (y − ŷ)² / 2`; predictions live in label space.
    SquaredError,
    /// Binary cross-entropy on logits: `l(y, ŷ) = ln(1 + e^ŷ) − y·ŷ`.
    Logistic,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LossFunction {
    /// Loss value for one instance.
    pub fn value(&self, y: f64, yhat: f64) -> f64 {
        match self {
            LossFunction::SquaredError => 0.5 * (y - yhat) * (y - yhat),
            // Stable form of ln(1 + e^ŷ) − y·ŷ.
            LossFunction::Logistic => yhat.max(0.0) - y * yhat + (-yhat.abs()).exp().ln_1p(),
        }
    }

    /// First derivative w.r.t. the prediction.
    pub fn grad(&self, y: f64, yhat: f64) -> f64 {
        match self {
            LossFunction::SquaredError => yhat - y,
            LossFunction::Logistic => sigmoid(yhat) - y,
        }
    }

    /// Second derivative w.r.t. the prediction; non-negative for both losses.
    pub fn hess(&self, _y: f64, yhat: f64) -> f64 {
        match self {
            LossFunction::SquaredError => 1.0,
            LossFunction::Logistic => {
                let s = sigmoid(yhat);
                s * (1.0 - s)
            }
        }
    }

    /// Mean loss over aligned label/prediction slices.
    pub fn mean_loss(&self, labels: &[f64], predictions: &[f64]) -> f64 {
        let n = labels.len().max(1);
        labels
            .iter()
            .zip(predictions)
            .map(|(&y, &p)| self.value(y, p))
            .sum::<f64>()
            / n as f64
    }
}

/// Per-instance first and second derivatives held by the active party.
#[derive(Debug, Clone)]
pub struct GradHessVectors {
    pub grad: RealVector,
    pub hess: RealVector,
    pub instance_ids: Vec<InstanceId>,
}

impl GradHessVectors {
    pub fn len(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instance_ids.is_empty()
    }

    /// Sum of gradients and hessians over all instances.
    pub fn totals(&self) -> (f64, f64) {
        (self.grad.sum(), self.hess.sum())
    }
}

/// Evaluates per-instance derivatives of `loss` at the current predictions.
pub fn compute_grad_hess(
    loss: LossFunction,
    labels: &[f64],
    predictions: &[f64],
    instance_ids: &[InstanceId],
) -> Result<GradHessVectors> {
    if labels.is_empty() {
        return Err(Error::Dimension("labels must be non-empty".into()));
    }
    if labels.len() != predictions.len() || labels.len() != instance_ids.len() {
        return Err(Error::Dimension(format!(
            "labels ({}), predictions ({}) and ids ({}) must have equal length",
            labels.len(),
            predictions.len(),
            instance_ids.len()
        )));
    }
    let grad = RealVector::from_iterator(
        labels.len(),
        labels
            .iter()
            .zip(predictions)
            .map(|(&y, &p)| loss.grad(y, p)),
    );
    let hess = RealVector::from_iterator(
        labels.len(),
        labels
            .iter()
            .zip(predictions)
            .map(|(&y, &p)| loss.hess(y, p)),
    );
    Ok(GradHessVectors {
        grad,
        hess,
        instance_ids: instance_ids.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn squared_error_at_minimum() {
        let gh = compute_grad_hess(LossFunction::SquaredError, &[3.0], &[3.0], &[0]).unwrap();
        assert_eq!(gh.grad[0], 0.0);
        assert_eq!(gh.hess[0], 1.0);
    }

    #[test]
    fn logistic_at_zero_logit() {
        let gh = compute_grad_hess(LossFunction::Logistic, &[0.0], &[0.0], &[0]).unwrap();
        assert_abs_diff_eq!(gh.grad[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(gh.hess[0], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn squared_error_symbolic() {
        // d/dŷ (y − ŷ)²/2 = ŷ − y, second derivative 1.
        let gh =
            compute_grad_hess(LossFunction::SquaredError, &[1.0, 2.0], &[0.0, 0.0], &[0, 1])
                .unwrap();
        assert_eq!(gh.grad.as_slice(), &[-1.0, -2.0]);
        assert_eq!(gh.hess.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn length_mismatch_rejected() {
        let err = compute_grad_hess(LossFunction::Logistic, &[1.0], &[0.0, 0.0], &[0, 1]);
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        // Central differences at δ = 1e−5 over a (y, ŷ) grid; both the first
        // derivative and the hessian (via the derivative of g) must agree to
        // 1e−6.
        let delta = 1e-5;
        let preds = [-4.0, -1.5, -0.3, 0.0, 0.7, 2.0, 5.0];
        for loss in [LossFunction::SquaredError, LossFunction::Logistic] {
            let labels: &[f64] = match loss {
                LossFunction::SquaredError => &[-2.0, 0.0, 1.0, 3.5],
                LossFunction::Logistic => &[0.0, 1.0],
            };
            for &y in labels {
                for &p in &preds {
                    let fd_g = (loss.value(y, p + delta) - loss.value(y, p - delta)) / (2.0 * delta);
                    let fd_h = (loss.grad(y, p + delta) - loss.grad(y, p - delta)) / (2.0 * delta);
                    assert!(
                        (loss.grad(y, p) - fd_g).abs() <= 1e-6,
                        "grad mismatch for {loss:?} at y={y} p={p}"
                    );
                    assert!(
                        (loss.hess(y, p) - fd_h).abs() <= 1e-6,
                        "hess mismatch for {loss:?} at y={y} p={p}"
                    );
                    assert!(loss.hess(y, p) >= 0.0);
                }
            }
        }
    }
}
