//! Split scores and optimal leaf weights.

use crate::error::{Error, Result};

/// Gain of a split under the second-order objective:
/// `½·[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)] − γ`.
pub fn split_score_second_order(
    gl: f64,
    hl: f64,
    gr: f64,
    hr: f64,
    g: f64,
    h: f64,
    lambda: f64,
    gamma: f64,
) -> Result<f64> {
    for (name, denom) in [("H_L", hl + lambda), ("H_R", hr + lambda), ("H", h + lambda)] {
        if denom <= 0.0 {
            return Err(Error::NumericDomain(format!(
                "{name} + lambda must be positive, got {denom}"
            )));
        }
    }
    Ok(0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma)
}

/// First-order surrogate gain: `−G_L·G_R/λ`. Hessian-free, which is what
/// makes it usable on noise-perturbed gradients.
pub fn split_score_first_order(gl: f64, gr: f64, lambda: f64) -> Result<f64> {
    if lambda <= 0.0 {
        return Err(Error::Parameter(format!(
            "lambda must be positive for the first-order score, got {lambda}"
        )));
    }
    Ok(-(gl * gr) / lambda)
}

/// Optimal leaf weight under the second-order objective: `−G/(H+λ)`.
pub fn optimal_leaf_weight(g_leaf: f64, h_leaf: f64, lambda: f64) -> Result<f64> {
    let denom = h_leaf + lambda;
    if denom <= 0.0 {
        return Err(Error::NumericDomain(format!(
            "H_leaf + lambda must be positive, got {denom}"
        )));
    }
    Ok(-g_leaf / denom)
}

/// Optimal leaf weight under the first-order objective: `−G/λ`.
pub fn first_order_leaf_weight(g_leaf: f64, lambda: f64) -> Result<f64> {
    if lambda <= 0.0 {
        return Err(Error::Parameter(format!(
            "lambda must be positive for the first-order weight, got {lambda}"
        )));
    }
    Ok(-g_leaf / lambda)
}

/// Index and value of the best score in a candidate list.
///
/// Strict improvement keeps the lowest candidate index on ties, which is the
/// deterministic tie-break used by every protocol mode. `None` when the list
/// is empty or contains only `-inf` sentinels.
pub fn best_candidate(scores: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s == f64::NEG_INFINITY {
            continue;
        }
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((i, s)),
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_gradients_score_zero() {
        let s = split_score_second_order(0.0, 3.0, 0.0, 5.0, 0.0, 8.0, 1.0, 0.0).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn second_order_reference_value() {
        // Independent evaluation with exact fractions:
        // ½·(36/5 + 16/7 − 100/11) = ½·(2772 + 880 − 3500)/385 = 76/385.
        let expected = 76.0 / 385.0;
        let s = split_score_second_order(6.0, 4.0, 4.0, 6.0, 10.0, 10.0, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(s, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(s, 0.19740, epsilon = 1e-5);
    }

    #[test]
    fn second_order_symmetric_in_children() {
        let a = split_score_second_order(6.0, 4.0, 4.0, 6.0, 10.0, 10.0, 1.0, 0.3).unwrap();
        let b = split_score_second_order(4.0, 6.0, 6.0, 4.0, 10.0, 10.0, 1.0, 0.3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_positive_denominator_rejected() {
        let err = split_score_second_order(1.0, -2.0, 1.0, 1.0, 2.0, -1.0, 1.0, 0.0);
        assert!(matches!(err, Err(Error::NumericDomain(_))));
    }

    #[test]
    fn first_order_values() {
        assert_eq!(split_score_first_order(0.0, 7.3, 1.0).unwrap(), 0.0);
        assert_eq!(split_score_first_order(3.0, -5.0, 1.0).unwrap(), 15.0);
        assert_eq!(split_score_first_order(2.0, 2.0, 2.0).unwrap(), -2.0);
        assert!(matches!(
            split_score_first_order(1.0, 1.0, 0.0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn leaf_weights() {
        assert_eq!(optimal_leaf_weight(0.0, 5.0, 1.0).unwrap(), 0.0);
        assert_eq!(optimal_leaf_weight(2.0, 3.0, 1.0).unwrap(), -0.5);
        assert_eq!(optimal_leaf_weight(-4.0, 0.0, 2.0).unwrap(), 2.0);
        assert!(matches!(
            optimal_leaf_weight(1.0, -2.0, 1.0),
            Err(Error::NumericDomain(_))
        ));

        assert_eq!(first_order_leaf_weight(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(first_order_leaf_weight(3.0, 1.0).unwrap(), -3.0);
        assert_eq!(first_order_leaf_weight(-1.0, 0.5).unwrap(), 2.0);
        assert!(matches!(
            first_order_leaf_weight(1.0, -1.0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn best_candidate_tie_breaks_low_index() {
        assert_eq!(best_candidate(&[1.0, 2.0, 2.0, 0.5]), Some((1, 2.0)));
        assert_eq!(best_candidate(&[f64::NEG_INFINITY, -3.0]), Some((1, -3.0)));
        assert_eq!(best_candidate(&[]), None);
        assert_eq!(best_candidate(&[f64::NEG_INFINITY]), None);
    }

    #[test]
    fn argmax_invariant_to_gamma_shift() {
        // γ shifts every candidate score equally, so the argmax is unchanged.
        let gl = [6.0, 1.0, -3.0, 4.0];
        let hl = [4.0, 2.0, 3.0, 5.0];
        let (g, h) = (10.0, 10.0);
        for gamma in [0.0, 0.7, 5.0] {
            let scores: Vec<f64> = gl
                .iter()
                .zip(&hl)
                .map(|(&gl_i, &hl_i)| {
                    split_score_second_order(gl_i, hl_i, g - gl_i, h - hl_i, g, h, 1.0, gamma)
                        .unwrap()
                })
                .collect();
            assert_eq!(best_candidate(&scores).unwrap().0, 0);
        }
    }
}
