//! Split candidate proposal, the splitting operator and per-candidate
//! gradient/hessian aggregation.
//!
//! A splitting matrix is the passive party's private object: column `j`
//! marks with `1` every user whose feature value is at or below threshold
//! `s_j` (left-node membership).

use crate::error::{Error, Result};
use crate::linalg::{RealMatrix, RealVector};
use crate::types::InstanceId;

/// Per-column provenance of a splitting matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMeta {
    pub feature: String,
    pub threshold: f64,
}

/// Ordered thresholds proposed for one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidateSet {
    pub feature: String,
    pub thresholds: Vec<f64>,
}

impl SplitCandidateSet {
    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }
}

/// Binary candidate-membership matrix with row/column bookkeeping.
#[derive(Debug, Clone)]
pub struct SplittingMatrix {
    entries: RealMatrix,
    column_meta: Vec<ColumnMeta>,
    user_ids: Vec<InstanceId>,
}

impl SplittingMatrix {
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &RealMatrix {
        &self.entries
    }

    pub fn column_meta(&self) -> &[ColumnMeta] {
        &self.column_meta
    }

    pub fn user_ids(&self) -> &[InstanceId] {
        &self.user_ids
    }

    /// Row-aligned user ids of the left node of candidate `col`.
    pub fn left_members(&self, col: usize) -> Vec<InstanceId> {
        self.entries
            .column(col)
            .iter()
            .zip(&self.user_ids)
            .filter(|(&e, _)| e == 1.0)
            .map(|(_, &id)| id)
            .collect()
    }
}

/// Proposes up to `l` thresholds at evenly spaced quantile ranks of the
/// sorted distinct values. Thresholds are midpoints between consecutive
/// distinct values, so no instance sits on a boundary. Returns `None` for a
/// constant feature (no valid split exists).
pub fn propose_candidates(
    feature: &str,
    values: &[f64],
    l: usize,
) -> Result<Option<SplitCandidateSet>> {
    if values.len() < 2 {
        return Err(Error::Parameter(format!(
            "need at least 2 values to propose candidates, got {}",
            values.len()
        )));
    }
    if l == 0 {
        return Err(Error::Parameter("candidate count l must be >= 1".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("feature values must not be NaN"));
    sorted.dedup();
    let m = sorted.len();
    if m < 2 {
        return Ok(None);
    }

    // Choose up to l strictly increasing cut positions k in 1..m, evenly
    // spaced over the distinct-value ranks; the threshold for cut k is the
    // midpoint of sorted[k-1] and sorted[k].
    let t = l.min(m - 1);
    let mut cuts = Vec::with_capacity(t);
    let mut prev = 0usize;
    for j in 1..=t {
        let k = ((j * m) / (t + 1)).clamp(prev + 1, m - 1 - (t - j));
        cuts.push(k);
        prev = k;
    }
    let mut thresholds: Vec<f64> = cuts
        .iter()
        .map(|&k| 0.5 * (sorted[k - 1] + sorted[k]))
        .collect();
    thresholds.dedup();
    Ok(Some(SplitCandidateSet {
        feature: feature.to_string(),
        thresholds,
    }))
}

/// Applies the splitting operator: `M[i][j] = 1` iff `values[i] <= s_j`.
pub fn split_operator(
    values: &[f64],
    candidates: &SplitCandidateSet,
    user_ids: &[InstanceId],
) -> Result<SplittingMatrix> {
    if values.is_empty() {
        return Err(Error::Dimension("feature vector must be non-empty".into()));
    }
    if values.len() != user_ids.len() {
        return Err(Error::Dimension(format!(
            "feature vector ({}) and user ids ({}) must have equal length",
            values.len(),
            user_ids.len()
        )));
    }
    let n = values.len();
    let l = candidates.len();
    let entries = RealMatrix::from_fn(n, l, |i, j| {
        if values[i] <= candidates.thresholds[j] {
            1.0
        } else {
            0.0
        }
    });
    let column_meta = candidates
        .thresholds
        .iter()
        .map(|&threshold| ColumnMeta {
            feature: candidates.feature.clone(),
            threshold,
        })
        .collect();
    Ok(SplittingMatrix {
        entries,
        column_meta,
        user_ids: user_ids.to_vec(),
    })
}

/// Horizontal concatenation of per-feature splitting matrices over an
/// identical user-id ordering.
pub fn merge_feature_matrices(matrices: &[SplittingMatrix]) -> Result<SplittingMatrix> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::Dimension("cannot merge zero matrices".into()))?;
    for m in matrices {
        if m.user_ids != first.user_ids {
            return Err(Error::Dimension(
                "merged splitting matrices must share the same user ids".into(),
            ));
        }
    }
    let n = first.rows();
    let total: usize = matrices.iter().map(|m| m.cols()).sum();
    let mut entries = RealMatrix::zeros(n, total);
    let mut column_meta = Vec::with_capacity(total);
    let mut offset = 0;
    for m in matrices {
        entries.view_mut((0, offset), (n, m.cols())).copy_from(&m.entries);
        column_meta.extend(m.column_meta.iter().cloned());
        offset += m.cols();
    }
    Ok(SplittingMatrix {
        entries,
        column_meta,
        user_ids: first.user_ids.clone(),
    })
}

/// Aggregated gradients and hessians per candidate (left and right node).
#[derive(Debug, Clone)]
pub struct NodeAggregates {
    pub gl: RealVector,
    pub hl: RealVector,
    pub gr: RealVector,
    pub hr: RealVector,
}

/// `G_L = Mᵀg`, `H_L = Mᵀh`, with right-node values from the totals:
/// `G_R = G·1 − G_L`, `H_R = H·1 − H_L`.
pub fn aggregate(
    m: &SplittingMatrix,
    g: &RealVector,
    h: &RealVector,
    g_total: f64,
    h_total: f64,
) -> Result<NodeAggregates> {
    if m.rows() != g.len() || m.rows() != h.len() {
        return Err(Error::Dimension(format!(
            "splitting matrix has {} rows but gradients/hessians have {}/{}",
            m.rows(),
            g.len(),
            h.len()
        )));
    }
    let gl = m.entries.transpose() * g;
    let hl = m.entries.transpose() * h;
    let gr = RealVector::from_iterator(gl.len(), gl.iter().map(|&x| g_total - x));
    let hr = RealVector::from_iterator(hl.len(), hl.iter().map(|&x| h_total - x));
    Ok(NodeAggregates { gl, hl, gr, hr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example_feature() -> Vec<f64> {
        vec![1.0, 11.0, 9.0, 4.0, 2.0, 12.0, 17.0, 13.0, 5.0]
    }

    fn example_matrix() -> SplittingMatrix {
        let cands = SplitCandidateSet {
            feature: "f".into(),
            thresholds: vec![11.0, 6.0, 12.0],
        };
        // Thresholds here are deliberately unordered; the operator itself
        // does not require sorted candidates.
        split_operator(&example_feature(), &cands, &(0..9).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn splitting_operator_reference_columns() {
        let m = example_matrix();
        let expected = [
            [1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0],
        ];
        for (j, col) in expected.iter().enumerate() {
            let got: Vec<f64> = m.entries().column(j).iter().copied().collect();
            assert_eq!(&got, col, "column {j}");
        }
    }

    #[test]
    fn extreme_thresholds() {
        let f = example_feature();
        let ids: Vec<u64> = (0..9).collect();
        let below = SplitCandidateSet {
            feature: "f".into(),
            thresholds: vec![0.5],
        };
        let above = SplitCandidateSet {
            feature: "f".into(),
            thresholds: vec![17.0],
        };
        let m_below = split_operator(&f, &below, &ids).unwrap();
        let m_above = split_operator(&f, &above, &ids).unwrap();
        assert!(m_below.entries().column(0).iter().all(|&e| e == 0.0));
        assert!(m_above.entries().column(0).iter().all(|&e| e == 1.0));
    }

    #[test]
    fn aggregate_reference_values() {
        // Brute-force oracle: sum g_i over users with x_i <= s_j.
        let m = example_matrix();
        let g = RealVector::from_iterator(9, (1..=9).map(|i| i as f64));
        let h = RealVector::from_element(9, 1.0);
        let agg = aggregate(&m, &g, &h, 45.0, 9.0).unwrap();
        let f = example_feature();
        for (j, &s) in [11.0, 6.0, 12.0].iter().enumerate() {
            let brute: f64 = f
                .iter()
                .zip(1..=9)
                .filter(|(&x, _)| x <= s)
                .map(|(_, gi)| gi as f64)
                .sum();
            assert_eq!(agg.gl[j], brute);
            assert_eq!(agg.gr[j], 45.0 - brute);
        }
        assert_eq!(agg.gl.as_slice(), &[24.0, 19.0, 30.0]);
        assert_eq!(agg.gr.as_slice(), &[21.0, 26.0, 15.0]);
    }

    #[test]
    fn aggregate_zero_gradients() {
        let m = example_matrix();
        let g = RealVector::zeros(9);
        let h = RealVector::from_element(9, 0.5);
        let agg = aggregate(&m, &g, &h, 0.0, 4.5).unwrap();
        assert!(agg.gl.iter().all(|&x| x == 0.0));
        assert!(agg.gr.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn aggregate_full_left_column() {
        let f = vec![1.0, 2.0, 3.0];
        let cands = SplitCandidateSet {
            feature: "f".into(),
            thresholds: vec![10.0],
        };
        let m = split_operator(&f, &cands, &[0, 1, 2]).unwrap();
        let g = RealVector::from_vec(vec![0.3, -0.2, 0.5]);
        let h = RealVector::from_element(3, 1.0);
        let agg = aggregate(&m, &g, &h, 0.6, 3.0).unwrap();
        assert!((agg.gl[0] - 0.6).abs() < 1e-15);
        assert!(agg.gr[0].abs() < 1e-15);
    }

    #[test]
    fn propose_quartile_spaced() {
        // Oracle by index arithmetic: 9 distinct values, 3 cuts at ranks
        // floor(j*9/4) = 2, 4, 6 giving midpoints 2.5, 4.5, 6.5.
        let values: Vec<f64> = (1..=9).map(|i| i as f64).collect();
        let c = propose_candidates("f", &values, 3).unwrap().unwrap();
        assert_eq!(c.thresholds, vec![2.5, 4.5, 6.5]);
    }

    #[test]
    fn propose_constant_feature_is_none() {
        let c = propose_candidates("f", &[4.0, 4.0, 4.0], 3).unwrap();
        assert!(c.is_none());
    }

    #[test]
    fn propose_two_values_one_cut() {
        let c = propose_candidates("f", &[1.0, 2.0], 5).unwrap().unwrap();
        assert_eq!(c.thresholds, vec![1.5]);
    }

    #[test]
    fn merge_preserves_meta_order() {
        let ids: Vec<u64> = (0..9).collect();
        let f1 = example_feature();
        let c1 = propose_candidates("a", &f1, 1).unwrap().unwrap();
        let m1 = split_operator(&f1, &c1, &ids).unwrap();
        let f2: Vec<f64> = f1.iter().map(|x| -x).collect();
        let c2 = propose_candidates("b", &f2, 1).unwrap().unwrap();
        let m2 = split_operator(&f2, &c2, &ids).unwrap();

        let merged = merge_feature_matrices(&[m1.clone(), m2.clone()]).unwrap();
        assert_eq!(merged.cols(), 2);
        assert_eq!(merged.column_meta()[0].feature, "a");
        assert_eq!(merged.column_meta()[1].feature, "b");

        let single = merge_feature_matrices(&[m1.clone()]).unwrap();
        assert_eq!(single.entries(), m1.entries());

        let mut other = m2;
        other.user_ids[0] = 99;
        assert!(merge_feature_matrices(&[m1, other]).is_err());
    }

    proptest! {
        /// Aggregation equals a brute-force loop over left-node member lists.
        #[test]
        fn aggregate_matches_brute_force(
            values in proptest::collection::vec(-50.0f64..50.0, 2..50),
            grads in proptest::collection::vec(-3.0f64..3.0, 50),
            l in 1usize..8,
        ) {
            let n = values.len();
            let ids: Vec<u64> = (0..n as u64).collect();
            if let Some(cands) = propose_candidates("f", &values, l).unwrap() {
                let m = split_operator(&values, &cands, &ids).unwrap();
                let g = RealVector::from_vec(grads[..n].to_vec());
                let h = RealVector::from_iterator(n, g.iter().map(|x| x.abs() + 0.1));
                let (gt, ht) = (g.sum(), h.sum());
                let agg = aggregate(&m, &g, &h, gt, ht).unwrap();
                for (j, &s) in cands.thresholds.iter().enumerate() {
                    let mut bg = 0.0;
                    let mut bh = 0.0;
                    for i in 0..n {
                        if values[i] <= s {
                            bg += g[i];
                            bh += h[i];
                        }
                    }
                    prop_assert!((agg.gl[j] - bg).abs() <= 1e-9);
                    prop_assert!((agg.hl[j] - bh).abs() <= 1e-9);
                    // Left and right sums rebuild the totals.
                    prop_assert!((agg.gl[j] + agg.gr[j] - gt).abs() <= 1e-12 * (1.0 + gt.abs()));
                    prop_assert!((agg.hl[j] + agg.hr[j] - ht).abs() <= 1e-12 * (1.0 + ht.abs()));
                }
            }
        }

        /// Columns of the splitting matrix are nested: for thresholds in
        /// increasing order, each left set contains the previous one.
        #[test]
        fn split_operator_columns_monotone(
            values in proptest::collection::vec(-100.0f64..100.0, 2..40),
            l in 1usize..10,
        ) {
            let ids: Vec<u64> = (0..values.len() as u64).collect();
            if let Some(cands) = propose_candidates("f", &values, l).unwrap() {
                let m = split_operator(&values, &cands, &ids).unwrap();
                for j in 1..m.cols() {
                    prop_assert!(cands.thresholds[j - 1] < cands.thresholds[j]);
                    for i in 0..m.rows() {
                        prop_assert!(m.entries()[(i, j - 1)] <= m.entries()[(i, j)]);
                    }
                }
                for e in m.entries().iter() {
                    prop_assert!(*e == 0.0 || *e == 1.0);
                }
            }
        }

        /// Proposed thresholds are strictly increasing and never exceed l.
        #[test]
        fn propose_candidates_well_formed(
            values in proptest::collection::vec(-10.0f64..10.0, 2..60),
            l in 1usize..12,
        ) {
            if let Some(c) = propose_candidates("f", &values, l).unwrap() {
                prop_assert!(!c.thresholds.is_empty());
                prop_assert!(c.thresholds.len() <= l);
                for w in c.thresholds.windows(2) {
                    prop_assert!(w[0] < w[1]);
                }
                // Midpoint placement: every threshold separates at least one
                // value on each side.
                for &t in &c.thresholds {
                    prop_assert!(values.iter().any(|&v| v <= t));
                    prop_assert!(values.iter().any(|&v| v > t));
                }
            }
        }
    }
}
